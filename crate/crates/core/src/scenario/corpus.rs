use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::{
    generate_day_contexts, generate_labeled_history, generate_network, generate_ridership_params,
    truth_probabilities, GeneratorConfig, GroundTruth, Result, ScenarioError,
};
use crate::forecast::io::{write_day_context, write_labeled_trips};
use crate::forecast::{LabeledTrip, TripContext};
use crate::network::Schedule;
use crate::rng::derive_seed;
use crate::sim::{Chain, RidershipParams};
use crate::stationing::sample_day_chains;

const TRUTH_CHAIN_STREAM: u64 = 4;

pub const LABELED_TRIPS_FILE: &str = "labeled_trips.csv";
pub const CONTEXT_DIR: &str = "contexts";
pub const RIDERSHIP_FILE: &str = "ridership.json";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";
pub const TRUTH_CHAINS_FILE: &str = "truth_chains.json";

/// Everything the generator produces for one configuration.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub schedule: Schedule,
    pub history: Vec<LabeledTrip>,
    pub contexts: Vec<BTreeMap<String, TripContext>>,
    pub ridership: RidershipParams,
    pub truth: GroundTruth,
    /// Chains drawn from the true disruption process of each context.
    pub truth_chains: Vec<Chain>,
}

impl Corpus {
    pub fn generate(cfg: &GeneratorConfig) -> Result<Self> {
        let schedule = generate_network(cfg)?;
        let history = generate_labeled_history(cfg, &schedule)?;
        let contexts = generate_day_contexts(cfg, &schedule)?;
        let ridership = generate_ridership_params(cfg, &schedule)?;
        let truth = cfg.ground_truth();
        let truth_chains = if cfg.truth_chains == 0 {
            Vec::new()
        } else {
            let probs = contexts
                .iter()
                .map(|c| truth_probabilities(&truth, &schedule, c))
                .collect::<Result<Vec<_>>>()?;
            sample_day_chains(
                &schedule,
                &probs,
                &ridership,
                cfg.truth_chains,
                derive_seed(cfg.seed, TRUTH_CHAIN_STREAM),
            )?
        };
        Ok(Self {
            schedule,
            history,
            contexts,
            ridership,
            truth,
            truth_chains,
        })
    }
}

/// Paths written by [`write_corpus`], relative to the output directory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusFiles {
    pub files: Vec<PathBuf>,
}

pub fn context_file(day: usize) -> PathBuf {
    Path::new(CONTEXT_DIR).join(format!("day_{day:03}.csv"))
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::Io(format!("{}: {e}", path.display()))
}

/// Generates the corpus and writes it under `dir`.
pub fn write_corpus(cfg: &GeneratorConfig, dir: &Path) -> Result<CorpusFiles> {
    let corpus = Corpus::generate(cfg)?;
    fs::create_dir_all(dir.join(CONTEXT_DIR)).map_err(|e| io_err(dir, e))?;
    let mut files: Vec<PathBuf> = [
        "stops.csv",
        "route_directions.csv",
        "trips.csv",
        "stop_times.csv",
        "network.json",
    ]
    .iter()
    .map(PathBuf::from)
    .collect();
    corpus.schedule.write(dir)?;

    write_labeled_trips(&dir.join(LABELED_TRIPS_FILE), &corpus.history)?;
    files.push(LABELED_TRIPS_FILE.into());
    for (d, ctx) in corpus.contexts.iter().enumerate() {
        let rel = context_file(d);
        write_day_context(&dir.join(&rel), ctx)?;
        files.push(rel);
    }
    corpus.ridership.save(&dir.join(RIDERSHIP_FILE))?;
    files.push(RIDERSHIP_FILE.into());
    let truth_path = dir.join(GROUND_TRUTH_FILE);
    fs::write(&truth_path, corpus.truth.to_json() + "\n").map_err(|e| io_err(&truth_path, e))?;
    files.push(GROUND_TRUTH_FILE.into());
    Chain::save_many(&corpus.truth_chains, &dir.join(TRUTH_CHAINS_FILE))?;
    files.push(TRUTH_CHAINS_FILE.into());
    Ok(CorpusFiles { files })
}

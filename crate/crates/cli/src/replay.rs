use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use log::warn;
use serde::Serialize;
use stationing::scenario::TRUTH_CHAINS_FILE;
use stationing::sim::CostWeights;
use stationing::stationing::{
    baseline_plan, PlanReport, Provenance, SimEvaluator, StationingError,
};

use crate::io::{ensure_dir, fmt_f64, load_schedule, write_csv, write_json};
use crate::manifest::Recorder;
use crate::simulate::{load_chains, load_plan, load_policy};
use crate::Globals;

pub const REPLAY_CSV: &str = "replay.csv";
pub const REPLAY_JSON: &str = "replay.json";

#[derive(Debug, Args, Serialize)]
pub struct ReplayArgs {
    /// Corpus or schedule directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Plan(s) to replay; repeat the flag to compare several.
    #[arg(long, required = true)]
    pub plan: Vec<PathBuf>,
    /// Held-out chains (default: the corpus ground-truth chains).
    #[arg(long)]
    pub chains: Option<PathBuf>,
    /// Dispatch policy overrides (TOML).
    #[arg(long)]
    pub policy: Option<PathBuf>,
    /// Skip the Garage, Hub and Agency rows.
    #[arg(long)]
    pub no_baselines: bool,
}

#[derive(Debug, Serialize)]
struct Replay {
    v: u32,
    n_chains: usize,
    plans: Vec<PlanReport>,
}

pub fn run(globals: &Globals, args: ReplayArgs) -> Result<()> {
    let mut rec = Recorder::new();
    let schedule = load_schedule(&args.data, &mut rec)?;
    let plans = args
        .plan
        .iter()
        .map(|p| load_plan(p, &mut rec))
        .collect::<Result<Vec<_>>>()?;
    for p in &plans {
        p.validate(&schedule)?;
    }
    let chains_path = args
        .chains
        .clone()
        .unwrap_or_else(|| args.data.join(TRUTH_CHAINS_FILE));
    let chains = load_chains(&chains_path, &mut rec)?;
    let policy = load_policy(args.policy.as_ref(), &mut rec)?;
    ensure_dir(&globals.out)?;

    let mut to_run = Vec::new();
    if !args.no_baselines {
        let k = plans[0].k();
        for kind in [Provenance::Garage, Provenance::Hub, Provenance::Agency] {
            match baseline_plan(kind, &schedule, k) {
                Ok(p) => to_run.push(p),
                Err(
                    e @ (StationingError::MissingAgencyPlan | StationingError::InfeasiblePlan(_)),
                ) => {
                    warn!("skipping the {kind} baseline: {e}")
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    to_run.extend(plans);

    let mut evaluator = SimEvaluator::new(&schedule, &chains, &policy, CostWeights::default())?;
    let mut reports = Vec::with_capacity(to_run.len());
    for plan in &to_run {
        let est = evaluator.estimate(plan)?;
        reports.push(PlanReport::new(plan, &est));
    }

    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.provenance.to_string(),
                r.assignments.len().to_string(),
                r.assignments.join(";"),
                fmt_f64(r.mean_cost),
                fmt_f64(r.std_error),
                fmt_f64(r.deadhead_miles),
                fmt_f64(r.deadhead_minutes),
                fmt_f64(r.left_behind),
            ]
        })
        .collect();
    write_csv(
        &globals.out.join(REPLAY_CSV),
        &[
            "provenance",
            "k",
            "assignments",
            "mean_cost",
            "std_error",
            "deadhead_miles",
            "deadhead_minutes",
            "left_behind",
        ],
        &rows,
    )?;
    rec.output(REPLAY_CSV);
    write_json(
        &globals.out.join(REPLAY_JSON),
        &Replay {
            v: 1,
            n_chains: chains.len(),
            plans: reports,
        },
    )?;
    rec.output(REPLAY_JSON);
    rec.finish(globals, "replay", globals.seed(), &args)?;
    Ok(())
}

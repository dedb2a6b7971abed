use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use log::info;
use serde::Serialize;
use stationing::forecast::forecast_day;
use stationing::forecast::io::{read_day_context, ModelDocument};
use stationing::rng::derive_seed;
use stationing::scenario::RIDERSHIP_FILE;
use stationing::sim::RidershipParams;
use stationing::stationing::{
    optimize_stationing, Cooling, OptimizeConfig, StationingPlan, StationingReport,
};

use crate::errors;
use crate::io::{
    context_files, ensure_dir, fmt_f64, load_schedule, read_text, require_file, write_csv,
    write_json, write_text,
};
use crate::manifest::Recorder;
use crate::Globals;

pub const PLAN_FILE: &str = "plan.json";
pub const REPORT_FILE: &str = "report.json";
pub const HISTORY_FILE: &str = "history.csv";
pub const FORECAST_FILE: &str = "forecast.csv";

#[derive(Debug, Args, Serialize)]
pub struct OptimizeArgs {
    /// Corpus directory (schedule, contexts, ridership.json).
    #[arg(long)]
    pub data: PathBuf,
    /// Trained model document.
    #[arg(long)]
    pub model: PathBuf,
    /// Use only the first N day contexts (default: all, i.e. multi-day).
    #[arg(long)]
    pub days: Option<usize>,
    /// Optimizer settings (TOML); flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of substitute buses.
    #[arg(long)]
    pub k: Option<usize>,
    /// Chains sampled per day context.
    #[arg(long)]
    pub chains: Option<usize>,
    /// Annealing iterations.
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub initial_temp: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// `recursive` or `direct`.
    #[arg(long)]
    pub cooling: Option<String>,
    /// Evaluate the Garage, Hub and Agency plans only.
    #[arg(long)]
    pub baselines_only: bool,
}

fn build_config(
    globals: &Globals,
    args: &OptimizeArgs,
    rec: &mut Recorder,
) -> Result<OptimizeConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            require_file(path)?;
            rec.input(path);
            toml::from_str(&read_text(path)?)
                .map_err(|e| errors::usage(format!("{}: {e}", path.display())))?
        }
        None => OptimizeConfig::default(),
    };
    if let Some(seed) = globals.seed {
        cfg.chain_seed = seed;
        cfg.annealing.seed = derive_seed(seed, 1);
    }
    if let Some(k) = args.k {
        cfg.k = k;
    }
    if let Some(n) = args.chains {
        cfg.n_chains = n;
    }
    if let Some(n) = args.iters {
        cfg.annealing.n_iters = n;
    }
    if let Some(t) = args.initial_temp {
        cfg.annealing.initial_temp = t;
    }
    if let Some(g) = args.gamma {
        cfg.annealing.gamma = g;
    }
    if let Some(c) = &args.cooling {
        cfg.annealing.cooling = c.parse::<Cooling>().map_err(errors::usage)?;
    }
    cfg.baselines_only |= args.baselines_only;
    if cfg.n_chains == 0 {
        return Err(errors::usage("--chains must be at least 1"));
    }
    cfg.annealing.validate()?;
    cfg.policy.validate()?;
    Ok(cfg)
}

pub fn history_rows(report: &StationingReport) -> Vec<Vec<String>> {
    let h = &report.history;
    (0..h.iteration.len())
        .map(|i| {
            vec![
                h.iteration[i].to_string(),
                fmt_f64(h.temperature[i]),
                fmt_f64(h.proposed_cost[i]),
                h.accepted[i].to_string(),
                fmt_f64(h.current_cost[i]),
                fmt_f64(h.best_cost[i]),
            ]
        })
        .collect()
}

pub fn run(globals: &Globals, args: OptimizeArgs) -> Result<()> {
    let mut rec = Recorder::new();
    let cfg = build_config(globals, &args, &mut rec)?;
    let schedule = load_schedule(&args.data, &mut rec)?;
    require_file(&args.model)?;
    let doc = ModelDocument::load(&args.model)?;
    rec.input(&args.model);
    let ridership_path = args.data.join(RIDERSHIP_FILE);
    require_file(&ridership_path)?;
    let ridership = RidershipParams::load(&ridership_path)?;
    ridership.validate(&schedule)?;
    rec.input(&ridership_path);

    let mut contexts = context_files(&args.data)?;
    if let Some(n) = args.days {
        if n == 0 || n > contexts.len() {
            return Err(errors::usage(format!(
                "--days must be between 1 and {}",
                contexts.len()
            )));
        }
        contexts.truncate(n);
    }
    let mut day_probs: Vec<BTreeMap<String, f64>> = Vec::with_capacity(contexts.len());
    for path in &contexts {
        let ctx = read_day_context(path).with_context(|| format!("reading {}", path.display()))?;
        rec.input(path);
        day_probs.push(forecast_day(
            &doc.model,
            doc.calibrator.as_ref(),
            &schedule,
            &ctx,
        )?);
    }
    ensure_dir(&globals.out)?;
    let forecast_rows: Vec<Vec<String>> = day_probs
        .iter()
        .enumerate()
        .flat_map(|(d, probs)| {
            probs
                .iter()
                .map(move |(t, p)| vec![d.to_string(), t.clone(), fmt_f64(*p)])
        })
        .collect();
    write_csv(
        &globals.out.join(FORECAST_FILE),
        &["day", "trip_id", "probability"],
        &forecast_rows,
    )?;
    rec.output(FORECAST_FILE);

    info!(
        "optimizing k={} over {} day(s) x {} chains",
        cfg.k,
        day_probs.len(),
        cfg.n_chains
    );
    let report = optimize_stationing(&schedule, &day_probs, &ridership, &cfg)?;
    if let (Some(g), Some(s)) = (report.greedy_cost, report.search_cost) {
        if s > g {
            return Err(errors::internal(format!(
                "search cost {s} exceeds greedy cost {g}"
            )));
        }
    }

    let plan = match report.winning_plan() {
        Some(p) => p,
        None => {
            let best = report
                .plans
                .iter()
                .min_by(|a, b| a.mean_cost.total_cmp(&b.mean_cost))
                .ok_or_else(|| errors::internal("no plan was evaluated"))?;
            StationingPlan::new(best.assignments.clone(), best.provenance)
        }
    };
    write_text(&globals.out.join(PLAN_FILE), &(plan.to_json() + "\n"))?;
    rec.output(PLAN_FILE);
    write_json(&globals.out.join(REPORT_FILE), &report)?;
    rec.output(REPORT_FILE);
    write_csv(
        &globals.out.join(HISTORY_FILE),
        &[
            "iteration",
            "temperature",
            "proposed_cost",
            "accepted",
            "current_cost",
            "best_cost",
        ],
        &history_rows(&report),
    )?;
    rec.output(HISTORY_FILE);
    rec.finish(
        globals,
        "optimize",
        cfg.chain_seed,
        &Snapshot {
            args: &args,
            optimizer: &cfg,
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct Snapshot<'a> {
    args: &'a OptimizeArgs,
    optimizer: &'a OptimizeConfig,
}

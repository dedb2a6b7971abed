use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;
use stationing::rng::derive_seed;
use stationing::scenario::TRUTH_CHAINS_FILE;
use stationing::sim::{simulate_day, trace_to_jsonl, Chain, PolicyConfig, SimOutcome, SimStats};
use stationing::stationing::StationingPlan;

use crate::errors;
use crate::io::{ensure_dir, load_schedule, read_text, require_file, write_json, write_text};
use crate::manifest::Recorder;
use crate::Globals;

pub const SIMULATION_FILE: &str = "simulation.json";
pub const TRACE_DIR: &str = "traces";

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Corpus or schedule directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Stationing plan to simulate.
    #[arg(long)]
    pub plan: PathBuf,
    /// Chains to replay (JSON array; default: the corpus ground-truth chains).
    #[arg(long)]
    pub chains: Option<PathBuf>,
    /// Dispatch policy overrides (TOML).
    #[arg(long)]
    pub policy: Option<PathBuf>,
    /// Also write one JSONL event trace per chain.
    #[arg(long)]
    pub trace: bool,
}

pub fn load_policy(path: Option<&PathBuf>, rec: &mut Recorder) -> Result<PolicyConfig> {
    let Some(path) = path else {
        return Ok(PolicyConfig::default());
    };
    require_file(path)?;
    let policy: PolicyConfig = toml::from_str(&read_text(path)?)
        .map_err(|e| errors::usage(format!("{}: {e}", path.display())))?;
    policy.validate()?;
    rec.input(path);
    Ok(policy)
}

pub fn load_plan(path: &PathBuf, rec: &mut Recorder) -> Result<StationingPlan> {
    require_file(path)?;
    let plan = StationingPlan::load(path).with_context(|| format!("reading {}", path.display()))?;
    rec.input(path);
    Ok(plan)
}

pub fn load_chains(path: &PathBuf, rec: &mut Recorder) -> Result<Vec<Chain>> {
    require_file(path)?;
    let chains = Chain::load_many(path).with_context(|| format!("reading {}", path.display()))?;
    rec.input(path);
    if chains.is_empty() {
        return Err(errors::usage(format!("{} holds no chains", path.display())));
    }
    Ok(chains)
}

/// Rider and flow conservation; a violation is an engine bug.
pub fn check_conservation(chain_id: u64, out: &SimOutcome) -> Result<()> {
    let s = &out.stats;
    if s.arrivals != s.served + s.left_behind || s.onboard_at_end != 0 {
        return Err(errors::internal(format!(
            "chain {chain_id}: {} arrivals but {} served and {} left behind",
            s.arrivals, s.served, s.left_behind
        )));
    }
    for f in &out.flows {
        if f.boarded != f.alighted + f.unloaded + f.onboard_at_end {
            return Err(errors::internal(format!(
                "chain {chain_id}: flow through {} does not balance",
                f.bus_id
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct ChainResult {
    chain_id: u64,
    seed: u64,
    total_cost: f64,
    deadhead_miles: f64,
    deadhead_minutes: f64,
    left_behind: u64,
    left_behind_per_stop: std::collections::BTreeMap<String, u64>,
    stats: SimStats,
}

#[derive(Debug, Serialize)]
struct Simulation {
    v: u32,
    plan: serde_json::Value,
    policy: PolicyConfig,
    mean_cost: f64,
    chains: Vec<ChainResult>,
}

pub fn run(globals: &Globals, args: SimulateArgs) -> Result<()> {
    let seed = globals.seed();
    let mut rec = Recorder::new();
    let schedule = load_schedule(&args.data, &mut rec)?;
    let plan = load_plan(&args.plan, &mut rec)?;
    plan.validate(&schedule)?;
    let chains_path = args
        .chains
        .clone()
        .unwrap_or_else(|| args.data.join(TRUTH_CHAINS_FILE));
    let chains = load_chains(&chains_path, &mut rec)?;
    let policy = load_policy(args.policy.as_ref(), &mut rec)?;
    ensure_dir(&globals.out)?;

    let outcomes = chains
        .par_iter()
        .map(|c| {
            let s = derive_seed(seed, c.chain_id);
            simulate_day(&schedule, c, &plan, &policy, s).map(|o| (c.chain_id, s, o))
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;

    let mut results = Vec::with_capacity(outcomes.len());
    if args.trace {
        ensure_dir(&globals.out.join(TRACE_DIR))?;
    }
    for (chain_id, s, out) in &outcomes {
        check_conservation(*chain_id, out)?;
        if args.trace {
            let rel = PathBuf::from(TRACE_DIR).join(format!("chain_{chain_id}.jsonl"));
            write_text(&globals.out.join(&rel), &trace_to_jsonl(&out.trace))?;
            rec.output(rel);
        }
        results.push(ChainResult {
            chain_id: *chain_id,
            seed: *s,
            total_cost: out.cost.total(),
            deadhead_miles: out.cost.deadhead_miles,
            deadhead_minutes: out.cost.deadhead_minutes,
            left_behind: out.cost.left_behind(),
            left_behind_per_stop: out.cost.left_behind_per_stop.clone(),
            stats: out.stats.clone(),
        });
    }
    let mut totals: Vec<f64> = results.iter().map(|r| r.total_cost).collect();
    totals.sort_by(f64::total_cmp);
    let mean_cost = totals.iter().sum::<f64>() / totals.len() as f64;
    write_json(
        &globals.out.join(SIMULATION_FILE),
        &Simulation {
            v: 1,
            plan: serde_json::from_str(&plan.to_json()).context("re-reading the plan")?,
            policy,
            mean_cost,
            chains: results,
        },
    )?;
    rec.output(SIMULATION_FILE);
    rec.finish(globals, "simulate", seed, &args)?;
    Ok(())
}

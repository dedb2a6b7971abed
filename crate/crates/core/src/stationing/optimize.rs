use std::collections::BTreeMap;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::{
    greedy_select, simulated_annealing, AnnealingConfig, AnnealingStep, GreedyRound,
    ObjectiveEstimate, Provenance, Result, SimEvaluator, StationingError, StationingPlan,
};
use crate::network::Schedule;
use crate::rng::derive_seed;
use crate::sim::{sample_chains, Chain, CostWeights, PolicyConfig, RidershipParams};

pub const DEFAULT_K: usize = 5;
pub const DEFAULT_N_CHAINS: usize = 100;

/// Garage, Hub or Agency placement of `k` buses.
pub fn baseline_plan(kind: Provenance, schedule: &Schedule, k: usize) -> Result<StationingPlan> {
    let assignments = match kind {
        Provenance::Garage => vec![schedule.depot().to_string(); k],
        Provenance::Hub => vec![schedule.hub().to_string(); k],
        Provenance::Agency => {
            let list = schedule
                .network()
                .agency_plan
                .clone()
                .ok_or(StationingError::MissingAgencyPlan)?;
            if list.len() != k {
                return Err(StationingError::InfeasiblePlan(format!(
                    "agency plan has {} buses, expected {k}",
                    list.len()
                )));
            }
            list
        }
        Provenance::Greedy | Provenance::Search => {
            return Err(StationingError::InvalidConfig(format!(
                "{kind} is not a baseline"
            )))
        }
    };
    let plan = StationingPlan::new(assignments, kind);
    plan.validate(schedule)?;
    Ok(plan)
}

/// Samples `n_chains` chains for every day forecast and concatenates them.
/// Chain ids are renumbered so they stay unique across days.
pub fn sample_day_chains(
    schedule: &Schedule,
    day_probs: &[BTreeMap<String, f64>],
    ridership: &RidershipParams,
    n_chains: usize,
    seed: u64,
) -> Result<Vec<Chain>> {
    if day_probs.is_empty() {
        return Err(StationingError::InvalidConfig("no day forecasts".into()));
    }
    let mut chains = Vec::with_capacity(day_probs.len() * n_chains);
    for (d, probs) in day_probs.iter().enumerate() {
        let day = sample_chains(
            schedule,
            probs,
            ridership,
            n_chains,
            derive_seed(seed, d as u64),
        )?;
        for mut c in day {
            c.chain_id += (d * n_chains) as u64;
            chains.push(c);
        }
    }
    Ok(chains)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeConfig {
    pub k: usize,
    /// Chains per day forecast.
    pub n_chains: usize,
    pub chain_seed: u64,
    pub annealing: AnnealingConfig,
    pub policy: PolicyConfig,
    pub weights: CostWeights,
    /// Only evaluate the Garage, Hub and Agency plans.
    pub baselines_only: bool,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            n_chains: DEFAULT_N_CHAINS,
            chain_seed: 0,
            annealing: AnnealingConfig::default(),
            policy: PolicyConfig::default(),
            weights: CostWeights::default(),
            baselines_only: false,
        }
    }
}

/// One evaluated plan as it appears in `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub provenance: Provenance,
    pub assignments: Vec<String>,
    pub mean_cost: f64,
    pub std_error: f64,
    pub deadhead_miles: f64,
    pub deadhead_minutes: f64,
    pub left_behind: f64,
}

impl PlanReport {
    pub fn new(plan: &StationingPlan, est: &ObjectiveEstimate) -> Self {
        Self {
            provenance: plan.provenance,
            assignments: plan.assignments.clone(),
            mean_cost: est.mean_cost,
            std_error: est.std_error,
            deadhead_miles: est.mean_deadhead_miles,
            deadhead_minutes: est.mean_deadhead_minutes,
            left_behind: est.mean_left_behind,
        }
    }
}

/// Annealing log as parallel arrays.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HistoryArrays {
    pub iteration: Vec<usize>,
    pub temperature: Vec<f64>,
    pub proposed_cost: Vec<f64>,
    pub accepted: Vec<bool>,
    pub current_cost: Vec<f64>,
    pub best_cost: Vec<f64>,
}

impl From<&[AnnealingStep]> for HistoryArrays {
    fn from(steps: &[AnnealingStep]) -> Self {
        Self {
            iteration: steps.iter().map(|s| s.iteration).collect(),
            temperature: steps.iter().map(|s| s.temperature).collect(),
            proposed_cost: steps.iter().map(|s| s.proposed_cost).collect(),
            accepted: steps.iter().map(|s| s.accepted).collect(),
            current_cost: steps.iter().map(|s| s.current_cost).collect(),
            best_cost: steps.iter().map(|s| s.best_cost).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationingReport {
    pub v: u32,
    pub k: usize,
    pub n_days: usize,
    pub n_chains: usize,
    pub plans: Vec<PlanReport>,
    pub greedy_cost: Option<f64>,
    pub search_cost: Option<f64>,
    pub winner: Option<PlanReport>,
    pub greedy_rounds: Vec<GreedyRound>,
    pub history: HistoryArrays,
}

impl StationingReport {
    pub fn plan(&self, provenance: Provenance) -> Option<&PlanReport> {
        self.plans.iter().find(|p| p.provenance == provenance)
    }

    pub fn winning_plan(&self) -> Option<StationingPlan> {
        self.winner
            .as_ref()
            .map(|w| StationingPlan::new(w.assignments.clone(), w.provenance))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Samples chains once, evaluates the baselines, then runs greedy selection
/// followed by simulated annealing on the same chains.
pub fn optimize_stationing(
    schedule: &Schedule,
    day_probs: &[BTreeMap<String, f64>],
    ridership: &RidershipParams,
    cfg: &OptimizeConfig,
) -> Result<StationingReport> {
    cfg.annealing.validate()?;
    if cfg.n_chains == 0 {
        return Err(StationingError::NoChains);
    }
    let chains = sample_day_chains(schedule, day_probs, ridership, cfg.n_chains, cfg.chain_seed)?;
    info!(
        "sampled {} chains over {} day(s)",
        chains.len(),
        day_probs.len()
    );
    let mut evaluator = SimEvaluator::new(schedule, &chains, &cfg.policy, cfg.weights)?;

    let mut plans = Vec::new();
    for kind in [Provenance::Garage, Provenance::Hub, Provenance::Agency] {
        let plan = match baseline_plan(kind, schedule, cfg.k) {
            Ok(p) => p,
            Err(StationingError::MissingAgencyPlan) => {
                warn!("no agency plan configured; skipping the Agency baseline");
                continue;
            }
            Err(StationingError::InfeasiblePlan(reason)) if kind == Provenance::Agency => {
                warn!("skipping the Agency baseline: {reason}");
                continue;
            }
            Err(e) => return Err(e),
        };
        let est = evaluator.estimate(&plan)?;
        info!(
            "{kind}: mean cost {:.3} (se {:.3})",
            est.mean_cost, est.std_error
        );
        plans.push(PlanReport::new(&plan, &est));
    }

    let mut report = StationingReport {
        v: 1,
        k: cfg.k,
        n_days: day_probs.len(),
        n_chains: chains.len(),
        plans,
        greedy_cost: None,
        search_cost: None,
        winner: None,
        greedy_rounds: Vec::new(),
        history: HistoryArrays::default(),
    };
    if cfg.baselines_only {
        return Ok(report);
    }

    let candidates = schedule.candidate_stops().to_vec();
    let greedy = greedy_select(&candidates, cfg.k, &mut evaluator)?;
    let greedy_est = evaluator.estimate(&greedy.plan)?;
    info!(
        "greedy: {:?} at {:.3}",
        greedy.plan.assignments, greedy_est.mean_cost
    );

    // With no bus to move, or no free stop to move it to, there is no
    // neighbourhood to search.
    let searchable = cfg.k > 0 && cfg.k < candidates.len();
    let annealing = AnnealingConfig {
        n_iters: if searchable { cfg.annealing.n_iters } else { 0 },
        ..cfg.annealing.clone()
    };
    let search = simulated_annealing(&greedy.plan, &annealing, &mut evaluator, &candidates)?;
    let search_est = evaluator.estimate(&search.best)?;
    info!(
        "search: {:?} at {:.3}",
        search.best.assignments, search_est.mean_cost
    );

    let greedy_report = PlanReport::new(&greedy.plan, &greedy_est);
    let search_report = PlanReport::new(&search.best, &search_est);
    report.greedy_cost = Some(greedy_est.mean_cost);
    report.search_cost = Some(search_est.mean_cost);
    report.plans.push(greedy_report);
    report.plans.push(search_report.clone());
    report.winner = Some(search_report);
    report.greedy_rounds = greedy.rounds;
    report.history = HistoryArrays::from(search.history.as_slice());
    Ok(report)
}

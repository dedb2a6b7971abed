//! Where to park `k` substitute buses.
//!
//! Plans are priced by replaying sampled days ([`evaluate_plan`]); greedy
//! selection seeds a simulated-annealing search, and the operator baselines
//! (everything at the garage, everything at the hub, the current agency
//! placement) are evaluated on the same chains for comparison.

use thiserror::Error;

mod anneal;
mod evaluate;
mod greedy;
mod optimize;
mod plan;

pub use anneal::{
    accept, neighbor, simulated_annealing, AnnealingConfig, AnnealingResult, AnnealingStep,
    Cooling, DEFAULT_GAMMA, DEFAULT_INITIAL_TEMP, DEFAULT_N_ITERS,
};
pub use evaluate::{evaluate_plan, Evaluator, ObjectiveEstimate, SimEvaluator};
pub use greedy::{greedy_select, GreedyResult, GreedyRound};
pub use optimize::{
    baseline_plan, optimize_stationing, sample_day_chains, HistoryArrays, OptimizeConfig,
    PlanReport, StationingReport, DEFAULT_K, DEFAULT_N_CHAINS,
};
pub use plan::{Provenance, StationingPlan};

#[derive(Debug, Error)]
pub enum StationingError {
    #[error("infeasible plan: {0}")]
    InfeasiblePlan(String),
    #[error("need {k} candidates but only {available} are available")]
    NotEnoughCandidates { k: usize, available: usize },
    #[error("every candidate is already in the plan")]
    NoSpareCandidates,
    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),
    #[error("network.json has no agency_plan")]
    MissingAgencyPlan,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no chains to evaluate")]
    NoChains,
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Sim(Box<crate::sim::SimError>),
}

impl From<crate::sim::SimError> for StationingError {
    fn from(e: crate::sim::SimError) -> Self {
        match e {
            crate::sim::SimError::InfeasiblePlan(reason) => StationingError::InfeasiblePlan(reason),
            other => StationingError::Sim(Box::new(other)),
        }
    }
}

pub type Result<T, E = StationingError> = std::result::Result<T, E>;

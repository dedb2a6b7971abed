use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Result, StationingError, StationingPlan};
use crate::network::Schedule;
use crate::rng::derive_seed;
use crate::sim::{Chain, CostBreakdown, CostWeights, PolicyConfig, PreparedDay};

/// Salt mixed with a chain id to get that chain's simulation seed.
const SIM_SEED_SALT: u64 = 0x5354_4154_494f_4e53;

/// Monte-Carlo estimate of a plan's expected daily cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveEstimate {
    pub mean_cost: f64,
    pub std_error: f64,
    pub n_chains: usize,
    pub mean_deadhead_miles: f64,
    pub mean_deadhead_minutes: f64,
    pub mean_left_behind: f64,
    pub per_chain: Vec<CostBreakdown>,
}

/// Mean and standard error, summed in sorted order so that the result does
/// not depend on the order of the inputs.
fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    if sorted.len() < 2 {
        return (mean, 0.0);
    }
    let mut sq: Vec<f64> = sorted.iter().map(|v| (v - mean).powi(2)).collect();
    sq.sort_by(f64::total_cmp);
    let var = sq.iter().sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

impl ObjectiveEstimate {
    pub fn from_costs(per_chain: Vec<CostBreakdown>, weights: &CostWeights) -> Result<Self> {
        if per_chain.is_empty() {
            return Err(StationingError::NoChains);
        }
        let totals: Vec<f64> = per_chain
            .iter()
            .map(|c| c.weighted_total(weights))
            .collect();
        let (mean_cost, std_error) = mean_and_se(&totals);
        let component = |f: fn(&CostBreakdown) -> f64| {
            mean_and_se(&per_chain.iter().map(f).collect::<Vec<_>>()).0
        };
        Ok(Self {
            mean_cost,
            std_error,
            n_chains: per_chain.len(),
            mean_deadhead_miles: component(|c| c.deadhead_miles),
            mean_deadhead_minutes: component(|c| c.deadhead_minutes),
            mean_left_behind: component(|c| c.left_behind() as f64),
            per_chain,
        })
    }
}

/// Prices a plan. Implemented by the simulator-backed [`SimEvaluator`] and,
/// in tests, by plain closures over cost tables.
pub trait Evaluator {
    fn cost(&mut self, plan: &StationingPlan) -> Result<f64>;
}

impl<F> Evaluator for F
where
    F: FnMut(&StationingPlan) -> Result<f64>,
{
    fn cost(&mut self, plan: &StationingPlan) -> Result<f64> {
        self(plan)
    }
}

/// Evaluates plans against one fixed set of chains (common random numbers).
/// Results are cached by assignment list.
pub struct SimEvaluator<'a> {
    days: Vec<PreparedDay<'a>>,
    weights: CostWeights,
    cache: HashMap<Vec<String>, ObjectiveEstimate>,
    simulations: usize,
}

impl<'a> SimEvaluator<'a> {
    pub fn new(
        schedule: &'a Schedule,
        chains: &[Chain],
        policy: &PolicyConfig,
        weights: CostWeights,
    ) -> Result<Self> {
        if chains.is_empty() {
            return Err(StationingError::NoChains);
        }
        let days = chains
            .par_iter()
            .map(|c| PreparedDay::new(schedule, c, policy, derive_seed(SIM_SEED_SALT, c.chain_id)))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self {
            days,
            weights,
            cache: HashMap::new(),
            simulations: 0,
        })
    }

    pub fn n_chains(&self) -> usize {
        self.days.len()
    }

    /// Number of simulated days run so far (cache hits excluded).
    pub fn simulations(&self) -> usize {
        self.simulations
    }

    pub fn estimate(&mut self, plan: &StationingPlan) -> Result<ObjectiveEstimate> {
        if let Some(hit) = self.cache.get(&plan.assignments) {
            return Ok(hit.clone());
        }
        let costs = self
            .days
            .par_iter()
            .map(|d| d.run(plan, false).map(|o| o.cost))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        self.simulations += costs.len();
        let est = ObjectiveEstimate::from_costs(costs, &self.weights)?;
        self.cache.insert(plan.assignments.clone(), est.clone());
        Ok(est)
    }
}

impl Evaluator for SimEvaluator<'_> {
    fn cost(&mut self, plan: &StationingPlan) -> Result<f64> {
        Ok(self.estimate(plan)?.mean_cost)
    }
}

/// Unit-weight objective estimate of `plan` over `chains`.
pub fn evaluate_plan(
    plan: &StationingPlan,
    schedule: &Schedule,
    chains: &[Chain],
    policy: &PolicyConfig,
) -> Result<ObjectiveEstimate> {
    plan.validate(schedule)?;
    SimEvaluator::new(schedule, chains, policy, CostWeights::default())?.estimate(plan)
}

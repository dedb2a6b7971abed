use log::debug;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Evaluator, Result, StationingError, StationingPlan};
use crate::rng::{seeded, SimRng};

pub const DEFAULT_N_ITERS: usize = 500;
pub const DEFAULT_INITIAL_TEMP: f64 = 100.0;
pub const DEFAULT_GAMMA: f64 = 1.0;

/// Temperature schedule after iteration `n` (counting from 0).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cooling {
    /// `K <- K / (gamma + n)`
    #[default]
    Recursive,
    /// `K <- K_max / (gamma + n)`
    Direct,
}

impl std::str::FromStr for Cooling {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "recursive" => Ok(Cooling::Recursive),
            "direct" => Ok(Cooling::Direct),
            _ => Err(format!("unknown cooling schedule {s:?} (recursive|direct)")),
        }
    }
}

impl Cooling {
    pub fn next(self, current: f64, initial: f64, gamma: f64, n: usize) -> f64 {
        match self {
            Cooling::Recursive => current / (gamma + n as f64),
            Cooling::Direct => initial / (gamma + n as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnealingConfig {
    pub n_iters: usize,
    pub initial_temp: f64,
    pub gamma: f64,
    pub cooling: Cooling,
    pub seed: u64,
}

impl Default for AnnealingConfig {
    fn default() -> Self {
        Self {
            n_iters: DEFAULT_N_ITERS,
            initial_temp: DEFAULT_INITIAL_TEMP,
            gamma: DEFAULT_GAMMA,
            cooling: Cooling::Recursive,
            seed: 0,
        }
    }
}

impl AnnealingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_temp > 0.0 && self.initial_temp.is_finite()) {
            return Err(StationingError::InvalidConfig(
                "initial temperature must be positive".into(),
            ));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(StationingError::InvalidConfig(
                "gamma must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Moves one uniformly chosen bus to a uniformly chosen unused candidate.
pub fn neighbor<R: Rng + ?Sized>(
    plan: &StationingPlan,
    candidates: &[String],
    rng: &mut R,
) -> Result<StationingPlan> {
    let spare: Vec<&String> = candidates
        .iter()
        .filter(|c| !plan.assignments.contains(c))
        .collect();
    if spare.is_empty() || plan.assignments.is_empty() {
        return Err(StationingError::NoSpareCandidates);
    }
    let i = rng.random_range(0..plan.k());
    let j = rng.random_range(0..spare.len());
    let mut next = plan.clone();
    next.assignments[i] = spare[j].clone();
    Ok(next)
}

/// Metropolis rule.
pub fn accept<R: Rng + ?Sized>(delta: f64, temp: f64, rng: &mut R) -> Result<bool> {
    if !(temp > 0.0) {
        return Err(StationingError::NonPositiveTemperature(temp));
    }
    if delta <= 0.0 {
        return Ok(true);
    }
    Ok(rng.random::<f64>() < (-delta / temp).exp())
}

/// One row of the annealing log. Row 0 describes the initial plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealingStep {
    pub iteration: usize,
    /// Temperature used to judge this row's proposal.
    pub temperature: f64,
    pub proposed: Vec<String>,
    pub proposed_cost: f64,
    pub accepted: bool,
    pub current_cost: f64,
    pub best_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealingResult {
    pub best: StationingPlan,
    pub best_cost: f64,
    /// `n_iters + 1` rows.
    pub history: Vec<AnnealingStep>,
}

impl AnnealingResult {
    pub fn cost_history(&self) -> Vec<f64> {
        self.history.iter().map(|s| s.current_cost).collect()
    }
}

/// Simulated annealing from `initial`, tracking the best plan ever visited.
///
/// The recursive schedule drives the temperature to exactly zero after a
/// few hundred iterations; from then on only non-worsening moves are
/// accepted.
pub fn simulated_annealing<E: Evaluator + ?Sized>(
    initial: &StationingPlan,
    cfg: &AnnealingConfig,
    evaluator: &mut E,
    candidates: &[String],
) -> Result<AnnealingResult> {
    cfg.validate()?;
    let mut rng: SimRng = seeded(cfg.seed);
    let mut current = initial.clone();
    let mut current_cost = evaluator.cost(&current)?;
    let mut best = current.clone();
    let mut best_cost = current_cost;
    let mut temp = cfg.initial_temp;
    let mut history = Vec::with_capacity(cfg.n_iters + 1);
    history.push(AnnealingStep {
        iteration: 0,
        temperature: temp,
        proposed: current.assignments.clone(),
        proposed_cost: current_cost,
        accepted: true,
        current_cost,
        best_cost,
    });
    for n in 0..cfg.n_iters {
        let proposal = neighbor(&current, candidates, &mut rng)?;
        let cost = evaluator.cost(&proposal)?;
        let delta = cost - current_cost;
        let accepted = if temp > 0.0 {
            accept(delta, temp, &mut rng)?
        } else {
            delta <= 0.0
        };
        let row_temp = temp;
        if accepted {
            current = proposal.clone();
            current_cost = cost;
            if cost < best_cost {
                best = current.clone();
                best_cost = cost;
            }
        }
        temp = cfg.cooling.next(temp, cfg.initial_temp, cfg.gamma, n);
        history.push(AnnealingStep {
            iteration: n + 1,
            temperature: row_temp,
            proposed: proposal.assignments,
            proposed_cost: cost,
            accepted,
            current_cost,
            best_cost,
        });
    }
    debug!(
        "annealing finished at cost {best_cost} ({} iterations)",
        cfg.n_iters
    );
    best.provenance = super::Provenance::Search;
    Ok(AnnealingResult {
        best,
        best_cost,
        history,
    })
}

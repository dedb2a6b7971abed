use log::debug;
use serde::{Deserialize, Serialize};

use super::{Evaluator, Provenance, Result, StationingError, StationingPlan};

/// Costs seen in one greedy round and the stop it settled on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyRound {
    pub round: usize,
    pub candidate_costs: Vec<(String, f64)>,
    pub chosen: String,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyResult {
    pub plan: StationingPlan,
    pub rounds: Vec<GreedyRound>,
}

impl GreedyResult {
    /// Cost of the final plan (`None` when k = 0).
    pub fn cost(&self) -> Option<f64> {
        self.rounds.last().map(|r| r.cost)
    }
}

/// Adds one bus at a time, each time at the candidate that makes the partial
/// plan cheapest. Candidates are scanned in lexicographic order and only a
/// strictly lower cost displaces the incumbent, so ties go to the smaller
/// stop id.
pub fn greedy_select<E: Evaluator + ?Sized>(
    candidates: &[String],
    k: usize,
    evaluator: &mut E,
) -> Result<GreedyResult> {
    let mut pool = candidates.to_vec();
    pool.sort();
    pool.dedup();
    if k > pool.len() {
        return Err(StationingError::NotEnoughCandidates {
            k,
            available: pool.len(),
        });
    }
    let mut chosen: Vec<String> = Vec::with_capacity(k);
    let mut rounds = Vec::with_capacity(k);
    for round in 0..k {
        let mut candidate_costs = Vec::new();
        let mut best: Option<(usize, f64)> = None;
        for (i, stop) in pool.iter().enumerate() {
            if chosen.contains(stop) {
                continue;
            }
            let mut trial = chosen.clone();
            trial.push(stop.clone());
            let cost = evaluator.cost(&StationingPlan::new(trial, Provenance::Greedy))?;
            candidate_costs.push((stop.clone(), cost));
            if best.is_none_or(|(_, c)| cost < c) {
                best = Some((i, cost));
            }
        }
        let (i, cost) = best.expect("k <= candidates leaves a spare stop");
        debug!("greedy round {round}: {} at cost {cost}", pool[i]);
        chosen.push(pool[i].clone());
        rounds.push(GreedyRound {
            round,
            candidate_costs,
            chosen: pool[i].clone(),
            cost,
        });
    }
    Ok(GreedyResult {
        plan: StationingPlan::new(chosen, Provenance::Greedy),
        rounds,
    })
}

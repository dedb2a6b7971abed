//! Discrete-event replay of one service day.
//!
//! Regular buses run their scheduled trips while passenger groups arrive,
//! wait, board and alight. Stranded riders and breakdowns trigger the
//! substitute-bus dispatch policy; the run is priced as a [`CostBreakdown`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

mod chain;
mod engine;
mod event;
mod fleet;
mod sampler;

pub use chain::Chain;
pub use engine::{simulate_day, simulate_day_untraced, BusFlow, PreparedDay, SimOutcome, SimStats};
pub use event::{trace_to_jsonl, validate_trace, EventKind, TraceRecord};
pub use fleet::{
    cover_disruption, cover_overage, dispatch_decision, BusState, DispatchRequest, ServicePlan,
    SubstituteBus, Visit,
};
pub use sampler::{sample_chains, RidershipParams, StopDemand};

use crate::network::NetworkError;
use crate::stationing::StationingError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("infeasible plan: {0}")]
    InfeasiblePlan(String),
    #[error("chain inconsistent with schedule: {0}")]
    InconsistentChain(String),
    #[error("invalid probability {probability} for trip {trip_id}")]
    InvalidProbability { trip_id: String, probability: f64 },
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

impl From<StationingError> for SimError {
    fn from(e: StationingError) -> Self {
        match e {
            StationingError::InfeasiblePlan(reason) => SimError::InfeasiblePlan(reason),
            other => SimError::InfeasiblePlan(other.to_string()),
        }
    }
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;

pub const DEFAULT_OVERAGE_DISPATCH_FRACTION: f64 = 0.05;
pub const DEFAULT_PATIENCE_S: f64 = 1800.0;
pub const DEFAULT_ARRIVAL_WINDOW_S: f64 = 600.0;
/// 6:00 to 13:00.
pub const DEFAULT_HORIZON: [u32; 2] = [21_600, 46_800];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub overage_dispatch_fraction: f64,
    pub patience_s: f64,
    pub arrival_window_s: f64,
    /// Only trips starting inside `[horizon[0], horizon[1]]` are simulated.
    pub horizon: [u32; 2],
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            overage_dispatch_fraction: DEFAULT_OVERAGE_DISPATCH_FRACTION,
            patience_s: DEFAULT_PATIENCE_S,
            arrival_window_s: DEFAULT_ARRIVAL_WINDOW_S,
            horizon: DEFAULT_HORIZON,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SimError::InvalidPolicy(m.to_string()));
        if !(self.overage_dispatch_fraction >= 0.0 && self.overage_dispatch_fraction.is_finite()) {
            return bad("overage_dispatch_fraction must be a nonnegative number");
        }
        if !(self.patience_s >= 0.0 && self.patience_s.is_finite()) {
            return bad("patience_s must be a nonnegative number");
        }
        if !(self.arrival_window_s >= 0.0 && self.arrival_window_s.is_finite()) {
            return bad("arrival_window_s must be a nonnegative number");
        }
        if self.horizon[0] > self.horizon[1] {
            return bad("horizon start is after its end");
        }
        Ok(())
    }

    pub fn includes_trip(&self, start_s: u32) -> bool {
        (self.horizon[0]..=self.horizon[1]).contains(&start_s)
    }
}

/// Relative weights of the three cost components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostWeights {
    pub miles: f64,
    pub minutes: f64,
    pub left_behind: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            miles: 1.0,
            minutes: 1.0,
            left_behind: 1.0,
        }
    }
}

/// Deadhead and service-failure totals of one simulated day.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub deadhead_miles: f64,
    pub deadhead_minutes: f64,
    /// Only stops with at least one stranded rider are listed.
    pub left_behind_per_stop: BTreeMap<String, u64>,
}

impl CostBreakdown {
    pub fn left_behind(&self) -> u64 {
        self.left_behind_per_stop.values().sum()
    }

    /// Unit-weight total.
    pub fn total(&self) -> f64 {
        self.weighted_total(&CostWeights::default())
    }

    pub fn weighted_total(&self, w: &CostWeights) -> f64 {
        w.miles * self.deadhead_miles
            + w.minutes * self.deadhead_minutes
            + w.left_behind * self.left_behind() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn total_dominates_components() {
        let mut c = CostBreakdown {
            deadhead_miles: 2.5,
            deadhead_minutes: 7.5,
            ..Default::default()
        };
        c.left_behind_per_stop.insert("A".into(), 3);
        c.left_behind_per_stop.insert("B".into(), 4);
        assert_eq!(c.left_behind(), 7);
        assert_eq!(c.total(), 17.0);
        assert!(c.total() >= c.deadhead_miles && c.total() >= c.deadhead_minutes);
        let w = CostWeights {
            miles: 0.0,
            minutes: 2.0,
            left_behind: 0.5,
        };
        assert_eq!(c.weighted_total(&w), 18.5);
    }

    #[test]
    fn policy_round_trip_and_defaults() {
        let p: PolicyConfig = serde_json::from_str(r#"{"patience_s": 900}"#).unwrap();
        assert_eq!(p.patience_s, 900.0);
        assert_eq!(p.horizon, DEFAULT_HORIZON);
        assert_eq!(p.overage_dispatch_fraction, 0.05);
        assert!(serde_json::from_str::<PolicyConfig>(r#"{"patience": 1}"#).is_err());
        let bad = PolicyConfig {
            horizon: [10, 5],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(p.includes_trip(21_600) && p.includes_trip(46_800) && !p.includes_trip(46_801));
    }
}

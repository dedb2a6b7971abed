//! Forecasting bus-trip disruptions and stationing substitute buses.
//!
//! The crate is organised as a pipeline:
//!
//! * [`network`] loads the static transit network.
//! * [`forecast`] estimates per-trip disruption probabilities
//!   (logistic regression with isotonic calibration).
//! * [`sim`] replays a service day as a discrete-event system and prices a
//!   stationing plan in deadhead miles, deadhead minutes and stranded riders.
//! * [`stationing`] searches for the best placement of `k` substitute buses
//!   (greedy seeding followed by simulated annealing) and builds the
//!   operator baselines.
//! * [`scenario`] generates synthetic networks and histories so the whole
//!   pipeline can run without agency data.

// `!(x > 0.0)` is how NaN gets rejected along with the other bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod forecast;
pub mod network;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod stationing;

pub use network::{Direction, Leg, NetworkConfig, RouteDirection, Schedule, Stop, StopTime, Trip};

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Chain, Result, SimError};
use crate::network::Schedule;
use crate::rng::{derive_seed, substream, SimRng};

const DISRUPTION_STREAM: u64 = 0;
const RIDERSHIP_STREAM: u64 = 1;

/// Mean riders boarding and alighting at one stop of one trip.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StopDemand {
    pub board: f64,
    pub alight: f64,
}

/// Poisson means per (trip, stop). Pairs that are absent have no demand.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RidershipParams {
    pub means: BTreeMap<(String, String), StopDemand>,
}

#[derive(Serialize, Deserialize)]
struct ParamsDocument {
    /// `[trip_id, stop_id, mean_board, mean_alight]`
    entries: Vec<(String, String, f64, f64)>,
}

impl RidershipParams {
    pub fn get(&self, trip_id: &str, stop_id: &str) -> StopDemand {
        self.means
            .get(&(trip_id.to_string(), stop_id.to_string()))
            .copied()
            .unwrap_or_default()
    }

    pub fn validate(&self, schedule: &Schedule) -> Result<()> {
        for ((trip_id, stop_id), d) in &self.means {
            let trip = schedule
                .trip(trip_id)
                .ok_or_else(|| SimError::InvalidArgument(format!("unknown trip {trip_id}")))?;
            if trip.position_of(stop_id).is_none() {
                return Err(SimError::InvalidArgument(format!(
                    "trip {trip_id} does not visit {stop_id}"
                )));
            }
            if !(d.board >= 0.0 && d.board.is_finite() && d.alight >= 0.0 && d.alight.is_finite()) {
                return Err(SimError::InvalidArgument(format!(
                    "negative or non-finite mean at ({trip_id}, {stop_id})"
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let doc = ParamsDocument {
            entries: self
                .means
                .iter()
                .map(|((t, s), d)| (t.clone(), s.clone(), d.board, d.alight))
                .collect(),
        };
        serde_json::to_string(&doc).expect("params serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ParamsDocument =
            serde_json::from_str(text).map_err(|e| SimError::Malformed(e.to_string()))?;
        let mut means = BTreeMap::new();
        for (t, s, board, alight) in doc.entries {
            if means
                .insert((t.clone(), s.clone()), StopDemand { board, alight })
                .is_some()
            {
                return Err(SimError::Malformed(format!(
                    "duplicate entry for ({t}, {s})"
                )));
            }
        }
        Ok(Self { means })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json() + "\n")
            .map_err(|e| SimError::Io(format!("{}: {e}", path.display())))
    }
}

fn poisson(rng: &mut SimRng, mean: f64) -> u32 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean)
        .expect("finite positive mean")
        .sample(rng) as u32
}

/// Draws `n_chains` independent days. Chain `i` depends only on
/// `(seed, i)`, so chains can be sampled in any order or in parallel.
///
/// Each trip fails with its forecast probability, at a stop chosen
/// uniformly. Riders are Poisson; alighting is capped by the load and
/// everyone leaves at the last stop.
pub fn sample_chains(
    schedule: &Schedule,
    disruption_probs: &BTreeMap<String, f64>,
    ridership: &RidershipParams,
    n_chains: usize,
    seed: u64,
) -> Result<Vec<Chain>> {
    if n_chains == 0 {
        return Err(SimError::InvalidArgument(
            "n_chains must be at least 1".into(),
        ));
    }
    for (trip_id, &p) in disruption_probs {
        if !(0.0..=1.0).contains(&p) {
            return Err(SimError::InvalidProbability {
                trip_id: trip_id.clone(),
                probability: p,
            });
        }
        if schedule.trip(trip_id).is_none() {
            return Err(SimError::InvalidArgument(format!("unknown trip {trip_id}")));
        }
    }
    ridership.validate(schedule)?;

    // Stop-level demand resolved once, in trip order.
    let demand: Vec<Vec<StopDemand>> = schedule
        .trips()
        .iter()
        .map(|t| {
            t.stop_times
                .iter()
                .map(|st| ridership.get(&t.trip_id, &st.stop_id))
                .collect()
        })
        .collect();
    let probs: Vec<f64> = schedule
        .trips()
        .iter()
        .map(|t| disruption_probs.get(&t.trip_id).copied().unwrap_or(0.0))
        .collect();

    Ok((0..n_chains)
        .into_par_iter()
        .map(|i| {
            let chain_seed = derive_seed(seed, i as u64);
            let mut fail_rng = substream(chain_seed, DISRUPTION_STREAM);
            let mut ride_rng = substream(chain_seed, RIDERSHIP_STREAM);
            let mut chain = Chain::new(i as u64);
            for (ti, trip) in schedule.trips().iter().enumerate() {
                let u: f64 = fail_rng.random();
                if u < probs[ti] {
                    let seq = fail_rng.random_range(0..trip.stop_times.len());
                    chain.disruptions.insert(trip.trip_id.clone(), seq);
                }
                if demand[ti].iter().all(|d| d.board <= 0.0 && d.alight <= 0.0) {
                    continue;
                }
                let last = trip.stop_times.len() - 1;
                let mut load = 0u32;
                for (seq, st) in trip.stop_times.iter().enumerate() {
                    let d = demand[ti][seq];
                    let wanted = poisson(&mut ride_rng, d.alight);
                    let alight = if seq == last { load } else { wanted.min(load) };
                    load -= alight;
                    let board = if seq == last {
                        0
                    } else {
                        poisson(&mut ride_rng, d.board)
                    };
                    load += board;
                    let key = || (trip.trip_id.clone(), st.stop_id.clone());
                    if alight > 0 {
                        chain.alighting.insert(key(), alight);
                    }
                    if board > 0 {
                        chain.boarding.insert(key(), board);
                    }
                }
            }
            chain
        })
        .collect())
}

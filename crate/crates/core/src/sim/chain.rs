use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Result, SimError};
use crate::network::Schedule;

/// One sampled realisation of a day: passenger counts per (trip, stop) and
/// the trips that break down.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Chain {
    pub chain_id: u64,
    pub boarding: BTreeMap<(String, String), u32>,
    pub alighting: BTreeMap<(String, String), u32>,
    /// Trip id to the stop sequence at which its bus fails.
    pub disruptions: BTreeMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct ChainDocument {
    chain_id: u64,
    boarding: Vec<(String, String, u32)>,
    alighting: Vec<(String, String, u32)>,
    disruptions: Vec<(String, usize)>,
}

/// Per-stop `(board, alight)` counts of one trip, in stop order.
pub(crate) type TripFlows = Vec<(u32, u32)>;

impl Chain {
    pub fn new(chain_id: u64) -> Self {
        Self {
            chain_id,
            ..Default::default()
        }
    }

    pub fn disruption_count(&self) -> usize {
        self.disruptions.len()
    }

    pub fn total_boarding(&self) -> u64 {
        self.boarding.values().map(|&c| c as u64).sum()
    }

    /// Resolves the chain against the schedule and checks flow conservation.
    /// Riders alight before others board, so a stop can never send off more
    /// riders than were on the bus when it arrived.
    pub(crate) fn flows(&self, schedule: &Schedule) -> Result<BTreeMap<usize, TripFlows>> {
        let inconsistent = |m: String| Err(SimError::InconsistentChain(m));
        let mut flows: BTreeMap<usize, TripFlows> = BTreeMap::new();
        for (counts, boarding) in [(&self.boarding, true), (&self.alighting, false)] {
            for ((trip_id, stop_id), &count) in counts {
                let Some(ti) = schedule.trip_idx(trip_id) else {
                    return inconsistent(format!("unknown trip {trip_id}"));
                };
                let trip = &schedule.trips()[ti];
                let Some(pos) = trip.position_of(stop_id) else {
                    return inconsistent(format!("trip {trip_id} does not visit {stop_id}"));
                };
                let row = flows
                    .entry(ti)
                    .or_insert_with(|| vec![(0, 0); trip.stop_times.len()]);
                if boarding {
                    row[pos].0 = count;
                } else {
                    row[pos].1 = count;
                }
            }
        }
        for (&ti, row) in &flows {
            let trip = &schedule.trips()[ti];
            let mut load: i64 = 0;
            for (seq, &(b, a)) in row.iter().enumerate() {
                load -= a as i64;
                if load < 0 {
                    return inconsistent(format!(
                        "trip {} unloads more riders than it carries at stop {seq}",
                        trip.trip_id
                    ));
                }
                load += b as i64;
            }
            if load != 0 {
                return inconsistent(format!(
                    "trip {} ends with {load} riders on board",
                    trip.trip_id
                ));
            }
        }
        for (trip_id, &seq) in &self.disruptions {
            let Some(trip) = schedule.trip(trip_id) else {
                return inconsistent(format!("disruption on unknown trip {trip_id}"));
            };
            if seq >= trip.stop_times.len() {
                return inconsistent(format!(
                    "disruption of {trip_id} at stop {seq} but the trip has {} stops",
                    trip.stop_times.len()
                ));
            }
        }
        Ok(flows)
    }

    pub fn validate(&self, schedule: &Schedule) -> Result<()> {
        self.flows(schedule).map(|_| ())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.document()).expect("chain serializes")
    }

    fn document(&self) -> ChainDocument {
        let triples = |m: &BTreeMap<(String, String), u32>| {
            m.iter()
                .map(|((t, s), &c)| (t.clone(), s.clone(), c))
                .collect()
        };
        ChainDocument {
            chain_id: self.chain_id,
            boarding: triples(&self.boarding),
            alighting: triples(&self.alighting),
            disruptions: self
                .disruptions
                .iter()
                .map(|(t, &s)| (t.clone(), s))
                .collect(),
        }
    }

    fn from_document(doc: ChainDocument) -> Result<Self> {
        let mut chain = Chain::new(doc.chain_id);
        for (target, rows, what) in [
            (&mut chain.boarding, doc.boarding, "boarding"),
            (&mut chain.alighting, doc.alighting, "alighting"),
        ] {
            for (t, s, c) in rows {
                let key = (t, s);
                if target.contains_key(&key) {
                    return Err(SimError::Malformed(format!(
                        "duplicate {what} entry for ({}, {})",
                        key.0, key.1
                    )));
                }
                target.insert(key, c);
            }
        }
        for (t, s) in doc.disruptions {
            if chain.disruptions.insert(t.clone(), s).is_some() {
                return Err(SimError::InconsistentChain(format!(
                    "trip {t} has more than one disruption"
                )));
            }
        }
        Ok(chain)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ChainDocument =
            serde_json::from_str(text).map_err(|e| SimError::Malformed(e.to_string()))?;
        Self::from_document(doc)
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

    /// Reads a JSON array of chain documents.
    pub fn load_many(path: &Path) -> Result<Vec<Self>> {
        let text = fs::read_to_string(path)
            .map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
        let docs: Vec<ChainDocument> =
            serde_json::from_str(&text).map_err(|e| SimError::Malformed(e.to_string()))?;
        docs.into_iter().map(Self::from_document).collect()
    }

    pub fn save_many(chains: &[Chain], path: &Path) -> Result<()> {
        let docs: Vec<ChainDocument> = chains.iter().map(Chain::document).collect();
        let text = serde_json::to_string(&docs).expect("chains serialize");
        fs::write(path, text + "\n").map_err(|e| SimError::Io(format!("{}: {e}", path.display())))
    }
}

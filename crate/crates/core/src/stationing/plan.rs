use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Result, StationingError};
use crate::network::Schedule;

/// Where a plan came from. Garage and Hub plans co-locate every bus and are
/// exempt from the distinct-candidate rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Provenance {
    Garage,
    Hub,
    Agency,
    Greedy,
    Search,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Garage => "Garage",
            Provenance::Hub => "Hub",
            Provenance::Agency => "Agency",
            Provenance::Greedy => "Greedy",
            Provenance::Search => "Search",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "garage" => Ok(Provenance::Garage),
            "hub" => Ok(Provenance::Hub),
            "agency" => Ok(Provenance::Agency),
            "greedy" => Ok(Provenance::Greedy),
            "search" => Ok(Provenance::Search),
            _ => Err(format!("unknown provenance {s:?}")),
        }
    }
}

/// One stop per substitute bus.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StationingPlan {
    pub assignments: Vec<String>,
    pub provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct PlanDocument {
    k: usize,
    assignments: Vec<String>,
    provenance: Provenance,
}

impl StationingPlan {
    pub fn new(assignments: Vec<String>, provenance: Provenance) -> Self {
        Self {
            assignments,
            provenance,
        }
    }

    pub fn k(&self) -> usize {
        self.assignments.len()
    }

    /// Checks the plan against the schedule: every stop resolves, baseline
    /// plans sit where their provenance says, and optimised plans use
    /// distinct stationing candidates.
    pub fn validate(&self, schedule: &Schedule) -> Result<()> {
        let infeasible = |reason: String| Err(StationingError::InfeasiblePlan(reason));
        for stop in &self.assignments {
            if schedule.stop(stop).is_none() {
                return infeasible(format!("unknown stop {stop}"));
            }
        }
        match self.provenance {
            Provenance::Garage => {
                if let Some(s) = self.assignments.iter().find(|s| *s != schedule.depot()) {
                    return infeasible(format!("garage plan stations a bus at {s}"));
                }
            }
            Provenance::Hub => {
                if let Some(s) = self.assignments.iter().find(|s| *s != schedule.hub()) {
                    return infeasible(format!("hub plan stations a bus at {s}"));
                }
            }
            Provenance::Agency | Provenance::Greedy | Provenance::Search => {
                let mut seen = HashSet::new();
                for s in &self.assignments {
                    if !seen.insert(s) {
                        return infeasible(format!("two buses stationed at {s}"));
                    }
                }
                if self.provenance != Provenance::Agency {
                    if let Some(s) = self
                        .assignments
                        .iter()
                        .find(|s| !schedule.candidate_stops().contains(s))
                    {
                        return infeasible(format!("{s} is not a stationing candidate"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Same as [`StationingPlan::validate`], plus the fleet size.
    pub fn validate_k(&self, schedule: &Schedule, k: usize) -> Result<()> {
        if self.k() != k {
            return Err(StationingError::InfeasiblePlan(format!(
                "plan has {} buses, expected {k}",
                self.k()
            )));
        }
        self.validate(schedule)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&PlanDocument {
            k: self.k(),
            assignments: self.assignments.clone(),
            provenance: self.provenance,
        })
        .expect("plan serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: PlanDocument =
            serde_json::from_str(text).map_err(|e| StationingError::Malformed(e.to_string()))?;
        if doc.k != doc.assignments.len() {
            return Err(StationingError::Malformed(format!(
                "k = {} but {} assignments",
                doc.k,
                doc.assignments.len()
            )));
        }
        Ok(Self::new(doc.assignments, doc.provenance))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| StationingError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json() + "\n")
            .map_err(|e| StationingError::Io(format!("{}: {e}", path.display())))
    }
}

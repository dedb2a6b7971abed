//! Synthetic corpora: a spoke-hub network, a labeled disruption history
//! drawn from a known logistic model, ridership means and ground-truth
//! chains for the forecast day. Everything is a pure function of the
//! [`GeneratorConfig`], seed included.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forecast::{sigmoid, Categorical, ForecastError, Numerical, TripFeatures};
use crate::network::NetworkError;
use crate::sim::SimError;
use crate::stationing::StationingError;

mod corpus;
mod history;
mod network;
mod ridership;

pub use corpus::{
    context_file, write_corpus, Corpus, CorpusFiles, CONTEXT_DIR, GROUND_TRUTH_FILE,
    LABELED_TRIPS_FILE, RIDERSHIP_FILE, TRUTH_CHAINS_FILE,
};
pub use history::{
    generate_day_contexts, generate_labeled_history, truth_probabilities, DayWeather,
};
pub use network::generate_network;
pub use ridership::generate_ridership_params;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid generator config: {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Forecast(#[from] ForecastError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Stationing(#[from] StationingError),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = ScenarioError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RidershipConfig {
    /// Mean boardings per stop outside the peaks.
    pub base_boarding: f64,
    /// Demand multiplier in the morning and afternoon windows.
    pub peak_multiplier: f64,
    /// Number of (trip, first stop) pairs with over-capacity demand.
    pub hotspots: usize,
    pub hotspot_boarding: f64,
}

impl Default for RidershipConfig {
    fn default() -> Self {
        Self {
            base_boarding: 1.0,
            peak_multiplier: 2.0,
            hotspots: 3,
            hotspot_boarding: 48.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub n_routes: usize,
    /// Stops per route, not counting the hub.
    pub stops_per_route: usize,
    /// Trips per route and direction.
    pub trips_per_route_per_day: usize,
    /// Sampled contexts (weather and loads) of the forecast day.
    pub days: usize,
    /// Days of labeled history preceding the forecast day.
    pub history_days: usize,
    pub start_date: NaiveDate,
    pub hub_centered: bool,
    pub stop_spacing_km: f64,
    /// Depot distance from the hub (default: 1.5 stop spacings).
    pub depot_distance_km: Option<f64>,
    /// First and last outbound departure, seconds after midnight.
    pub service_start_s: u32,
    pub service_end_s: u32,
    pub schedule_speed_kmh: f64,
    pub layover_s: u32,
    pub bus_capacity: u32,
    /// Size of the operator's current stationing plan.
    pub agency_k: usize,
    pub base_disruption_logit: f64,
    /// Logit offsets keyed `feature=level`, e.g. `service_window=morning`.
    pub feature_effects: BTreeMap<String, f64>,
    /// Logit slope per unit of a numeric feature (`precipitation`,
    /// `temperature`).
    pub numeric_effects: BTreeMap<String, f64>,
    pub ridership: RidershipConfig,
    /// Ground-truth chains per forecast-day context.
    pub truth_chains: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        let effects = [
            ("route_direction=R1:inbound", 0.8),
            ("service_window=morning", 0.6),
            ("service_window=afternoon", 0.5),
            ("ridership_category=high", 0.5),
            ("ridership_category=over_capacity", 1.0),
            ("day_of_week=sun", -0.6),
        ];
        Self {
            seed: 0,
            n_routes: 5,
            stops_per_route: 8,
            trips_per_route_per_day: 16,
            days: 1,
            history_days: 120,
            start_date: NaiveDate::from_ymd_opt(2023, 1, 2).expect("valid date"),
            hub_centered: true,
            stop_spacing_km: 1.0,
            depot_distance_km: None,
            service_start_s: 5 * 3600,
            service_end_s: 21 * 3600,
            schedule_speed_kmh: 18.0,
            layover_s: 300,
            bus_capacity: 40,
            agency_k: 5,
            base_disruption_logit: -6.6,
            feature_effects: effects.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            numeric_effects: [("precipitation".to_string(), 2.0)].into_iter().collect(),
            ridership: RidershipConfig::default(),
            truth_chains: 50,
        }
    }
}

impl GeneratorConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| ScenarioError::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ScenarioError::ConfigInvalid(m));
        for (name, v) in [
            ("n_routes", self.n_routes),
            ("stops_per_route", self.stops_per_route),
            ("trips_per_route_per_day", self.trips_per_route_per_day),
            ("days", self.days),
        ] {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if !self.hub_centered && self.stops_per_route < 2 {
            return bad("routes that skip the hub need at least 2 stops".into());
        }
        if !(self.stop_spacing_km > 0.0 && self.schedule_speed_kmh > 0.0) {
            return bad("stop spacing and schedule speed must be positive".into());
        }
        if self
            .depot_distance_km
            .is_some_and(|d| !(d > 0.0 && d.is_finite()))
        {
            return bad("depot_distance_km must be positive".into());
        }
        if self.service_end_s < self.service_start_s {
            return bad("service ends before it starts".into());
        }
        if self.service_start_s < 4 * 3600 {
            return bad("service must start at 4:00 or later".into());
        }
        if self.bus_capacity == 0 {
            return bad("bus_capacity must be positive".into());
        }
        if self.base_disruption_logit.is_nan() {
            return bad("base_disruption_logit is NaN".into());
        }
        for (key, v) in &self.feature_effects {
            let Some((feature, level)) = key.split_once('=') else {
                return bad(format!("effect key {key:?} is not feature=level"));
            };
            if feature.parse::<Categorical>().is_err() || level.is_empty() {
                return bad(format!("effect key {key:?} names no categorical feature"));
            }
            if !v.is_finite() {
                return bad(format!("effect {key} is not finite"));
            }
        }
        for (key, v) in &self.numeric_effects {
            if key.parse::<Numerical>().is_err() || !v.is_finite() {
                return bad(format!("bad numeric effect {key:?}"));
            }
        }
        let r = &self.ridership;
        for (name, v) in [
            ("base_boarding", r.base_boarding),
            ("peak_multiplier", r.peak_multiplier),
            ("hotspot_boarding", r.hotspot_boarding),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("ridership.{name} must be a nonnegative number"));
            }
        }
        Ok(())
    }

    pub fn ground_truth(&self) -> GroundTruth {
        GroundTruth {
            base_logit: self.base_disruption_logit,
            effects: self.feature_effects.clone(),
            slopes: self.numeric_effects.clone(),
        }
    }

    /// Date of the simulated service day (right after the history).
    pub fn forecast_date(&self) -> NaiveDate {
        self.start_date + chrono::Days::new(self.history_days as u64)
    }
}

/// The logistic model that generated the labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub base_logit: f64,
    pub effects: BTreeMap<String, f64>,
    pub slopes: BTreeMap<String, f64>,
}

impl GroundTruth {
    pub fn logit(&self, f: &TripFeatures) -> f64 {
        let mut z = self.base_logit;
        for cat in Categorical::ALL {
            let key = format!("{}={}", cat.as_str(), f.level(cat));
            z += self.effects.get(&key).copied().unwrap_or(0.0);
        }
        for num in Numerical::ALL {
            z += self.slopes.get(num.as_str()).copied().unwrap_or(0.0) * f.value(num);
        }
        z
    }

    pub fn probability(&self, f: &TripFeatures) -> f64 {
        sigmoid(self.logit(f))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ground truth serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| ScenarioError::ConfigInvalid(e.to_string()))
    }
}

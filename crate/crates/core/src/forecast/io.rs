//! File formats of the forecasting module: `labeled_trips.csv`, the
//! per-day trip context, and the versioned model document.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::features::{DayOfWeek, LabeledTrip, RidershipCategory, ServiceWindow, TripFeatures};
use super::isotonic::IsotonicCalibrator;
use super::logistic::LogisticModel;
use super::{ForecastError, Result, TripContext};
use crate::network::{Direction, RouteDirection};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct LabeledRow {
    trip_id: String,
    route_id: String,
    direction: Direction,
    service_window: ServiceWindow,
    day_of_week: DayOfWeek,
    ridership_category: RidershipCategory,
    year: i32,
    month: u32,
    precip_in_hr: f64,
    temp_f: f64,
    label: u8,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> ForecastError {
    ForecastError::Io(format!("{}: {e}", path.display()))
}

fn csv_err(path: &Path, e: csv::Error) -> ForecastError {
    match e.kind() {
        csv::ErrorKind::Io(_) => io_err(path, e),
        _ => ForecastError::Malformed(format!("{}: {e}", path.display())),
    }
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(f))
}

pub fn read_labeled_trips(path: &Path) -> Result<Vec<LabeledTrip>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut out = Vec::new();
    for row in reader.deserialize::<LabeledRow>() {
        let r = row.map_err(|e| csv_err(path, e))?;
        if r.label > 1 {
            return Err(ForecastError::InvalidLabel(r.label));
        }
        if !(1..=12).contains(&r.month) {
            return Err(ForecastError::Malformed(format!(
                "trip {}: month {}",
                r.trip_id, r.month
            )));
        }
        out.push(LabeledTrip {
            trip_id: r.trip_id,
            features: TripFeatures {
                route_direction: RouteDirection::new(r.route_id, r.direction),
                ridership_category: r.ridership_category,
                service_window: r.service_window,
                year: r.year,
                month: r.month,
                day_of_week: r.day_of_week,
                precipitation: r.precip_in_hr,
                temperature: r.temp_f,
            },
            label: r.label,
        });
    }
    Ok(out)
}

pub fn write_labeled_trips(path: &Path, rows: &[LabeledTrip]) -> Result<()> {
    let mut w = writer(path)?;
    for t in rows {
        let f = &t.features;
        w.serialize(LabeledRow {
            trip_id: t.trip_id.clone(),
            route_id: f.route_direction.route_id.clone(),
            direction: f.route_direction.direction,
            service_window: f.service_window,
            day_of_week: f.day_of_week,
            ridership_category: f.ridership_category,
            year: f.year,
            month: f.month,
            precip_in_hr: f.precipitation,
            temp_f: f.temperature,
            label: t.label,
        })
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
struct ContextRow {
    trip_id: String,
    ridership_category: RidershipCategory,
    precip_in_hr: f64,
    temp_f: f64,
}

/// Reads `day_context.csv`: `trip_id,ridership_category,precip_in_hr,temp_f`.
pub fn read_day_context(path: &Path) -> Result<BTreeMap<String, TripContext>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut out = BTreeMap::new();
    for row in reader.deserialize::<ContextRow>() {
        let r = row.map_err(|e| csv_err(path, e))?;
        out.insert(
            r.trip_id,
            TripContext {
                ridership_category: r.ridership_category,
                precipitation: r.precip_in_hr,
                temperature: r.temp_f,
            },
        );
    }
    Ok(out)
}

pub fn write_day_context(path: &Path, context: &BTreeMap<String, TripContext>) -> Result<()> {
    let mut w = writer(path)?;
    for (trip_id, c) in context {
        w.serialize(ContextRow {
            trip_id: trip_id.clone(),
            ridership_category: c.ridership_category,
            precip_in_hr: c.precipitation,
            temp_f: c.temperature,
        })
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Persisted model: logistic parameters, feature layout (including
/// standardization statistics) and an optional calibrator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub v: u32,
    #[serde(flatten)]
    pub model: LogisticModel,
    pub calibrator: Option<IsotonicCalibrator>,
}

impl ModelDocument {
    pub fn new(model: LogisticModel, calibrator: Option<IsotonicCalibrator>) -> Self {
        Self {
            v: MODEL_FORMAT_VERSION,
            model,
            calibrator,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument =
            serde_json::from_str(text).map_err(|e| ForecastError::Malformed(e.to_string()))?;
        if doc.v != MODEL_FORMAT_VERSION {
            return Err(ForecastError::Malformed(format!(
                "unsupported model version {}",
                doc.v
            )));
        }
        if doc.model.weights.len() != doc.model.spec.n_columns() {
            return Err(ForecastError::Malformed(
                "weight count does not match the feature layout".into(),
            ));
        }
        if let Some(cal) = &doc.calibrator {
            // Re-run the invariant checks skipped by deserialization.
            IsotonicCalibrator::new(cal.breakpoints().to_vec())?;
        }
        Ok(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path).map_err(|e| io_err(path, e))?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json() + "\n").map_err(|e| io_err(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::features::{Categorical, FeatureSpec, Numerical};

    fn row(label: u8) -> LabeledTrip {
        LabeledTrip {
            trip_id: format!("T{label}"),
            features: TripFeatures {
                route_direction: RouteDirection::new("R1", Direction::Outbound),
                ridership_category: RidershipCategory::OverCapacity,
                service_window: ServiceWindow::MidDay,
                year: 2021,
                month: 11,
                day_of_week: DayOfWeek::Sat,
                precipitation: 0.125,
                temperature: 41.3,
            },
            label,
        }
    }

    #[test]
    fn labeled_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labeled_trips.csv");
        let rows = [row(0), row(1)];
        write_labeled_trips(&path, &rows).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(
            "trip_id,route_id,direction,service_window,day_of_week,ridership_category,year,month,precip_in_hr,temp_f,label\n"
        ));
        assert_eq!(read_labeled_trips(&path).unwrap(), rows);
    }

    #[test]
    fn model_round_trip_is_exact() {
        let rows = [row(0), row(1)];
        let spec = FeatureSpec::fit(
            rows.iter().map(|r| &r.features),
            &[Categorical::Month],
            &[Numerical::Temperature],
        );
        let model = LogisticModel {
            spec,
            intercept: -1.0 / 3.0,
            weights: vec![0.1 + 0.2, std::f64::consts::PI],
            l2_lambda: 1e-4,
        };
        let cal = IsotonicCalibrator::new(vec![(0.1, 0.0), (0.7, 1.0 / 7.0)]).unwrap();
        let doc = ModelDocument::new(model, Some(cal));
        let json = doc.to_json();
        assert!(json.contains("\"v\": 1"));
        assert_eq!(ModelDocument::from_json(&json).unwrap(), doc);
    }

    #[test]
    fn wrong_version_rejected() {
        let rows = [row(0)];
        let spec = FeatureSpec::fit(rows.iter().map(|r| &r.features), &[], &[]);
        let mut doc = ModelDocument::new(
            LogisticModel {
                spec,
                intercept: 0.0,
                weights: vec![],
                l2_lambda: 0.0,
            },
            None,
        );
        doc.v = 2;
        assert!(ModelDocument::from_json(&doc.to_json()).is_err());
    }
}

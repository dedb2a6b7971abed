//! Trip-level disruption forecasting.
//!
//! A [`Classifier`] maps [`TripFeatures`] to a disruption probability. The
//! shipped implementation is [`LogisticModel`]; [`IsotonicCalibrator`] can be
//! layered on top of any classifier through [`Calibrated`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::Schedule;

mod features;
pub mod io;
mod isotonic;
mod logistic;
mod metrics;
mod permutation;
mod selection;

pub use features::{
    encode, Categorical, CategoricalBlock, DayOfWeek, FeatureSpec, LabeledTrip, NumericColumn,
    Numerical, RidershipCategory, ServiceWindow, TripFeatures,
};
pub use isotonic::{fit_isotonic, pava, IsotonicCalibrator};
pub use logistic::{
    fit_dense, sigmoid, train_logistic, ConvergenceReport, LogisticModel, LogisticTrainer,
    TrainOptions, Trained, DEFAULT_L2_LAMBDA, DEFAULT_MAX_ITERS, DEFAULT_TOL,
};
pub use metrics::{bernoulli_entropy, cross_entropy, EPS};
pub use permutation::permutation_test;
pub use selection::{evaluate, select_feature_set, SelectionRow};

#[derive(Debug, Error)]
pub enum ForecastError {
    #[error("level {level:?} of {feature} was not seen in training")]
    UnseenLevel { feature: String, level: String },
    #[error("training data contains a single class")]
    SingleClassData,
    #[error(
        "gradient descent stopped after {iterations} iterations (|grad|_inf = {grad_inf_norm:e})"
    )]
    DidNotConverge {
        model: Box<LogisticModel>,
        iterations: usize,
        grad_inf_norm: f64,
    },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    Empty,
    #[error("empty sample")]
    EmptySample,
    #[error("calibrator has no breakpoints")]
    EmptyCalibrator,
    #[error("invalid calibrator: {0}")]
    InvalidCalibrator(String),
    #[error("label {0} is not binary")]
    InvalidLabel(u8),
    #[error("non-finite score")]
    NonFiniteScore,
    #[error("no context for trip {0}")]
    MissingContext(String),
    #[error("trip {0} starts outside service hours")]
    OutsideServiceHours(String),
    #[error("invalid option: {0}")]
    InvalidOption(String),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = ForecastError> = std::result::Result<T, E>;

/// Anything that produces a disruption probability for a trip.
pub trait Classifier {
    fn predict_proba(&self, features: &TripFeatures) -> Result<f64>;
}

/// Fits a classifier from labeled history.
pub trait Trainer {
    type Model: Classifier;

    fn fit(&self, data: &[LabeledTrip]) -> Result<Self::Model>;
}

/// A classifier whose scores are passed through an isotonic calibrator.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibrated<C> {
    pub inner: C,
    pub calibrator: IsotonicCalibrator,
}

impl<C: Classifier> Calibrated<C> {
    /// Fits the calibrator on the classifier's own scores for `data`.
    pub fn fit(inner: C, data: &[LabeledTrip]) -> Result<Self> {
        let scores = data
            .iter()
            .map(|d| inner.predict_proba(&d.features))
            .collect::<Result<Vec<_>>>()?;
        let labels: Vec<u8> = data.iter().map(|d| d.label).collect();
        let calibrator = fit_isotonic(&scores, &labels)?;
        Ok(Self { inner, calibrator })
    }
}

impl<C: Classifier> Classifier for Calibrated<C> {
    fn predict_proba(&self, features: &TripFeatures) -> Result<f64> {
        self.calibrator
            .calibrate(self.inner.predict_proba(features)?)
    }
}

/// Per-trip information that is not part of the static schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripContext {
    pub ridership_category: RidershipCategory,
    pub precipitation: f64,
    pub temperature: f64,
}

/// Features of a scheduled trip under the given context.
pub fn trip_features(
    schedule: &Schedule,
    trip_idx: usize,
    ctx: &TripContext,
) -> Result<TripFeatures> {
    let trip = &schedule.trips()[trip_idx];
    TripFeatures::for_trip(
        trip.route_direction.clone(),
        trip.service_date,
        trip.start_s(),
        ctx.ridership_category,
        ctx.precipitation,
        ctx.temperature,
    )
    .ok_or_else(|| ForecastError::OutsideServiceHours(trip.trip_id.clone()))
}

/// Calibrated disruption probability for every trip of the schedule.
pub fn forecast_day<C: Classifier + ?Sized>(
    model: &C,
    calibrator: Option<&IsotonicCalibrator>,
    schedule: &Schedule,
    context: &BTreeMap<String, TripContext>,
) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for (i, trip) in schedule.trips().iter().enumerate() {
        let ctx = context
            .get(&trip.trip_id)
            .ok_or_else(|| ForecastError::MissingContext(trip.trip_id.clone()))?;
        let features = trip_features(schedule, i, ctx)?;
        let raw = model.predict_proba(&features)?;
        let p = match calibrator {
            Some(cal) => cal.calibrate(raw)?,
            None => raw,
        };
        out.insert(trip.trip_id.clone(), p);
    }
    Ok(out)
}

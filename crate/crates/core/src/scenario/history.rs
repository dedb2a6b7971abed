use std::collections::BTreeMap;
use std::f64::consts::PI;

use chrono::{Datelike, NaiveDate};
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;

use super::{GeneratorConfig, GroundTruth, Result};
use crate::forecast::{
    trip_features, LabeledTrip, RidershipCategory, ServiceWindow, TripContext, TripFeatures,
};
use crate::network::Schedule;
use crate::rng::{derive_seed, substream, SimRng};

const HISTORY_STREAM: u64 = 1;
const CONTEXT_STREAM: u64 = 2;

const RAIN_PROBABILITY: f64 = 0.3;
const MEAN_RAIN_IN_HR: f64 = 0.1;

/// Weather shared by every trip of one day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DayWeather {
    pub temperature: f64,
    pub precipitation: f64,
}

impl DayWeather {
    /// Seasonal temperature sinusoid (coldest mid-January) plus noise, and
    /// a dry/rainy mixture for precipitation.
    pub fn sample(date: NaiveDate, rng: &mut SimRng) -> Self {
        let phase = 2.0 * PI * (date.ordinal() as f64 - 105.0) / 365.25;
        let noise = Normal::new(0.0, 5.0).expect("valid normal").sample(rng);
        let temperature = round_to(60.0 + 20.0 * phase.sin() + noise, 1);
        let precipitation = if rng.random::<f64>() < RAIN_PROBABILITY {
            round_to(
                Exp::new(1.0 / MEAN_RAIN_IN_HR)
                    .expect("valid rate")
                    .sample(rng),
                3,
            )
        } else {
            0.0
        };
        Self {
            temperature,
            precipitation,
        }
    }
}

fn round_to(x: f64, digits: i32) -> f64 {
    let scale = 10f64.powi(digits);
    (x * scale).round() / scale
}

/// Loads run heavier in the commute peaks.
fn sample_category(window: Option<ServiceWindow>, rng: &mut SimRng) -> RidershipCategory {
    let weights = match window {
        Some(ServiceWindow::Morning | ServiceWindow::Afternoon) => [0.2, 0.4, 0.3, 0.1],
        _ => [0.5, 0.35, 0.12, 0.03],
    };
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (w, cat) in weights.iter().zip(RidershipCategory::ALL) {
        acc += w;
        if u < acc {
            return cat;
        }
    }
    RidershipCategory::OverCapacity
}

fn sample_context(
    schedule: &Schedule,
    date: NaiveDate,
    rng: &mut SimRng,
) -> BTreeMap<String, TripContext> {
    let weather = DayWeather::sample(date, rng);
    schedule
        .trips()
        .iter()
        .map(|t| {
            let window = ServiceWindow::from_seconds(t.start_s());
            (
                t.trip_id.clone(),
                TripContext {
                    ridership_category: sample_category(window, rng),
                    precipitation: weather.precipitation,
                    temperature: weather.temperature,
                },
            )
        })
        .collect()
}

/// Every scheduled trip on each of the `history_days` days before the
/// forecast day, labeled by the ground-truth model.
pub fn generate_labeled_history(
    cfg: &GeneratorConfig,
    schedule: &Schedule,
) -> Result<Vec<LabeledTrip>> {
    cfg.validate()?;
    let truth = cfg.ground_truth();
    let base = derive_seed(cfg.seed, HISTORY_STREAM);
    let days: Vec<Vec<LabeledTrip>> = (0..cfg.history_days)
        .into_par_iter()
        .map(|d| {
            let date = cfg.start_date + chrono::Days::new(d as u64);
            let mut rng = substream(base, d as u64);
            let context = sample_context(schedule, date, &mut rng);
            let mut rows = Vec::with_capacity(schedule.trips().len());
            for trip in schedule.trips() {
                let ctx = &context[&trip.trip_id];
                let features = TripFeatures::for_trip(
                    trip.route_direction.clone(),
                    date,
                    trip.start_s(),
                    ctx.ridership_category,
                    ctx.precipitation,
                    ctx.temperature,
                )
                .ok_or_else(|| {
                    crate::forecast::ForecastError::OutsideServiceHours(trip.trip_id.clone())
                })?;
                let label = (rng.random::<f64>() < truth.probability(&features)) as u8;
                rows.push(LabeledTrip {
                    trip_id: format!("{date}/{}", trip.trip_id),
                    features,
                    label,
                });
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(days.into_iter().flatten().collect())
}

/// `cfg.days` sampled contexts (weather and loads) of the forecast day.
pub fn generate_day_contexts(
    cfg: &GeneratorConfig,
    schedule: &Schedule,
) -> Result<Vec<BTreeMap<String, TripContext>>> {
    cfg.validate()?;
    let base = derive_seed(cfg.seed, CONTEXT_STREAM);
    let date = cfg.forecast_date();
    Ok((0..cfg.days)
        .map(|d| sample_context(schedule, date, &mut substream(base, d as u64)))
        .collect())
}

/// True disruption probability of every trip under one context.
pub fn truth_probabilities(
    truth: &GroundTruth,
    schedule: &Schedule,
    context: &BTreeMap<String, TripContext>,
) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for (i, trip) in schedule.trips().iter().enumerate() {
        let ctx = context
            .get(&trip.trip_id)
            .ok_or_else(|| crate::forecast::ForecastError::MissingContext(trip.trip_id.clone()))?;
        let f = trip_features(schedule, i, ctx)?;
        out.insert(trip.trip_id.clone(), truth.probability(&f));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::generate_network;

    fn small(history_days: usize) -> GeneratorConfig {
        GeneratorConfig {
            n_routes: 2,
            stops_per_route: 3,
            trips_per_route_per_day: 10,
            history_days,
            ..Default::default()
        }
    }

    #[test]
    fn hopeless_base_means_no_positives() {
        let mut cfg = small(30);
        cfg.base_disruption_logit = -50.0;
        let s = generate_network(&cfg).unwrap();
        let rows = generate_labeled_history(&cfg, &s).unwrap();
        assert_eq!(rows.len(), 30 * 40);
        assert!(rows.iter().all(|r| r.label == 0));
    }

    #[test]
    fn fair_coin_without_effects() {
        let mut cfg = small(250);
        cfg.base_disruption_logit = 0.0;
        cfg.feature_effects.clear();
        cfg.numeric_effects.clear();
        let s = generate_network(&cfg).unwrap();
        let rows = generate_labeled_history(&cfg, &s).unwrap();
        assert!(rows.len() >= 10_000);
        let rate = rows.iter().map(|r| r.label as f64).sum::<f64>() / rows.len() as f64;
        assert!((rate - 0.5).abs() <= 0.02, "{rate}");
    }

    #[test]
    fn weather_is_shared_within_a_day() {
        let cfg = small(3);
        let s = generate_network(&cfg).unwrap();
        let rows = generate_labeled_history(&cfg, &s).unwrap();
        for day in rows.chunks(s.trips().len()) {
            assert!(day
                .iter()
                .all(|r| r.features.temperature == day[0].features.temperature));
            assert!(day
                .iter()
                .all(|r| r.features.precipitation == day[0].features.precipitation));
        }
    }

    #[test]
    fn contexts_cover_every_trip() {
        let cfg = GeneratorConfig {
            days: 3,
            ..small(1)
        };
        let s = generate_network(&cfg).unwrap();
        let ctx = generate_day_contexts(&cfg, &s).unwrap();
        assert_eq!(ctx.len(), 3);
        let p = truth_probabilities(&cfg.ground_truth(), &s, &ctx[0]).unwrap();
        assert_eq!(p.len(), s.trips().len());
        assert!(p.values().all(|&p| (0.0..=1.0).contains(&p)));
    }
}

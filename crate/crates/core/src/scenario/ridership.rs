use rand::seq::index::sample;

use super::{GeneratorConfig, Result};
use crate::forecast::ServiceWindow;
use crate::network::Schedule;
use crate::rng::{derive_seed, seeded};
use crate::sim::{RidershipParams, StopDemand, DEFAULT_HORIZON};

const HOTSPOT_STREAM: u64 = 3;

/// Poisson means for every (trip, stop). The first stop of a trip draws
/// twice the usual crowd, peaks multiply demand, and a few trips inside the
/// default simulation horizon get more riders than a bus can carry.
pub fn generate_ridership_params(
    cfg: &GeneratorConfig,
    schedule: &Schedule,
) -> Result<RidershipParams> {
    cfg.validate()?;
    let rc = &cfg.ridership;
    let mut params = RidershipParams::default();
    for trip in schedule.trips() {
        let peak = matches!(
            ServiceWindow::from_seconds(trip.start_s()),
            Some(ServiceWindow::Morning | ServiceWindow::Afternoon)
        );
        let level = rc.base_boarding * if peak { rc.peak_multiplier } else { 1.0 };
        let last = trip.stop_times.len() - 1;
        for (seq, st) in trip.stop_times.iter().enumerate().take(last) {
            let board = if seq == 0 { 2.0 * level } else { level };
            let alight = if seq == 0 { 0.0 } else { level };
            if board > 0.0 || alight > 0.0 {
                params.means.insert(
                    (trip.trip_id.clone(), st.stop_id.clone()),
                    StopDemand { board, alight },
                );
            }
        }
    }

    let eligible: Vec<usize> = schedule
        .trips()
        .iter()
        .enumerate()
        .filter(|(_, t)| (DEFAULT_HORIZON[0]..=DEFAULT_HORIZON[1]).contains(&t.start_s()))
        .map(|(i, _)| i)
        .collect();
    let n = rc.hotspots.min(eligible.len());
    if n > 0 && rc.hotspot_boarding > 0.0 {
        let mut rng = seeded(derive_seed(cfg.seed, HOTSPOT_STREAM));
        let mut picked: Vec<usize> = sample(&mut rng, eligible.len(), n)
            .into_iter()
            .map(|k| eligible[k])
            .collect();
        picked.sort_unstable();
        for ti in picked {
            let trip = &schedule.trips()[ti];
            let key = (trip.trip_id.clone(), trip.stop_times[0].stop_id.clone());
            params.means.entry(key).or_default().board = rc.hotspot_boarding;
        }
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_network, RidershipConfig};

    #[test]
    fn zero_demand_is_empty() {
        let cfg = GeneratorConfig {
            ridership: RidershipConfig {
                base_boarding: 0.0,
                hotspots: 0,
                ..Default::default()
            },
            ..Default::default()
        };
        let s = generate_network(&cfg).unwrap();
        assert!(generate_ridership_params(&cfg, &s)
            .unwrap()
            .means
            .is_empty());
    }

    #[test]
    fn means_nonnegative_and_hotspots_exceed_capacity() {
        let cfg = GeneratorConfig::default();
        let s = generate_network(&cfg).unwrap();
        let p = generate_ridership_params(&cfg, &s).unwrap();
        p.validate(&s).unwrap();
        assert!(p.means.values().all(|d| d.board >= 0.0 && d.alight >= 0.0));
        let over = p
            .means
            .values()
            .filter(|d| d.board > s.bus_capacity() as f64)
            .count();
        assert_eq!(over, cfg.ridership.hotspots);
    }
}

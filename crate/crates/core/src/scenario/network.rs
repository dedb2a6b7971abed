use std::f64::consts::PI;

use super::{GeneratorConfig, Result};
use crate::network::{Direction, NetworkConfig, RouteDirection, Schedule, Stop, StopTime, Trip};

const HUB_LAT: f64 = 36.16;
const HUB_LON: f64 = -86.78;
const KM_PER_DEGREE: f64 = 111.32;
pub(crate) const HUB_ID: &str = "HUB";
pub(crate) const DEPOT_ID: &str = "DEPOT";
/// Stationing candidates are capped at this many stops.
const MAX_CANDIDATES: usize = 25;

fn place(angle: f64, km: f64) -> (f64, f64) {
    let lat = HUB_LAT + km * angle.sin() / KM_PER_DEGREE;
    let lon = HUB_LON + km * angle.cos() / (KM_PER_DEGREE * HUB_LAT.to_radians().cos());
    (lat, lon)
}

fn stop(id: String, (lat, lon): (f64, f64)) -> Stop {
    Stop {
        name: id.clone(),
        stop_id: id,
        lat,
        lon,
    }
}

pub(crate) fn route_stop_id(route: usize, j: usize) -> String {
    format!("R{}S{:02}", route + 1, j)
}

/// Spoke-hub network: `n_routes` straight routes radiating from a central
/// hub, each run in both directions, with the depot set off between the
/// first two spokes. Vehicles shuttle out and back on a single route.
pub fn generate_network(cfg: &GeneratorConfig) -> Result<Schedule> {
    cfg.validate()?;
    let n = cfg.n_routes;
    let angle = |r: usize| 2.0 * PI * r as f64 / n as f64;

    let mut stops = vec![
        stop(HUB_ID.into(), (HUB_LAT, HUB_LON)),
        stop(
            DEPOT_ID.into(),
            place(
                PI / n as f64,
                cfg.depot_distance_km.unwrap_or(1.5 * cfg.stop_spacing_km),
            ),
        ),
    ];
    for r in 0..n {
        for j in 1..=cfg.stops_per_route {
            stops.push(stop(
                route_stop_id(r, j),
                place(angle(r), j as f64 * cfg.stop_spacing_km),
            ));
        }
    }

    let segment_s = ((cfg.stop_spacing_km / cfg.schedule_speed_kmh * 3600.0).round() as u32).max(1);
    let trips_per_dir = cfg.trips_per_route_per_day;
    let headway = if trips_per_dir > 1 {
        (cfg.service_end_s - cfg.service_start_s) / (trips_per_dir as u32 - 1)
    } else {
        0
    };
    let date = cfg.forecast_date();

    let mut route_directions = Vec::new();
    let mut trips = Vec::new();
    for r in 0..n {
        let route_id = format!("R{}", r + 1);
        let mut outbound: Vec<String> = Vec::new();
        if cfg.hub_centered {
            outbound.push(HUB_ID.into());
        }
        outbound.extend((1..=cfg.stops_per_route).map(|j| route_stop_id(r, j)));
        let inbound: Vec<String> = outbound.iter().rev().cloned().collect();
        let one_way = segment_s * (outbound.len() as u32 - 1);
        let cycle = 2 * one_way + 2 * cfg.layover_s;
        let n_vehicles = if headway == 0 {
            trips_per_dir
        } else {
            (cycle.div_ceil(headway) as usize).clamp(1, trips_per_dir)
        };

        for dir in [Direction::Outbound, Direction::Inbound] {
            route_directions.push(RouteDirection::new(route_id.clone(), dir));
        }
        let timed = |stops: &[String], start: u32| -> Vec<StopTime> {
            stops
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    let t = start + k as u32 * segment_s;
                    StopTime {
                        stop_id: s.clone(),
                        arrival_s: t,
                        departure_s: t,
                    }
                })
                .collect()
        };
        for i in 0..trips_per_dir {
            let out_start = cfg.service_start_s + i as u32 * headway;
            let in_start = out_start + one_way + cfg.layover_s;
            let v = i % n_vehicles;
            let vehicle_id = format!("V{}-{v}", r + 1);
            let block_id = format!("B{}-{v}", r + 1);
            for (dir, seq, start, tag) in [
                (Direction::Outbound, &outbound, out_start, 'O'),
                (Direction::Inbound, &inbound, in_start, 'I'),
            ] {
                trips.push(Trip {
                    trip_id: format!("{route_id}-{tag}-{i:03}"),
                    route_direction: RouteDirection::new(route_id.clone(), dir),
                    stop_times: timed(seq, start),
                    service_date: date,
                    vehicle_id: vehicle_id.clone(),
                    block_id: block_id.clone(),
                });
            }
        }
    }

    let mid = cfg.stops_per_route.div_ceil(2);
    let mut candidates = vec![HUB_ID.to_string()];
    candidates.extend((0..n).map(|r| route_stop_id(r, mid)));
    candidates.truncate(MAX_CANDIDATES);
    // The operator keeps its reserve downtown: the hub plus the nearest
    // mid-route stops.
    let agency_plan = (cfg.agency_k > 0 && cfg.agency_k <= candidates.len())
        .then(|| candidates[..cfg.agency_k].to_vec());

    let network = NetworkConfig {
        depot: DEPOT_ID.into(),
        hub: HUB_ID.into(),
        candidate_stops: candidates,
        detour_factor: crate::network::DEFAULT_DETOUR_FACTOR,
        speed_mph: crate::network::DEFAULT_SPEED_MPH,
        bus_capacity: cfg.bus_capacity,
        agency_plan,
    };
    Ok(Schedule::new(stops, route_directions, trips, network)?)
}

#![allow(dead_code)]

use chrono::NaiveDate;
use stationing::network::{
    Direction, NetworkConfig, RouteDirection, Schedule, Stop, StopTime, Trip,
};
use stationing::sim::Chain;

pub fn stop(id: &str, lat: f64, lon: f64) -> Stop {
    Stop {
        stop_id: id.into(),
        name: id.into(),
        lat,
        lon,
    }
}

pub struct TripSpec<'a> {
    pub id: &'a str,
    pub route: &'a str,
    pub direction: Direction,
    pub vehicle: &'a str,
    pub stops: &'a [(&'a str, u32)],
}

pub fn trip(spec: TripSpec) -> Trip {
    Trip {
        trip_id: spec.id.into(),
        route_direction: RouteDirection::new(spec.route, spec.direction),
        stop_times: spec
            .stops
            .iter()
            .map(|&(s, t)| StopTime {
                stop_id: s.into(),
                arrival_s: t,
                departure_s: t,
            })
            .collect(),
        service_date: NaiveDate::from_ymd_opt(2024, 3, 4).unwrap(),
        vehicle_id: spec.vehicle.into(),
        block_id: format!("BLK-{}", spec.vehicle),
    }
}

/// Outbound trip of route `R1` on vehicle `V1`.
pub fn simple_trip(id: &str, stops: &[(&str, u32)]) -> Trip {
    trip(TripSpec {
        id,
        route: "R1",
        direction: Direction::Outbound,
        vehicle: "V1",
        stops,
    })
}

pub fn schedule(
    stops: Vec<Stop>,
    trips: Vec<Trip>,
    candidates: &[&str],
    capacity: u32,
) -> Schedule {
    let mut rds: Vec<RouteDirection> = trips.iter().map(|t| t.route_direction.clone()).collect();
    rds.sort();
    rds.dedup();
    Schedule::new(
        stops,
        rds,
        trips,
        NetworkConfig {
            depot: "DEPOT".into(),
            hub: candidates[0].into(),
            candidate_stops: candidates.iter().map(|s| s.to_string()).collect(),
            detour_factor: 1.3,
            speed_mph: 20.0,
            bus_capacity: capacity,
            agency_plan: None,
        },
    )
    .unwrap()
}

pub fn chain(
    boarding: &[(&str, &str, u32)],
    alighting: &[(&str, &str, u32)],
    disruptions: &[(&str, usize)],
) -> Chain {
    let mut c = Chain::new(0);
    for &(t, s, n) in boarding {
        c.boarding.insert((t.into(), s.into()), n);
    }
    for &(t, s, n) in alighting {
        c.alighting.insert((t.into(), s.into()), n);
    }
    for &(t, seq) in disruptions {
        c.disruptions.insert(t.into(), seq);
    }
    c
}

/// Deadhead miles between two points, computed independently of the
/// library: haversine on a 6371 km sphere, times 1.3, in statute miles.
pub fn oracle_miles(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (la1, lo1) = (a.0.to_radians(), a.1.to_radians());
    let (la2, lo2) = (b.0.to_radians(), b.1.to_radians());
    let h = ((la2 - la1) / 2.0).sin().powi(2)
        + la1.cos() * la2.cos() * ((lo2 - lo1) / 2.0).sin().powi(2);
    let km = 2.0 * 6371.0 * h.sqrt().asin();
    km / 1.609344 * 1.3
}

/// Minutes at 20 mph.
pub fn oracle_minutes(miles: f64) -> f64 {
    miles / 20.0 * 60.0
}

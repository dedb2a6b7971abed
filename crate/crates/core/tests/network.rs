use std::fs;
use std::path::Path;

use proptest::prelude::*;
use stationing::network::{load_schedule, NetworkError};
use stationing::scenario::{generate_network, GeneratorConfig};

fn write_dir(dir: &Path, stop_times: &str) {
    fs::write(
        dir.join("stops.csv"),
        "stop_id,name,lat,lon\nS1,First,36.1,-86.7\nS2,Second,36.11,-86.7\n",
    )
    .unwrap();
    fs::write(
        dir.join("route_directions.csv"),
        "route_id,direction\n7,outbound\n",
    )
    .unwrap();
    fs::write(
        dir.join("trips.csv"),
        "trip_id,route_id,direction,service_date,vehicle_id,block_id\nT1,7,outbound,2024-03-04,V1,B1\n",
    )
    .unwrap();
    fs::write(
        dir.join("stop_times.csv"),
        format!("trip_id,seq,stop_id,arrival_s,departure_s\n{stop_times}"),
    )
    .unwrap();
    fs::write(
        dir.join("network.json"),
        r#"{"depot":"S1","hub":"S1","candidate_stops":["S1"],"detour_factor":1.3,"speed_mph":20.0,"bus_capacity":40}"#,
    )
    .unwrap();
}

#[test]
fn smallest_valid_directory() {
    let dir = tempfile::tempdir().unwrap();
    write_dir(dir.path(), "T1,0,S1,21600,21600\n");
    let s = load_schedule(dir.path()).unwrap();
    assert_eq!(s.trips().len(), 1);
    assert_eq!(s.trips()[0].stop_times.len(), 1);
    assert_eq!(s.bus_capacity(), 40);
}

#[test]
fn dangling_stop() {
    let dir = tempfile::tempdir().unwrap();
    write_dir(dir.path(), "T1,0,S1,21600,21600\nT1,1,S99,21700,21700\n");
    match load_schedule(dir.path()) {
        Err(NetworkError::DanglingReference(id)) => assert_eq!(id, "S99"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn arrivals_must_increase() {
    let dir = tempfile::tempdir().unwrap();
    write_dir(dir.path(), "T1,0,S1,100,100\nT1,1,S2,90,90\n");
    assert!(
        matches!(load_schedule(dir.path()), Err(NetworkError::NonMonotoneStopTimes(t)) if t == "T1")
    );
}

#[test]
fn missing_and_malformed_files() {
    let dir = tempfile::tempdir().unwrap();
    write_dir(dir.path(), "T1,0,S1,21600,21600\n");
    fs::remove_file(dir.path().join("trips.csv")).unwrap();
    assert!(matches!(
        load_schedule(dir.path()),
        Err(NetworkError::MissingFile(_))
    ));

    write_dir(dir.path(), "T1,0,S1,soon,21600\n");
    assert!(matches!(
        load_schedule(dir.path()),
        Err(NetworkError::MalformedRow { line: 2, .. })
    ));
}

#[test]
fn write_then_load_is_identity() {
    let s = generate_network(&GeneratorConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    s.write(dir.path()).unwrap();
    let back = load_schedule(dir.path()).unwrap();
    assert_eq!(back.stops(), s.stops());
    assert_eq!(back.route_directions(), s.route_directions());
    assert_eq!(back.trips(), s.trips());
    assert_eq!(back.network(), s.network());
}

proptest! {
    #[test]
    fn legs_are_symmetric_with_zero_diagonal(a in 0usize..42, b in 0usize..42) {
        let s = generate_network(&GeneratorConfig::default()).unwrap();
        let n = s.stops().len();
        let (a, b) = (a % n, b % n);
        let ab = s.leg(a, b);
        prop_assert_eq!(ab, s.leg(b, a));
        prop_assert_eq!(ab.miles == 0.0, a == b || s.stops()[a].lat == s.stops()[b].lat && s.stops()[a].lon == s.stops()[b].lon);
        prop_assert!((ab.minutes - ab.miles / 20.0 * 60.0).abs() < 1e-12);
    }
}

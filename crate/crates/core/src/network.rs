//! Static transit network: stops, route-directions, trips and the
//! deployment parameters (depot, hub, stationing candidates) that come with
//! them. Schedules are immutable once validated and are shared freely across
//! simulation workers.
//!
//! On disk a schedule is a directory of four CSV files plus `network.json`:
//!
//! | file                   | header                                               |
//! |------------------------|------------------------------------------------------|
//! | `stops.csv`            | `stop_id,name,lat,lon`                               |
//! | `route_directions.csv` | `route_id,direction`                                 |
//! | `trips.csv`            | `trip_id,route_id,direction,service_date,vehicle_id,block_id` |
//! | `stop_times.csv`       | `trip_id,seq,stop_id,arrival_s,departure_s`          |

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0;
pub const KM_PER_MILE: f64 = 1.609_344;

pub const DEFAULT_DETOUR_FACTOR: f64 = 1.3;
pub const DEFAULT_SPEED_MPH: f64 = 20.0;
pub const DEFAULT_BUS_CAPACITY: u32 = 40;

const STOPS_FILE: &str = "stops.csv";
const ROUTE_DIRECTIONS_FILE: &str = "route_directions.csv";
const TRIPS_FILE: &str = "trips.csv";
const STOP_TIMES_FILE: &str = "stop_times.csv";
const NETWORK_FILE: &str = "network.json";

/// Files making up a schedule directory.
pub const SCHEDULE_FILES: [&str; 5] = [
    STOPS_FILE,
    ROUTE_DIRECTIONS_FILE,
    TRIPS_FILE,
    STOP_TIMES_FILE,
    NETWORK_FILE,
];

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("{file}:{line}: {reason}")]
    MalformedRow {
        file: String,
        line: u64,
        reason: String,
    },
    #[error("dangling reference to {0}")]
    DanglingReference(String),
    #[error("stop times of trip {0} are not strictly increasing")]
    NonMonotoneStopTimes(String),
    #[error("unknown stop {0}")]
    UnknownStop(String),
    #[error("invalid network: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = NetworkError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stop {
    pub stop_id: String,
    pub name: String,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Inbound,
    Outbound,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Inbound => "inbound",
            Direction::Outbound => "outbound",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "inbound" => Ok(Direction::Inbound),
            "outbound" => Ok(Direction::Outbound),
            other => Err(format!("unknown direction {other:?}")),
        }
    }
}

/// A route paired with its direction of travel.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RouteDirection {
    pub route_id: String,
    pub direction: Direction,
}

impl RouteDirection {
    pub fn new(route_id: impl Into<String>, direction: Direction) -> Self {
        Self {
            route_id: route_id.into(),
            direction,
        }
    }
}

impl fmt::Display for RouteDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.route_id, self.direction)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopTime {
    pub stop_id: String,
    /// Seconds since midnight.
    pub arrival_s: u32,
    pub departure_s: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trip {
    pub trip_id: String,
    pub route_direction: RouteDirection,
    pub stop_times: Vec<StopTime>,
    pub service_date: NaiveDate,
    /// The regular bus assigned to the trip.
    pub vehicle_id: String,
    pub block_id: String,
}

impl Trip {
    pub fn start_s(&self) -> u32 {
        self.stop_times[0].arrival_s
    }

    pub fn end_s(&self) -> u32 {
        self.stop_times[self.stop_times.len() - 1].departure_s
    }

    /// Position of the first visit to `stop_id` within this trip.
    pub fn position_of(&self, stop_id: &str) -> Option<usize> {
        self.stop_times.iter().position(|st| st.stop_id == stop_id)
    }
}

/// Deployment parameters stored in `network.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub depot: String,
    pub hub: String,
    pub candidate_stops: Vec<String>,
    #[serde(default = "default_detour_factor")]
    pub detour_factor: f64,
    #[serde(default = "default_speed_mph")]
    pub speed_mph: f64,
    #[serde(default = "default_bus_capacity")]
    pub bus_capacity: u32,
    /// Stationing currently used by the operator, if known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agency_plan: Option<Vec<String>>,
}

fn default_detour_factor() -> f64 {
    DEFAULT_DETOUR_FACTOR
}

fn default_speed_mph() -> f64 {
    DEFAULT_SPEED_MPH
}

fn default_bus_capacity() -> u32 {
    DEFAULT_BUS_CAPACITY
}

/// Deadhead leg between two stops.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Leg {
    pub minutes: f64,
    pub miles: f64,
}

/// Great-circle distance in kilometres.
pub fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * a.sqrt().min(1.0).asin()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    stops: Vec<Stop>,
    stop_index: HashMap<String, usize>,
    route_directions: Vec<RouteDirection>,
    trips: Vec<Trip>,
    trip_index: HashMap<String, usize>,
    network: NetworkConfig,
}

impl Schedule {
    /// Builds a schedule and checks every invariant.
    pub fn new(
        stops: Vec<Stop>,
        route_directions: Vec<RouteDirection>,
        trips: Vec<Trip>,
        network: NetworkConfig,
    ) -> Result<Self> {
        let mut stop_index = HashMap::with_capacity(stops.len());
        for (i, stop) in stops.iter().enumerate() {
            if !(-90.0..=90.0).contains(&stop.lat) || !(-180.0..=180.0).contains(&stop.lon) {
                return Err(NetworkError::Invalid(format!(
                    "stop {} has coordinates out of range",
                    stop.stop_id
                )));
            }
            if stop_index.insert(stop.stop_id.clone(), i).is_some() {
                return Err(NetworkError::Invalid(format!(
                    "duplicate stop_id {}",
                    stop.stop_id
                )));
            }
        }

        let mut seen_rd = HashSet::new();
        for rd in &route_directions {
            if !seen_rd.insert(rd) {
                return Err(NetworkError::Invalid(format!(
                    "duplicate route-direction {rd}"
                )));
            }
        }

        let mut trip_index = HashMap::with_capacity(trips.len());
        for (i, trip) in trips.iter().enumerate() {
            if !seen_rd.contains(&trip.route_direction) {
                return Err(NetworkError::DanglingReference(
                    trip.route_direction.to_string(),
                ));
            }
            if trip.stop_times.is_empty() {
                return Err(NetworkError::Invalid(format!(
                    "trip {} has no stop times",
                    trip.trip_id
                )));
            }
            for st in &trip.stop_times {
                if !stop_index.contains_key(&st.stop_id) {
                    return Err(NetworkError::DanglingReference(st.stop_id.clone()));
                }
                if st.departure_s < st.arrival_s {
                    return Err(NetworkError::NonMonotoneStopTimes(trip.trip_id.clone()));
                }
            }
            for w in trip.stop_times.windows(2) {
                if w[1].arrival_s <= w[0].arrival_s || w[1].arrival_s < w[0].departure_s {
                    return Err(NetworkError::NonMonotoneStopTimes(trip.trip_id.clone()));
                }
            }
            if trip_index.insert(trip.trip_id.clone(), i).is_some() {
                return Err(NetworkError::Invalid(format!(
                    "duplicate trip_id {}",
                    trip.trip_id
                )));
            }
        }

        for id in [&network.depot, &network.hub]
            .into_iter()
            .chain(&network.candidate_stops)
            .chain(network.agency_plan.iter().flatten())
        {
            if !stop_index.contains_key(id) {
                return Err(NetworkError::DanglingReference(id.clone()));
            }
        }
        let unique: HashSet<_> = network.candidate_stops.iter().collect();
        if unique.len() != network.candidate_stops.len() {
            return Err(NetworkError::Invalid(
                "candidate_stops contains duplicates".into(),
            ));
        }
        if !(network.detour_factor > 0.0 && network.detour_factor.is_finite()) {
            return Err(NetworkError::Invalid(
                "detour_factor must be positive".into(),
            ));
        }
        if !(network.speed_mph > 0.0 && network.speed_mph.is_finite()) {
            return Err(NetworkError::Invalid("speed_mph must be positive".into()));
        }
        if network.bus_capacity == 0 {
            return Err(NetworkError::Invalid(
                "bus_capacity must be positive".into(),
            ));
        }

        Ok(Self {
            stops,
            stop_index,
            route_directions,
            trips,
            trip_index,
            network,
        })
    }

    pub fn stops(&self) -> &[Stop] {
        &self.stops
    }

    pub fn route_directions(&self) -> &[RouteDirection] {
        &self.route_directions
    }

    pub fn trips(&self) -> &[Trip] {
        &self.trips
    }

    pub fn network(&self) -> &NetworkConfig {
        &self.network
    }

    pub fn depot(&self) -> &str {
        &self.network.depot
    }

    pub fn hub(&self) -> &str {
        &self.network.hub
    }

    pub fn candidate_stops(&self) -> &[String] {
        &self.network.candidate_stops
    }

    pub fn bus_capacity(&self) -> u32 {
        self.network.bus_capacity
    }

    pub fn stop(&self, stop_id: &str) -> Option<&Stop> {
        self.stop_index.get(stop_id).map(|&i| &self.stops[i])
    }

    pub fn stop_idx(&self, stop_id: &str) -> Option<usize> {
        self.stop_index.get(stop_id).copied()
    }

    pub fn trip(&self, trip_id: &str) -> Option<&Trip> {
        self.trip_index.get(trip_id).map(|&i| &self.trips[i])
    }

    pub fn trip_idx(&self, trip_id: &str) -> Option<usize> {
        self.trip_index.get(trip_id).copied()
    }

    /// Deadhead minutes and miles between two stops: haversine distance
    /// scaled by the detour factor, driven at the constant deadhead speed.
    pub fn travel_time_and_distance(&self, from: &str, to: &str) -> Result<Leg> {
        let a = self
            .stop_idx(from)
            .ok_or_else(|| NetworkError::UnknownStop(from.into()))?;
        let b = self
            .stop_idx(to)
            .ok_or_else(|| NetworkError::UnknownStop(to.into()))?;
        Ok(self.leg(a, b))
    }

    /// Same as [`Schedule::travel_time_and_distance`] over stop-table indices.
    pub fn leg(&self, a: usize, b: usize) -> Leg {
        if a == b {
            return Leg::default();
        }
        // Order the endpoints so the floating-point result is symmetric.
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        let (sa, sb) = (&self.stops[a], &self.stops[b]);
        let km = haversine_km(sa.lat, sa.lon, sb.lat, sb.lon);
        let miles = km / KM_PER_MILE * self.network.detour_factor;
        Leg {
            minutes: miles / self.network.speed_mph * 60.0,
            miles,
        }
    }

    /// Trips of each vehicle, ordered by start time.
    pub fn vehicle_blocks(&self) -> BTreeMap<&str, Vec<usize>> {
        let mut blocks: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, trip) in self.trips.iter().enumerate() {
            blocks.entry(trip.vehicle_id.as_str()).or_default().push(i);
        }
        for list in blocks.values_mut() {
            list.sort_by_key(|&i| (self.trips[i].start_s(), i));
        }
        blocks
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        load_schedule(dir.as_ref())
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        write_schedule(self, dir.as_ref())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct StopRow {
    stop_id: String,
    name: String,
    lat: f64,
    lon: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct RouteDirectionRow {
    route_id: String,
    direction: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct TripRow {
    trip_id: String,
    route_id: String,
    direction: String,
    service_date: String,
    vehicle_id: String,
    block_id: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StopTimeRow {
    trip_id: String,
    seq: u32,
    stop_id: String,
    arrival_s: u32,
    departure_s: u32,
}

fn malformed(file: &str, line: u64, reason: impl Into<String>) -> NetworkError {
    NetworkError::MalformedRow {
        file: file.to_string(),
        line,
        reason: reason.into(),
    }
}

fn read_rows<T: serde::de::DeserializeOwned>(dir: &Path, file: &str) -> Result<Vec<(u64, T)>> {
    let path = dir.join(file);
    if !path.is_file() {
        return Err(NetworkError::MissingFile(path));
    }
    let mut reader =
        csv::Reader::from_path(&path).map_err(|e| malformed(file, 0, e.to_string()))?;
    let mut rows = Vec::new();
    for record in reader.deserialize::<T>() {
        match record {
            Ok(row) => rows.push((rows.len() as u64 + 2, row)),
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                return Err(malformed(file, line, e.to_string()));
            }
        }
    }
    Ok(rows)
}

fn parse_direction(file: &str, line: u64, s: &str) -> Result<Direction> {
    s.parse().map_err(|e: String| malformed(file, line, e))
}

/// Reads and validates a schedule directory.
pub fn load_schedule(dir: &Path) -> Result<Schedule> {
    let network_path = dir.join(NETWORK_FILE);
    if !network_path.is_file() {
        return Err(NetworkError::MissingFile(network_path));
    }
    let stop_rows: Vec<(u64, StopRow)> = read_rows(dir, STOPS_FILE)?;
    let rd_rows: Vec<(u64, RouteDirectionRow)> = read_rows(dir, ROUTE_DIRECTIONS_FILE)?;
    let trip_rows: Vec<(u64, TripRow)> = read_rows(dir, TRIPS_FILE)?;
    let st_rows: Vec<(u64, StopTimeRow)> = read_rows(dir, STOP_TIMES_FILE)?;
    let network: NetworkConfig = serde_json::from_str(&fs::read_to_string(&network_path)?)
        .map_err(|e| malformed(NETWORK_FILE, e.line() as u64, e.to_string()))?;

    let mut stops = Vec::with_capacity(stop_rows.len());
    let mut stop_ids = HashSet::new();
    for (line, row) in stop_rows {
        if !(-90.0..=90.0).contains(&row.lat) || !(-180.0..=180.0).contains(&row.lon) {
            return Err(malformed(STOPS_FILE, line, "coordinates out of range"));
        }
        if !stop_ids.insert(row.stop_id.clone()) {
            return Err(malformed(
                STOPS_FILE,
                line,
                format!("duplicate stop_id {}", row.stop_id),
            ));
        }
        stops.push(Stop {
            stop_id: row.stop_id,
            name: row.name,
            lat: row.lat,
            lon: row.lon,
        });
    }

    let mut route_directions = Vec::with_capacity(rd_rows.len());
    for (line, row) in rd_rows {
        let direction = parse_direction(ROUTE_DIRECTIONS_FILE, line, &row.direction)?;
        let rd = RouteDirection::new(row.route_id, direction);
        if route_directions.contains(&rd) {
            return Err(malformed(
                ROUTE_DIRECTIONS_FILE,
                line,
                format!("duplicate {rd}"),
            ));
        }
        route_directions.push(rd);
    }

    let mut trips = Vec::with_capacity(trip_rows.len());
    let mut trip_pos: HashMap<String, usize> = HashMap::new();
    for (line, row) in trip_rows {
        let direction = parse_direction(TRIPS_FILE, line, &row.direction)?;
        let service_date = NaiveDate::parse_from_str(&row.service_date, "%Y-%m-%d")
            .map_err(|e| malformed(TRIPS_FILE, line, format!("service_date: {e}")))?;
        if trip_pos.insert(row.trip_id.clone(), trips.len()).is_some() {
            return Err(malformed(
                TRIPS_FILE,
                line,
                format!("duplicate trip_id {}", row.trip_id),
            ));
        }
        trips.push(Trip {
            trip_id: row.trip_id,
            route_direction: RouteDirection::new(row.route_id, direction),
            stop_times: Vec::new(),
            service_date,
            vehicle_id: row.vehicle_id,
            block_id: row.block_id,
        });
    }

    let mut by_trip: Vec<Vec<(u32, u64, StopTimeRow)>> = vec![Vec::new(); trips.len()];
    for (line, row) in st_rows {
        let Some(&i) = trip_pos.get(&row.trip_id) else {
            return Err(NetworkError::DanglingReference(row.trip_id));
        };
        if !stop_ids.contains(&row.stop_id) {
            return Err(NetworkError::DanglingReference(row.stop_id));
        }
        by_trip[i].push((row.seq, line, row));
    }
    for (trip, mut rows) in trips.iter_mut().zip(by_trip) {
        rows.sort_by_key(|(seq, line, _)| (*seq, *line));
        for (expected, (seq, line, _)) in rows.iter().enumerate() {
            if *seq as usize != expected {
                return Err(malformed(
                    STOP_TIMES_FILE,
                    *line,
                    format!("trip {} expects seq {expected}, found {seq}", trip.trip_id),
                ));
            }
        }
        trip.stop_times = rows
            .into_iter()
            .map(|(_, _, r)| StopTime {
                stop_id: r.stop_id,
                arrival_s: r.arrival_s,
                departure_s: r.departure_s,
            })
            .collect();
    }

    Schedule::new(stops, route_directions, trips, network)
}

fn csv_writer(dir: &Path, file: &str) -> Result<csv::Writer<fs::File>> {
    let f = fs::File::create(dir.join(file))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(f))
}

fn csv_err(e: csv::Error) -> NetworkError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => NetworkError::Io(io),
        other => NetworkError::Invalid(format!("csv write failed: {other:?}")),
    }
}

pub fn write_schedule(schedule: &Schedule, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;

    let mut w = csv_writer(dir, STOPS_FILE)?;
    for s in &schedule.stops {
        w.serialize(StopRow {
            stop_id: s.stop_id.clone(),
            name: s.name.clone(),
            lat: s.lat,
            lon: s.lon,
        })
        .map_err(csv_err)?;
    }
    w.flush()?;

    let mut w = csv_writer(dir, ROUTE_DIRECTIONS_FILE)?;
    for rd in &schedule.route_directions {
        w.serialize(RouteDirectionRow {
            route_id: rd.route_id.clone(),
            direction: rd.direction.to_string(),
        })
        .map_err(csv_err)?;
    }
    w.flush()?;

    let mut w = csv_writer(dir, TRIPS_FILE)?;
    for t in &schedule.trips {
        w.serialize(TripRow {
            trip_id: t.trip_id.clone(),
            route_id: t.route_direction.route_id.clone(),
            direction: t.route_direction.direction.to_string(),
            service_date: t.service_date.format("%Y-%m-%d").to_string(),
            vehicle_id: t.vehicle_id.clone(),
            block_id: t.block_id.clone(),
        })
        .map_err(csv_err)?;
    }
    w.flush()?;

    let mut w = csv_writer(dir, STOP_TIMES_FILE)?;
    for t in &schedule.trips {
        for (seq, st) in t.stop_times.iter().enumerate() {
            w.serialize(StopTimeRow {
                trip_id: t.trip_id.clone(),
                seq: seq as u32,
                stop_id: st.stop_id.clone(),
                arrival_s: st.arrival_s,
                departure_s: st.departure_s,
            })
            .map_err(csv_err)?;
        }
    }
    w.flush()?;

    let json = serde_json::to_string_pretty(&schedule.network)
        .map_err(|e| NetworkError::Invalid(e.to_string()))?;
    fs::write(dir.join(NETWORK_FILE), json + "\n")?;
    Ok(())
}

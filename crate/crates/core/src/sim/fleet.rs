use rand::Rng;
use serde::{Deserialize, Serialize};

use super::PolicyConfig;
use crate::network::{Leg, Schedule};

/// Lifecycle of a substitute bus. After finishing a coverage task a bus
/// waits, dispatchable, where it finished (`Idle`) rather than driving back
/// to its station.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BusState {
    AtDepot,
    TravelingToStation,
    Stationed,
    Dispatched,
    Covering,
    Idle,
    ReturningToDepot,
}

impl BusState {
    pub fn can_transition_to(self, next: BusState) -> bool {
        use BusState::*;
        matches!(
            (self, next),
            (AtDepot, TravelingToStation)
                | (TravelingToStation, Stationed)
                | (Stationed, Dispatched)
                | (Dispatched, Covering)
                | (Covering, Idle)
                | (Idle, Dispatched)
                | (Stationed, ReturningToDepot)
                | (Idle, ReturningToDepot)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubstituteBus {
    pub bus_id: String,
    /// Stop index of the assigned station.
    pub station: usize,
    pub state: BusState,
    /// Stop index of the bus, or of the end of the leg it is driving.
    pub location: usize,
    /// Earliest time an `Idle` bus can take a new task.
    pub available_from: f64,
    pub deadhead_miles: f64,
    pub deadhead_minutes: f64,
}

impl SubstituteBus {
    pub fn new(bus_id: impl Into<String>, station: usize, depot: usize) -> Self {
        Self {
            bus_id: bus_id.into(),
            station,
            state: BusState::AtDepot,
            location: depot,
            available_from: 0.0,
            deadhead_miles: 0.0,
            deadhead_minutes: 0.0,
        }
    }

    pub fn is_available(&self, now: f64) -> bool {
        match self.state {
            BusState::Stationed => true,
            BusState::Idle => self.available_from <= now,
            _ => false,
        }
    }

    pub(crate) fn transition(&mut self, next: BusState) {
        assert!(
            self.state.can_transition_to(next),
            "{}: illegal transition {:?} -> {:?}",
            self.bus_id,
            self.state,
            next
        );
        self.state = next;
    }

    pub(crate) fn drive(&mut self, to: usize, leg: Leg) {
        self.deadhead_miles += leg.miles;
        self.deadhead_minutes += leg.minutes;
        self.location = to;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DispatchRequest {
    /// A bus left `left_behind` eligible riders at `stop`.
    Overage { stop: usize, left_behind: u32 },
    /// A bus broke down at `stop`.
    Disruption { stop: usize },
}

impl DispatchRequest {
    pub fn stop(&self) -> usize {
        match *self {
            DispatchRequest::Overage { stop, .. } | DispatchRequest::Disruption { stop } => stop,
        }
    }
}

/// Travel-time ties closer than this are broken at random.
const TIE_MINUTES: f64 = 1e-9;

/// Picks the available substitute nearest (by deadhead minutes) to the
/// request, or `None` when nothing should or can be sent. Overage requests
/// below the policy threshold are ignored.
pub fn dispatch_decision<R: Rng + ?Sized>(
    request: &DispatchRequest,
    fleet: &[SubstituteBus],
    schedule: &Schedule,
    policy: &PolicyConfig,
    now: f64,
    rng: &mut R,
) -> Option<usize> {
    if let DispatchRequest::Overage { left_behind, .. } = *request {
        let threshold = policy.overage_dispatch_fraction * schedule.bus_capacity() as f64;
        if left_behind as f64 <= threshold {
            return None;
        }
    }
    let target = request.stop();
    let mut best: Vec<usize> = Vec::new();
    let mut best_minutes = f64::INFINITY;
    for (i, bus) in fleet.iter().enumerate() {
        if !bus.is_available(now) {
            continue;
        }
        let minutes = schedule.leg(bus.location, target).minutes;
        if minutes < best_minutes - TIE_MINUTES {
            best_minutes = minutes;
            best.clear();
            best.push(i);
        } else if minutes <= best_minutes + TIE_MINUTES {
            best.push(i);
        }
    }
    match best.len() {
        0 => None,
        1 => Some(best[0]),
        n => Some(best[rng.random_range(0..n)]),
    }
}

/// One scheduled stop call of a bus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Visit {
    pub trip: usize,
    pub seq: usize,
    pub arrival: f64,
    pub departure: f64,
    /// Empty drive from the previous visit, for substitutes moving between
    /// the trips of a broken bus.
    pub reposition: Leg,
}

/// Itinerary handed to a dispatched substitute.
#[derive(Debug, Clone, PartialEq)]
pub struct ServicePlan {
    pub target_stop: usize,
    pub approach: Leg,
    pub arrive_at: f64,
    pub visits: Vec<Visit>,
    /// When the bus becomes dispatchable again.
    pub available_at: f64,
    /// Where it will be at that point.
    pub final_stop: usize,
}

impl ServicePlan {
    fn new(schedule: &Schedule, from: usize, target: usize, now: f64) -> Self {
        let approach = schedule.leg(from, target);
        let arrive_at = now + approach.minutes * 60.0;
        Self {
            target_stop: target,
            approach,
            arrive_at,
            visits: Vec::new(),
            available_at: arrive_at,
            final_stop: target,
        }
    }

    /// Appends stops `from_seq..` of `trip`, shifted so that the first one is
    /// reached no earlier than `earliest`.
    fn push_trip(
        &mut self,
        schedule: &Schedule,
        trip: usize,
        from_seq: usize,
        earliest: f64,
        reposition: Leg,
    ) {
        let times = &schedule.trips()[trip].stop_times;
        let delay = (earliest - times[from_seq].arrival_s as f64).max(0.0);
        for (seq, st) in times.iter().enumerate().skip(from_seq) {
            self.visits.push(Visit {
                trip,
                seq,
                arrival: st.arrival_s as f64 + delay,
                departure: st.departure_s as f64 + delay,
                reposition: if seq == from_seq {
                    reposition
                } else {
                    Leg::default()
                },
            });
        }
        let last = self.visits.last().expect("trip has stops");
        self.available_at = last.departure;
        self.final_stop = schedule
            .stop_idx(&times[times.len() - 1].stop_id)
            .expect("validated stop");
    }
}

fn stop_of(schedule: &Schedule, trip: usize, seq: usize) -> usize {
    let id = &schedule.trips()[trip].stop_times[seq].stop_id;
    schedule.stop_idx(id).expect("validated stop")
}

/// Drive to stop `seq` of the reporting trip and run the rest of it.
pub fn cover_overage(
    bus: &SubstituteBus,
    schedule: &Schedule,
    trip: usize,
    seq: usize,
    now: f64,
) -> ServicePlan {
    let target = stop_of(schedule, trip, seq);
    let mut plan = ServicePlan::new(schedule, bus.location, target, now);
    if seq + 1 < schedule.trips()[trip].stop_times.len() {
        let at = plan.arrive_at;
        plan.push_trip(schedule, trip, seq, at, Leg::default());
    }
    plan
}

/// Drive to where the bus broke down, finish its trip, then run every later
/// trip of its block.
pub fn cover_disruption(
    bus: &SubstituteBus,
    schedule: &Schedule,
    trip: usize,
    seq: usize,
    later_trips: &[usize],
    now: f64,
) -> ServicePlan {
    let target = stop_of(schedule, trip, seq);
    let mut plan = ServicePlan::new(schedule, bus.location, target, now);
    if seq + 1 < schedule.trips()[trip].stop_times.len() {
        let at = plan.arrive_at;
        plan.push_trip(schedule, trip, seq, at, Leg::default());
    }
    for &next in later_trips {
        let first = stop_of(schedule, next, 0);
        let reposition = schedule.leg(plan.final_stop, first);
        let earliest = plan.available_at + reposition.minutes * 60.0;
        plan.push_trip(schedule, next, 0, earliest, reposition);
    }
    plan
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Direction, NetworkConfig, RouteDirection, Stop, StopTime, Trip};
    use crate::rng;
    use chrono::NaiveDate;

    fn stop(id: &str, lat: f64, lon: f64) -> Stop {
        Stop {
            stop_id: id.into(),
            name: id.into(),
            lat,
            lon,
        }
    }

    fn trip(id: &str, vehicle: &str, stops: &[(&str, u32)]) -> Trip {
        Trip {
            trip_id: id.into(),
            route_direction: RouteDirection::new("R1", Direction::Outbound),
            stop_times: stops
                .iter()
                .map(|&(s, t)| StopTime {
                    stop_id: s.into(),
                    arrival_s: t,
                    departure_s: t,
                })
                .collect(),
            service_date: NaiveDate::from_ymd_opt(2024, 3, 4).unwrap(),
            vehicle_id: vehicle.into(),
            block_id: format!("B-{vehicle}"),
        }
    }

    /// Depot at the origin, stops A and B on opposite sides, C further out.
    fn schedule() -> Schedule {
        Schedule::new(
            vec![
                stop("D", 36.0, -86.0),
                stop("A", 36.0, -85.99),
                stop("B", 36.0, -86.01),
                stop("C", 36.0, -85.95),
            ],
            vec![RouteDirection::new("R1", Direction::Outbound)],
            vec![
                trip("T1", "V1", &[("A", 25_000), ("C", 25_600), ("B", 26_200)]),
                trip("T2", "V1", &[("B", 27_000), ("A", 27_600)]),
            ],
            NetworkConfig {
                depot: "D".into(),
                hub: "A".into(),
                candidate_stops: vec!["A".into(), "B".into(), "C".into()],
                detour_factor: 1.3,
                speed_mph: 20.0,
                bus_capacity: 40,
                agency_plan: None,
            },
        )
        .unwrap()
    }

    fn stationed(id: &str, at: usize) -> SubstituteBus {
        let mut b = SubstituteBus::new(id, at, 0);
        b.transition(BusState::TravelingToStation);
        b.transition(BusState::Stationed);
        b.location = at;
        b
    }

    #[test]
    fn overage_below_threshold_is_ignored() {
        let s = schedule();
        let fleet = vec![stationed("S0", 1)];
        let mut r = rng::seeded(0);
        let p = PolicyConfig::default();
        let ask = |n| DispatchRequest::Overage {
            stop: 3,
            left_behind: n,
        };
        assert_eq!(
            dispatch_decision(&ask(1), &fleet, &s, &p, 0.0, &mut r),
            None
        );
        // Threshold is 2 riders at capacity 40; it has to be exceeded.
        assert_eq!(
            dispatch_decision(&ask(2), &fleet, &s, &p, 0.0, &mut r),
            None
        );
        assert_eq!(
            dispatch_decision(&ask(3), &fleet, &s, &p, 0.0, &mut r),
            Some(0)
        );
    }

    #[test]
    fn empty_or_busy_fleet_yields_none() {
        let s = schedule();
        let p = PolicyConfig::default();
        let mut r = rng::seeded(0);
        let req = DispatchRequest::Disruption { stop: 1 };
        assert_eq!(dispatch_decision(&req, &[], &s, &p, 0.0, &mut r), None);
        let mut busy = stationed("S0", 1);
        busy.transition(BusState::Dispatched);
        assert_eq!(
            dispatch_decision(&req, &[busy.clone()], &s, &p, 0.0, &mut r),
            None
        );
        busy.transition(BusState::Covering);
        busy.transition(BusState::Idle);
        busy.available_from = 100.0;
        assert_eq!(
            dispatch_decision(&req, &[busy.clone()], &s, &p, 99.0, &mut r),
            None
        );
        assert_eq!(
            dispatch_decision(&req, &[busy], &s, &p, 100.0, &mut r),
            Some(0)
        );
    }

    #[test]
    fn nearest_bus_wins() {
        let s = schedule();
        let p = PolicyConfig::default();
        let mut r = rng::seeded(0);
        let fleet = vec![stationed("S0", 2), stationed("S1", 1)];
        let req = DispatchRequest::Disruption { stop: 3 };
        assert_eq!(
            dispatch_decision(&req, &fleet, &s, &p, 0.0, &mut r),
            Some(1)
        );
    }

    #[test]
    fn equidistant_tie_is_a_fair_coin() {
        // A and B sit symmetrically around the depot.
        let s = schedule();
        let p = PolicyConfig::default();
        let fleet = vec![stationed("S0", 1), stationed("S1", 2)];
        let ab = (s.leg(1, 0).minutes - s.leg(2, 0).minutes).abs();
        assert!(ab < 1e-9, "{ab}");
        let req = DispatchRequest::Disruption { stop: 0 };
        let mut r = rng::seeded(42);
        let trials = 10_000;
        let first = (0..trials)
            .filter(|_| dispatch_decision(&req, &fleet, &s, &p, 0.0, &mut r) == Some(0))
            .count();
        let freq = first as f64 / trials as f64;
        assert!((freq - 0.5).abs() <= 0.02, "{freq}");
    }

    #[test]
    fn transitions() {
        use BusState::*;
        assert!(!Covering.can_transition_to(Stationed));
        assert!(AtDepot.can_transition_to(TravelingToStation));
        assert!(!AtDepot.can_transition_to(Dispatched));
        assert!(Idle.can_transition_to(Dispatched));
    }

    #[test]
    #[should_panic(expected = "illegal transition")]
    fn covering_cannot_return_to_station() {
        let mut b = stationed("S0", 1);
        b.transition(BusState::Dispatched);
        b.transition(BusState::Covering);
        b.transition(BusState::Stationed);
    }

    #[test]
    fn overage_plan_at_final_stop_is_empty() {
        let s = schedule();
        let bus = stationed("S0", 1);
        let plan = cover_overage(&bus, &s, 0, 2, 26_200.0);
        assert!(plan.visits.is_empty());
        assert_eq!(plan.target_stop, 2);
        assert_eq!(plan.available_at, plan.arrive_at);
        assert_eq!(plan.approach, s.leg(1, 2));
    }

    #[test]
    fn overage_plan_runs_rest_of_trip_late() {
        let s = schedule();
        let bus = stationed("S0", 0);
        let plan = cover_overage(&bus, &s, 0, 1, 25_600.0);
        let delay = plan.arrive_at - 25_600.0;
        assert_eq!(plan.visits.len(), 2);
        assert_eq!(plan.visits[0].arrival, plan.arrive_at);
        assert!((plan.visits[1].arrival - (26_200.0 + delay)).abs() < 1e-9);
        assert_eq!(plan.final_stop, 2);
        assert!(plan.visits.iter().all(|v| v.reposition == Leg::default()));
    }

    #[test]
    fn disruption_plan_spans_later_trips() {
        let s = schedule();
        let bus = stationed("S0", 0);
        let plan = cover_disruption(&bus, &s, 0, 2, &[1], 26_200.0);
        // Trip 1 ends at B where trip 2 starts, so no reposition is needed.
        assert_eq!(plan.visits.len(), 2);
        assert_eq!(plan.visits[0].trip, 1);
        assert_eq!(plan.visits[0].reposition, Leg::default());
        assert_eq!(plan.final_stop, 1);
        let earliest = plan.arrive_at;
        assert_eq!(plan.visits[0].arrival, earliest.max(27_000.0));

        let plan = cover_disruption(&bus, &s, 0, 0, &[1], 25_000.0);
        assert_eq!(plan.visits.len(), 5);
        assert_eq!(plan.available_at, plan.visits[4].departure);
    }
}

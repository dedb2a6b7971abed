use std::collections::{BTreeMap, HashMap, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::event::{EventQueue, Payload};
use super::fleet::{cover_disruption, cover_overage, dispatch_decision, ServicePlan};
use super::{
    BusState, Chain, CostBreakdown, DispatchRequest, EventKind, PolicyConfig, Result,
    SubstituteBus, TraceRecord, Visit,
};
use crate::network::{Leg, Schedule};
use crate::rng::{substream, SimRng};
use crate::stationing::StationingPlan;

const ARRIVAL_STREAM: u64 = 0;
const DISPATCH_STREAM: u64 = 1;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimStats {
    /// Riders who showed up at a stop (unloaded riders are not counted twice).
    pub arrivals: u64,
    pub served: u64,
    pub left_behind: u64,
    pub onboard_at_end: u64,
    pub disruptions: u64,
    pub disruption_dispatches: u64,
    pub overages: u64,
    pub overage_dispatches: u64,
}

/// Rider flow through one bus.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BusFlow {
    pub bus_id: String,
    pub boarded: u64,
    pub alighted: u64,
    /// Riders put off the bus when it broke down.
    pub unloaded: u64,
    pub onboard_at_end: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub cost: CostBreakdown,
    pub stats: SimStats,
    pub flows: Vec<BusFlow>,
    pub fleet: Vec<SubstituteBus>,
    pub trace: Vec<TraceRecord>,
}

#[derive(Debug, Clone, Copy)]
struct Group {
    origin: usize,
    dest: usize,
    key: u32,
    size: u32,
    arrival: f64,
    deadline: f64,
}

#[derive(Debug, Clone)]
struct RegularBus {
    vehicle_id: String,
    trips: Vec<usize>,
    visits: Vec<Visit>,
}

/// A chain resolved against a schedule, ready to be replayed under any
/// number of stationing plans. Passenger arrival times are drawn once here,
/// so every plan faces exactly the same riders.
#[derive(Debug, Clone)]
pub struct PreparedDay<'a> {
    schedule: &'a Schedule,
    policy: PolicyConfig,
    seed: u64,
    groups: Vec<Group>,
    buses: Vec<RegularBus>,
    /// Failing stop sequence per trip index.
    disruptions: HashMap<usize, usize>,
    /// Eligibility key (block, route, direction) per trip index.
    trip_key: Vec<u32>,
    trip_stops: Vec<Vec<usize>>,
    /// Regular bus running each trip, and the trip's position in its block.
    trip_bus: HashMap<usize, (usize, usize)>,
    depot: usize,
}

impl<'a> PreparedDay<'a> {
    pub fn new(
        schedule: &'a Schedule,
        chain: &Chain,
        policy: &PolicyConfig,
        seed: u64,
    ) -> Result<Self> {
        policy.validate()?;
        let flows = chain.flows(schedule)?;

        let trip_stops: Vec<Vec<usize>> = schedule
            .trips()
            .iter()
            .map(|t| {
                t.stop_times
                    .iter()
                    .map(|st| schedule.stop_idx(&st.stop_id).expect("validated stop"))
                    .collect()
            })
            .collect();
        let mut keys: HashMap<(&str, &str, _), u32> = HashMap::new();
        let trip_key: Vec<u32> = schedule
            .trips()
            .iter()
            .map(|t| {
                let n = keys.len() as u32;
                *keys
                    .entry((
                        t.block_id.as_str(),
                        t.route_direction.route_id.as_str(),
                        t.route_direction.direction,
                    ))
                    .or_insert(n)
            })
            .collect();

        let mut buses = Vec::new();
        let mut trip_bus = HashMap::new();
        for (vehicle, trips) in schedule.vehicle_blocks() {
            let trips: Vec<usize> = trips
                .into_iter()
                .filter(|&i| policy.includes_trip(schedule.trips()[i].start_s()))
                .collect();
            if trips.is_empty() {
                continue;
            }
            let mut visits = Vec::new();
            for (pos, &ti) in trips.iter().enumerate() {
                trip_bus.insert(ti, (buses.len(), pos));
                for (seq, st) in schedule.trips()[ti].stop_times.iter().enumerate() {
                    visits.push(Visit {
                        trip: ti,
                        seq,
                        arrival: st.arrival_s as f64,
                        departure: st.departure_s as f64,
                        reposition: Leg::default(),
                    });
                }
            }
            buses.push(RegularBus {
                vehicle_id: vehicle.to_string(),
                trips,
                visits,
            });
        }

        // Riders leave in boarding order: whoever got on first gets off at
        // the first alighting stop.
        let mut rng = substream(seed, ARRIVAL_STREAM);
        let mut groups = Vec::new();
        for (&ti, row) in &flows {
            if !trip_bus.contains_key(&ti) {
                continue;
            }
            let trip = &schedule.trips()[ti];
            let mut onboard: VecDeque<(usize, u32)> = VecDeque::new();
            let mut od: BTreeMap<(usize, usize), u32> = BTreeMap::new();
            for (seq, &(board, alight)) in row.iter().enumerate() {
                let mut left = alight;
                while left > 0 {
                    let front = onboard.front_mut().expect("flows are conserved");
                    let n = front.1.min(left);
                    *od.entry((front.0, seq)).or_default() += n;
                    front.1 -= n;
                    left -= n;
                    if front.1 == 0 {
                        onboard.pop_front();
                    }
                }
                if board > 0 {
                    onboard.push_back((seq, board));
                }
            }
            for ((from, to), size) in od {
                let scheduled = trip.stop_times[from].arrival_s as f64;
                let u: f64 = rng.random();
                let arrival = scheduled - policy.arrival_window_s * u;
                groups.push(Group {
                    origin: trip_stops[ti][from],
                    dest: trip_stops[ti][to],
                    key: trip_key[ti],
                    size,
                    arrival,
                    deadline: arrival + policy.patience_s,
                });
            }
        }

        let mut disruptions = HashMap::new();
        for (trip_id, &seq) in &chain.disruptions {
            let ti = schedule.trip_idx(trip_id).expect("validated trip");
            if trip_bus.contains_key(&ti) {
                disruptions.insert(ti, seq);
            }
        }

        let depot = schedule
            .stop_idx(schedule.depot())
            .expect("validated depot");
        Ok(Self {
            schedule,
            policy: policy.clone(),
            seed,
            groups,
            buses,
            disruptions,
            trip_key,
            trip_stops,
            trip_bus,
            depot,
        })
    }

    pub fn schedule(&self) -> &Schedule {
        self.schedule
    }

    /// Replays the day under `plan`.
    pub fn run(&self, plan: &StationingPlan, trace: bool) -> Result<SimOutcome> {
        plan.validate(self.schedule)?;
        let stations = plan
            .assignments
            .iter()
            .map(|s| self.schedule.stop_idx(s).expect("validated plan"))
            .collect::<Vec<_>>();
        Ok(Run::new(self, &stations, trace).execute())
    }
}

/// Simulates one day and returns its cost and event trace.
pub fn simulate_day(
    schedule: &Schedule,
    chain: &Chain,
    plan: &StationingPlan,
    policy: &PolicyConfig,
    seed: u64,
) -> Result<SimOutcome> {
    PreparedDay::new(schedule, chain, policy, seed)?.run(plan, true)
}

/// [`simulate_day`] without building the trace.
pub fn simulate_day_untraced(
    schedule: &Schedule,
    chain: &Chain,
    plan: &StationingPlan,
    policy: &PolicyConfig,
    seed: u64,
) -> Result<SimOutcome> {
    PreparedDay::new(schedule, chain, policy, seed)?.run(plan, false)
}

#[derive(Debug, Clone, Copy)]
struct Rider {
    dest: usize,
    key: u32,
    size: u32,
}

#[derive(Debug, Default)]
struct Runner {
    visits: Vec<Visit>,
    onboard: Vec<Rider>,
    load: u32,
    flow: BusFlow,
}

struct Run<'p, 'a> {
    day: &'p PreparedDay<'a>,
    schedule: &'a Schedule,
    queue: EventQueue,
    groups: Vec<Group>,
    remaining: Vec<u32>,
    waiting: Vec<Vec<usize>>,
    /// Regular buses first, then substitutes.
    runners: Vec<Runner>,
    fleet: Vec<SubstituteBus>,
    /// Trips already helped by an overage dispatch.
    covered: Vec<bool>,
    left_behind: Vec<u64>,
    stats: SimStats,
    rng: SimRng,
    trace: Option<Vec<TraceRecord>>,
    capacity: u32,
}

impl<'p, 'a> Run<'p, 'a> {
    fn new(day: &'p PreparedDay<'a>, stations: &[usize], trace: bool) -> Self {
        let schedule = day.schedule;
        let mut runners: Vec<Runner> = day
            .buses
            .iter()
            .map(|b| Runner {
                visits: b.visits.clone(),
                flow: BusFlow {
                    bus_id: b.vehicle_id.clone(),
                    ..Default::default()
                },
                ..Default::default()
            })
            .collect();
        let fleet: Vec<SubstituteBus> = stations
            .iter()
            .enumerate()
            .map(|(i, &s)| SubstituteBus::new(format!("SUB-{i}"), s, day.depot))
            .collect();
        for bus in &fleet {
            runners.push(Runner {
                flow: BusFlow {
                    bus_id: bus.bus_id.clone(),
                    ..Default::default()
                },
                ..Default::default()
            });
        }
        Self {
            day,
            schedule,
            queue: EventQueue::new(),
            remaining: day.groups.iter().map(|g| g.size).collect(),
            groups: day.groups.clone(),
            waiting: vec![Vec::new(); schedule.stops().len()],
            runners,
            fleet,
            covered: vec![false; schedule.trips().len()],
            left_behind: vec![0; schedule.stops().len()],
            stats: SimStats::default(),
            rng: substream(day.seed, DISPATCH_STREAM),
            trace: trace.then(Vec::new),
            capacity: schedule.bus_capacity(),
        }
    }

    fn record(
        &mut self,
        t: f64,
        kind: EventKind,
        entity: &str,
        stop: Option<usize>,
        detail: impl FnOnce() -> String,
    ) {
        if let Some(trace) = self.trace.as_mut() {
            trace.push(TraceRecord {
                t,
                kind,
                entity: entity.to_string(),
                stop: stop.map(|s| self.schedule.stops()[s].stop_id.clone()),
                detail: detail(),
            });
        }
    }

    fn bus_name(&self, bus: usize) -> String {
        self.runners[bus].flow.bus_id.clone()
    }

    fn execute(mut self) -> SimOutcome {
        let start = self
            .groups
            .iter()
            .map(|g| g.arrival)
            .chain(
                self.runners
                    .iter()
                    .filter_map(|r| r.visits.first().map(|v| v.arrival)),
            )
            .fold(self.day.policy.horizon[0] as f64, f64::min);

        for (i, g) in self.groups.iter().enumerate() {
            self.queue
                .push(g.arrival, Payload::PassengerArrival { group: i });
        }
        for (i, r) in self.runners.iter().enumerate() {
            if let Some(v) = r.visits.first() {
                self.queue
                    .push(v.arrival, Payload::BusArrivalAtStop { bus: i, visit: 0 });
            }
        }
        for i in 0..self.fleet.len() {
            let bus = &mut self.fleet[i];
            let leg = self.schedule.leg(bus.location, bus.station);
            bus.transition(BusState::TravelingToStation);
            bus.drive(bus.station, leg);
            self.queue.push(
                start + leg.minutes * 60.0,
                Payload::SubstituteArrived { sub: i },
            );
        }

        let mut now = start;
        loop {
            let Some(event) = self.queue.pop() else {
                // Nothing left to happen: close the day.
                self.queue.push(now, Payload::DayEnd);
                continue;
            };
            now = event.t;
            match event.payload {
                Payload::PassengerArrival { group } => self.passenger_arrival(now, group),
                Payload::BusArrivalAtStop { bus, visit } => self.bus_arrival(now, bus, visit),
                Payload::DisruptionOccurred { bus, trip, seq } => {
                    self.disruption(now, bus, trip, seq)
                }
                Payload::OverageDetected {
                    bus,
                    trip,
                    seq,
                    stranded,
                } => self.overage(now, bus, trip, seq, stranded),
                Payload::SubstituteArrived { sub } => self.substitute_arrived(now, sub),
                Payload::DayEnd => return self.day_end(now),
            }
        }
    }

    fn passenger_arrival(&mut self, t: f64, group: usize) {
        let g = self.groups[group];
        let schedule = self.schedule;
        self.stats.arrivals += g.size as u64;
        self.waiting[g.origin].push(group);
        self.record(
            t,
            EventKind::PassengerArrival,
            &format!("G{group}"),
            Some(g.origin),
            || format!("size={} dest={}", g.size, schedule.stops()[g.dest].stop_id),
        );
    }

    fn is_downstream(&self, trip: usize, seq: usize, dest: usize) -> bool {
        self.day.trip_stops[trip][seq + 1..].contains(&dest)
    }

    fn bus_arrival(&mut self, t: f64, bus: usize, visit: usize) {
        let v = self.runners[bus].visits[visit];
        let stop = self.day.trip_stops[v.trip][v.seq];
        let key = self.day.trip_key[v.trip];
        let substitute = bus.checked_sub(self.day.buses.len());

        if let Some(sub) = substitute {
            if v.reposition.miles > 0.0 {
                self.fleet[sub].drive(stop, v.reposition);
            }
            self.fleet[sub].location = stop;
        }

        let runner = &mut self.runners[bus];
        let mut alighted = 0;
        runner.onboard.retain(|r| {
            if r.dest == stop {
                alighted += r.size;
                false
            } else {
                true
            }
        });
        runner.load -= alighted;
        runner.flow.alighted += alighted as u64;
        self.stats.served += alighted as u64;

        let mut boarded = 0;
        let mut stranded = 0;
        let mut queue = std::mem::take(&mut self.waiting[stop]);
        for &gid in &queue {
            let g = self.groups[gid];
            if g.deadline < t {
                self.left_behind[stop] += self.remaining[gid] as u64;
                self.remaining[gid] = 0;
                continue;
            }
            if g.key != key || !self.is_downstream(v.trip, v.seq, g.dest) {
                continue;
            }
            let runner = &mut self.runners[bus];
            let take = self.remaining[gid].min(self.capacity - runner.load);
            if take > 0 {
                runner.onboard.push(Rider {
                    dest: g.dest,
                    key: g.key,
                    size: take,
                });
                runner.load += take;
                runner.flow.boarded += take as u64;
                self.remaining[gid] -= take;
                boarded += take;
            }
            stranded += self.remaining[gid];
        }
        queue.retain(|&gid| self.remaining[gid] > 0);
        self.waiting[stop] = queue;

        let load = self.runners[bus].load;
        let name = self.bus_name(bus);
        let schedule = self.schedule;
        let trip_id = &schedule.trips()[v.trip].trip_id;
        self.record(t, EventKind::BusArrivalAtStop, &name, Some(stop), || {
            format!(
                "trip={trip_id} seq={} alighted={alighted} boarded={boarded} load={load} stranded={stranded}",
                v.seq
            )
        });

        if substitute.is_none() && self.day.disruptions.get(&v.trip) == Some(&v.seq) {
            self.queue.push(
                v.departure,
                Payload::DisruptionOccurred {
                    bus,
                    trip: v.trip,
                    seq: v.seq,
                },
            );
            return;
        }
        if stranded > 0 && !self.covered[v.trip] {
            self.queue.push(
                v.departure,
                Payload::OverageDetected {
                    bus,
                    trip: v.trip,
                    seq: v.seq,
                    stranded,
                },
            );
        }
        if visit + 1 < self.runners[bus].visits.len() {
            let next = self.runners[bus].visits[visit + 1].arrival;
            self.queue.push(
                next,
                Payload::BusArrivalAtStop {
                    bus,
                    visit: visit + 1,
                },
            );
        } else if let Some(sub) = substitute {
            let s = &mut self.fleet[sub];
            s.transition(BusState::Idle);
            s.available_from = v.departure;
        }
    }

    fn disruption(&mut self, t: f64, bus: usize, trip: usize, seq: usize) {
        let stop = self.day.trip_stops[trip][seq];
        self.stats.disruptions += 1;
        let riders = std::mem::take(&mut self.runners[bus].onboard);
        let mut unloaded = 0;
        for r in riders {
            self.groups.push(Group {
                origin: stop,
                dest: r.dest,
                key: r.key,
                size: r.size,
                arrival: t,
                deadline: t + self.day.policy.patience_s,
            });
            self.remaining.push(r.size);
            self.waiting[stop].push(self.groups.len() - 1);
            unloaded += r.size;
        }
        let runner = &mut self.runners[bus];
        runner.load = 0;
        runner.flow.unloaded += unloaded as u64;

        let (_, pos) = self.day.trip_bus[&trip];
        let later = &self.day.buses[bus].trips[pos + 1..];
        let request = DispatchRequest::Disruption { stop };
        let chosen = dispatch_decision(
            &request,
            &self.fleet,
            self.schedule,
            &self.day.policy,
            t,
            &mut self.rng,
        );
        let name = self.bus_name(bus);
        let trip_id = self.schedule.trips()[trip].trip_id.clone();
        let detail = match chosen {
            Some(i) => {
                let plan = cover_disruption(&self.fleet[i], self.schedule, trip, seq, later, t);
                self.stats.disruption_dispatches += 1;
                let d = format!(
                    "trip={trip_id} seq={seq} unloaded={unloaded} dispatched={} later_trips={}",
                    self.fleet[i].bus_id,
                    later.len()
                );
                self.start_plan(i, plan);
                d
            }
            None => format!("trip={trip_id} seq={seq} unloaded={unloaded} dispatched=none"),
        };
        self.record(t, EventKind::DisruptionOccurred, &name, Some(stop), || {
            detail
        });
    }

    fn overage(&mut self, t: f64, bus: usize, trip: usize, seq: usize, stranded: u32) {
        let stop = self.day.trip_stops[trip][seq];
        self.stats.overages += 1;
        let name = self.bus_name(bus);
        let trip_id = self.schedule.trips()[trip].trip_id.clone();
        let chosen = if self.covered[trip] {
            None
        } else {
            let request = DispatchRequest::Overage {
                stop,
                left_behind: stranded,
            };
            dispatch_decision(
                &request,
                &self.fleet,
                self.schedule,
                &self.day.policy,
                t,
                &mut self.rng,
            )
        };
        let detail = match chosen {
            Some(i) => {
                self.covered[trip] = true;
                self.stats.overage_dispatches += 1;
                let plan = cover_overage(&self.fleet[i], self.schedule, trip, seq, t);
                let d = format!(
                    "trip={trip_id} seq={seq} stranded={stranded} dispatched={}",
                    self.fleet[i].bus_id
                );
                self.start_plan(i, plan);
                d
            }
            None => format!("trip={trip_id} seq={seq} stranded={stranded} dispatched=none"),
        };
        self.record(t, EventKind::OverageDetected, &name, Some(stop), || detail);
    }

    fn start_plan(&mut self, sub: usize, plan: ServicePlan) {
        let bus = &mut self.fleet[sub];
        bus.transition(BusState::Dispatched);
        bus.drive(plan.target_stop, plan.approach);
        bus.available_from = plan.available_at;
        let runner = &mut self.runners[self.day.buses.len() + sub];
        runner.visits = plan.visits;
        self.queue
            .push(plan.arrive_at, Payload::SubstituteArrived { sub });
    }

    fn substitute_arrived(&mut self, t: f64, sub: usize) {
        let bus_index = self.day.buses.len() + sub;
        let state = self.fleet[sub].state;
        match state {
            BusState::TravelingToStation => self.fleet[sub].transition(BusState::Stationed),
            BusState::Dispatched => {
                self.fleet[sub].transition(BusState::Covering);
                match self.runners[bus_index].visits.first() {
                    Some(v) => self.queue.push(
                        v.arrival,
                        Payload::BusArrivalAtStop {
                            bus: bus_index,
                            visit: 0,
                        },
                    ),
                    None => {
                        self.fleet[sub].transition(BusState::Idle);
                        self.fleet[sub].available_from = t;
                    }
                }
            }
            other => unreachable!("substitute arrived while {other:?}"),
        }
        let bus = &self.fleet[sub];
        let name = bus.bus_id.clone();
        let (miles, minutes) = (bus.deadhead_miles, bus.deadhead_minutes);
        let location = bus.location;
        self.record(
            t,
            EventKind::SubstituteArrived,
            &name,
            Some(location),
            || format!("state={state:?} deadhead_miles={miles} deadhead_minutes={minutes}"),
        );
    }

    fn day_end(mut self, t: f64) -> SimOutcome {
        for i in 0..self.fleet.len() {
            let depot = self.day.depot;
            let bus = &mut self.fleet[i];
            let leg = self.schedule.leg(bus.location, depot);
            bus.transition(BusState::ReturningToDepot);
            bus.drive(depot, leg);
        }
        for stop in 0..self.waiting.len() {
            for &gid in &self.waiting[stop] {
                self.left_behind[stop] += self.remaining[gid] as u64;
            }
        }
        let mut cost = CostBreakdown::default();
        for bus in &self.fleet {
            cost.deadhead_miles += bus.deadhead_miles;
            cost.deadhead_minutes += bus.deadhead_minutes;
        }
        for (stop, &n) in self.left_behind.iter().enumerate() {
            if n > 0 {
                cost.left_behind_per_stop
                    .insert(self.schedule.stops()[stop].stop_id.clone(), n);
            }
        }
        self.stats.left_behind = cost.left_behind();
        for r in &mut self.runners {
            r.flow.onboard_at_end = r.load as u64;
        }
        self.stats.onboard_at_end = self.runners.iter().map(|r| r.load as u64).sum();
        let (miles, minutes, lb) = (
            cost.deadhead_miles,
            cost.deadhead_minutes,
            cost.left_behind(),
        );
        self.record(t, EventKind::DayEnd, "day", None, || {
            format!("deadhead_miles={miles} deadhead_minutes={minutes} left_behind={lb}")
        });
        SimOutcome {
            cost,
            stats: self.stats,
            flows: self.runners.into_iter().map(|r| r.flow).collect(),
            fleet: self.fleet,
            trace: self.trace.unwrap_or_default(),
        }
    }
}

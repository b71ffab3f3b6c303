//! Queue-based microscopic simulator.
//!
//! Vehicles move at the tier speed of their street's occupancy at the start
//! of each tick. A vehicle at the end of a street moves on only if the next
//! street is below capacity; otherwise it waits there, at speed zero, in
//! FIFO order. Departures wait until the origin street has room.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::controller::{run, ControlError, ControllerConfig, Demand, RunOutput, Trace};
use crate::net_model::{Network, StreetId};
use crate::preprocessor::{enumerate_acyclic_paths, PreprocessError, VehicleId};
use crate::scheduler::{Schedule, SchedulingInstance};

const EPS: f64 = 1e-6;

/// A vehicle to simulate. Times are in seconds.
#[derive(Clone, Debug, PartialEq)]
pub struct SimRequest {
    pub id: VehicleId,
    /// When the trip was requested; delays are measured from here.
    pub request: u32,
    /// Earliest time the vehicle may enter its origin street.
    pub release: u32,
    pub route: Vec<StreetId>,
}

impl SimRequest {
    /// Requests that follow a solved schedule: each vehicle's chosen route,
    /// released when it enters its origin street.
    pub fn from_schedule(instance: &SchedulingInstance, schedule: &Schedule) -> Vec<SimRequest> {
        let step = instance.network.step_seconds();
        instance
            .controlled
            .iter()
            .chain(&instance.simulated)
            .filter_map(|v| {
                let route = v.routes.iter().find(|r| Some(&r.id) == schedule.routes.get(&v.id))?;
                let first = schedule.stays_of(v.id).map(|s| s.enter).min().unwrap_or(v.depart);
                Some(SimRequest {
                    id: v.id,
                    request: v.depart * step,
                    release: first * step,
                    route: route.streets.clone(),
                })
            })
            .collect()
    }

    /// Requests that follow the routes and departure steps of a trace.
    pub fn from_trace(trace: &Trace, network: &Network) -> Vec<SimRequest> {
        let step = network.step_seconds();
        trace
            .vehicles
            .iter()
            .map(|c| SimRequest {
                id: c.vehicle,
                request: c.request * step,
                release: c.depart * step,
                route: c.route.streets.clone(),
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum EventKind {
    Request,
    Enter(StreetId),
    /// Reached the end of the street.
    Reach(StreetId),
    Exit(StreetId),
    Reject,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Event {
    pub time: u32,
    pub vehicle: VehicleId,
    pub kind: EventKind,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (word, street) = match self.kind {
            EventKind::Request => ("request", None),
            EventKind::Enter(s) => ("enter", Some(s)),
            EventKind::Reach(s) => ("reach", Some(s)),
            EventKind::Exit(s) => ("exit", Some(s)),
            EventKind::Reject => ("reject", None),
        };
        write!(f, "{} {} {}", self.time, word, self.vehicle.0)?;
        if let Some(s) = street {
            write!(f, " {}", s.0)?;
        }
        Ok(())
    }
}

/// Chronological record of one simulation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EventLog {
    pub tick_seconds: u32,
    pub events: Vec<Event>,
    /// Route length in meters per vehicle, rejected ones excluded.
    pub route_length: BTreeMap<VehicleId, f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    Waiting,
    Moving,
    Queued,
    Finished,
}

struct SimVehicle {
    req: SimRequest,
    leg: usize,
    progress: f64,
    phase: Phase,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig {
    pub tick_seconds: u32,
    /// Give up after this many seconds; unfinished vehicles stay unfinished.
    pub max_seconds: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { tick_seconds: 1, max_seconds: 86_400 }
    }
}

fn route_ok(network: &Network, route: &[StreetId]) -> bool {
    !route.is_empty()
        && route.iter().all(|s| s.index() < network.street_count())
        && route.windows(2).all(|w| network.has_link(w[0], w[1]))
}

/// Runs every request to completion (or until `max_seconds`).
pub fn simulate(requests: &[SimRequest], network: &Network, config: &SimConfig) -> EventLog {
    let dt = config.tick_seconds.max(1);
    let mut log = EventLog { tick_seconds: dt, ..Default::default() };
    let mut vehicles: Vec<SimVehicle> = Vec::new();
    let mut sorted: Vec<&SimRequest> = requests.iter().collect();
    sorted.sort_by_key(|r| (r.release, r.id));
    for r in sorted {
        log.events.push(Event { time: r.request, vehicle: r.id, kind: EventKind::Request });
        if !route_ok(network, &r.route) {
            log.events.push(Event { time: r.request, vehicle: r.id, kind: EventKind::Reject });
            continue;
        }
        log.route_length.insert(r.id, network.path_length(&r.route));
        vehicles.push(SimVehicle { req: r.clone(), leg: 0, progress: 0.0, phase: Phase::Waiting });
    }
    let mut on_street: Vec<VecDeque<usize>> = vec![VecDeque::new(); network.street_count()];
    let mut waiting: VecDeque<usize> = (0..vehicles.len()).collect();
    let mut left = vehicles.len();
    let mut t = 0u32;
    loop {
        if t > 0 {
            // advance at the speed given by occupancy at tick start
            for (s, queue) in on_street.iter().enumerate() {
                let street = network.street(StreetId(s as u32));
                let speed = street.tier(queue.len() as u32).meters_per_second();
                for &v in queue {
                    let sv = &mut vehicles[v];
                    if sv.phase == Phase::Moving {
                        sv.progress = (sv.progress + speed * f64::from(dt)).min(street.length_m);
                        if sv.progress >= street.length_m - EPS {
                            sv.progress = street.length_m;
                            sv.phase = Phase::Queued;
                            log.events.push(Event { time: t, vehicle: sv.req.id, kind: EventKind::Reach(StreetId(s as u32)) });
                        }
                    }
                }
            }
        }
        // hand-overs, repeated until nothing moves
        loop {
            let mut moved = false;
            for s in 0..on_street.len() {
                while let Some(&v) = on_street[s].front() {
                    if vehicles[v].phase != Phase::Queued {
                        break;
                    }
                    let sid = StreetId(s as u32);
                    let next = vehicles[v].req.route.get(vehicles[v].leg + 1).copied();
                    if let Some(n) = next {
                        if on_street[n.index()].len() as u32 >= network.street(n).capacity {
                            break;
                        }
                        on_street[s].pop_front();
                        on_street[n.index()].push_back(v);
                        let sv = &mut vehicles[v];
                        sv.leg += 1;
                        sv.progress = 0.0;
                        sv.phase = Phase::Moving;
                        log.events.push(Event { time: t, vehicle: sv.req.id, kind: EventKind::Exit(sid) });
                        log.events.push(Event { time: t, vehicle: sv.req.id, kind: EventKind::Enter(n) });
                    } else {
                        on_street[s].pop_front();
                        vehicles[v].phase = Phase::Finished;
                        left -= 1;
                        log.events.push(Event { time: t, vehicle: vehicles[v].req.id, kind: EventKind::Exit(sid) });
                    }
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
        // departures in release order, skipping over blocked origins
        let mut still = VecDeque::new();
        while let Some(v) = waiting.pop_front() {
            let sv = &mut vehicles[v];
            if sv.req.release > t {
                still.push_back(v);
                still.extend(waiting.drain(..));
                break;
            }
            let origin = sv.req.route[0];
            if (on_street[origin.index()].len() as u32) < network.street(origin).capacity {
                on_street[origin.index()].push_back(v);
                sv.phase = Phase::Moving;
                log.events.push(Event { time: t, vehicle: sv.req.id, kind: EventKind::Enter(origin) });
            } else {
                still.push_back(v);
            }
        }
        waiting = still;
        if left == 0 || t >= config.max_seconds {
            break;
        }
        t += dt;
    }
    log.events.sort_by_key(|e| e.time);
    log
}

/// Aggregates of a finished simulation. Times in seconds, lengths in meters.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MetricsReport {
    pub vehicles: usize,
    /// Time the last vehicle left the network.
    pub total_duration: f64,
    pub avg_route_length: f64,
    pub avg_speed: f64,
    pub avg_duration: f64,
    /// Time spent stopped at a street end inside the network.
    pub avg_waiting_time: f64,
    pub avg_depart_delay: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("vehicles did not finish: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", "))]
    Unfinished(Vec<VehicleId>),
}

#[derive(Default)]
struct Tally {
    request: Option<u32>,
    first_enter: Option<u32>,
    reach: Option<u32>,
    waiting: u32,
    streets_left: usize,
    finish: Option<u32>,
    rejected: bool,
}

/// Table-style aggregates over all simulated (non-rejected) vehicles.
pub fn metrics(log: &EventLog) -> Result<MetricsReport, MetricsError> {
    let mut per: BTreeMap<VehicleId, Tally> = BTreeMap::new();
    for e in &log.events {
        let t = per.entry(e.vehicle).or_default();
        match e.kind {
            EventKind::Request => t.request = Some(e.time),
            EventKind::Reject => t.rejected = true,
            EventKind::Enter(_) => {
                t.first_enter.get_or_insert(e.time);
                t.streets_left += 1;
            }
            EventKind::Reach(_) => t.reach = Some(e.time),
            EventKind::Exit(_) => {
                if let Some(r) = t.reach.take() {
                    t.waiting += e.time - r;
                }
                t.streets_left -= 1;
                if t.streets_left == 0 {
                    t.finish = Some(e.time);
                }
            }
        }
    }
    per.retain(|_, t| !t.rejected);
    let unfinished: Vec<VehicleId> = per
        .iter()
        .filter(|(_, t)| t.finish.is_none() || t.streets_left > 0)
        .map(|(v, _)| *v)
        .collect();
    if !unfinished.is_empty() {
        return Err(MetricsError::Unfinished(unfinished));
    }
    let n = per.len();
    if n == 0 {
        return Ok(MetricsReport::default());
    }
    let nf = n as f64;
    let mut total_length = 0.0;
    let mut total_duration = 0.0;
    let mut report = MetricsReport { vehicles: n, ..Default::default() };
    for (v, t) in &per {
        let request = t.request.unwrap_or(0);
        let finish = t.finish.expect("finished");
        total_length += log.route_length.get(v).copied().unwrap_or(0.0);
        total_duration += f64::from(finish - request);
        report.total_duration = report.total_duration.max(f64::from(finish));
        report.avg_waiting_time += f64::from(t.waiting);
        report.avg_depart_delay += f64::from(t.first_enter.expect("entered") - request);
    }
    report.avg_route_length = total_length / nf;
    report.avg_duration = total_duration / nf;
    report.avg_speed = if total_duration > 0.0 { total_length / total_duration } else { 0.0 };
    report.avg_waiting_time /= nf;
    report.avg_depart_delay /= nf;
    Ok(report)
}

/// Requests that ignore traffic: every controlled vehicle takes its
/// shortest path and leaves when requested. Simulated vehicles keep their
/// fixed route and departure.
pub fn baseline_requests(demand: &[Demand], network: &Network) -> Result<Vec<SimRequest>, PreprocessError> {
    let step = network.step_seconds();
    demand
        .iter()
        .map(|d| {
            if let Some(fixed) = &d.fixed {
                return Ok(SimRequest {
                    id: d.id,
                    request: d.depart * step,
                    release: fixed.first().map_or(d.depart, |s| s.enter) * step,
                    route: fixed.iter().map(|s| s.street).collect(),
                });
            }
            let route = enumerate_acyclic_paths(network, d.origin, d.destination, 1)
                .into_iter()
                .next()
                .ok_or_else(|| PreprocessError::Unreachable {
                    vehicle: d.id,
                    from: network.name(d.origin).to_string(),
                    to: network.name(d.destination).to_string(),
                })?;
            Ok(SimRequest { id: d.id, request: d.depart * step, release: d.depart * step, route })
        })
        .collect()
}

#[derive(Debug, Error)]
pub enum CompareError {
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Baseline(#[from] PreprocessError),
    #[error("{run} run: {source}")]
    Metrics { run: &'static str, source: MetricsError },
}

#[derive(Clone, Debug)]
pub struct Comparison {
    pub optimized: MetricsReport,
    pub baseline: MetricsReport,
    pub run: RunOutput,
}

/// Simulates the same demand under controller routes and under
/// traffic-blind shortest paths.
pub fn compare_baseline(
    demand: &[Demand],
    network: &Network,
    controller: &ControllerConfig,
    sim: &SimConfig,
) -> Result<Comparison, CompareError> {
    let run = run(demand, network, controller)?;
    let optimized = simulate(&SimRequest::from_trace(&run.trace, network), network, sim);
    let baseline = simulate(&baseline_requests(demand, network)?, network, sim);
    Ok(Comparison {
        optimized: metrics(&optimized).map_err(|source| CompareError::Metrics { run: "optimized", source })?,
        baseline: metrics(&baseline).map_err(|source| CompareError::Metrics { run: "baseline", source })?,
        run,
    })
}

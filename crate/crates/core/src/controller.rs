//! Rolling-horizon control loop.
//!
//! Each epoch schedules the vehicles waiting to depart against everything
//! committed earlier. Committed plans are never revised; they enter later
//! instances as simulated traffic.

use std::collections::{BTreeMap, VecDeque};
use std::time::Duration;

use thiserror::Error;

use crate::net_model::{Network, OccupancyLedger, Stay, Step, StreetId};
use crate::preprocessor::{
    build_routes, compute_windows, CostModel, PreprocessError, Route, RouteId, RouteParams,
    VehicleClass, VehicleId, VehicleState,
};
use crate::scheduler::{
    check, default_horizon, solve, InstanceError, Objective, Optimality, Schedule,
    SchedulingInstance, SolveConfig, SolveError, Violation, VehicleStay,
};

/// One vehicle of a demand file.
#[derive(Clone, Debug, PartialEq)]
pub struct Demand {
    pub id: VehicleId,
    pub class: VehicleClass,
    /// Requested departure step.
    pub depart: Step,
    pub origin: StreetId,
    pub destination: StreetId,
    /// Committed stays of a simulated vehicle.
    pub fixed: Option<Vec<Stay>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControllerConfig {
    pub routes: RouteParams,
    pub solve: SolveConfig,
    pub epoch_steps: Step,
    /// Epochs a vehicle may be deferred before the run aborts.
    pub max_defer: u32,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            routes: RouteParams::default(),
            solve: SolveConfig::default(),
            epoch_steps: 1,
            max_defer: 120,
        }
    }
}

/// A vehicle's fixed plan.
#[derive(Clone, Debug, PartialEq)]
pub struct Commitment {
    pub vehicle: VehicleId,
    pub class: VehicleClass,
    /// Requested departure step.
    pub request: Step,
    /// Step the origin street is entered.
    pub depart: Step,
    pub route: Route,
    pub stays: Vec<Stay>,
}

impl Commitment {
    pub fn last_exit(&self) -> Step {
        self.stays.last().map_or(self.depart, |s| s.exit)
    }

    pub fn as_simulated(&self) -> VehicleState {
        VehicleState {
            id: self.vehicle,
            class: VehicleClass::Simulated,
            depart: self.depart,
            origin: self.route.origin(),
            destination: self.route.destination(),
            routes: vec![self.route.clone()],
            fixed_schedule: Some(self.stays.clone()),
        }
    }

    fn as_controlled(&self) -> VehicleState {
        VehicleState {
            class: VehicleClass::Controlled,
            fixed_schedule: None,
            ..self.as_simulated()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pending {
    pub demand: Demand,
    pub deferrals: u32,
}

#[derive(Clone, Debug)]
pub struct EpochState {
    pub clock: Step,
    pub committed: BTreeMap<VehicleId, Commitment>,
    /// Requested departure reached, not yet committed; in id order.
    pub pending: Vec<Pending>,
    pub ledger: OccupancyLedger,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error(transparent)]
    Unreachable(#[from] PreprocessError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("vehicle {vehicle} deferred {deferrals} times (limit {limit}) at step {clock}")]
    DeferLimit { vehicle: VehicleId, deferrals: u32, limit: u32, clock: Step },
    #[error("vehicle {0} appears more than once in the demand")]
    DuplicateVehicle(VehicleId),
    #[error("simulated vehicle {0} has no fixed stays")]
    MissingStays(VehicleId),
    #[error("simulated vehicle {0}: stays are not a linked, gap-free path")]
    BrokenStays(VehicleId),
    #[error("simulated traffic is inconsistent: {0}")]
    Background(Violation),
}

/// Per-epoch solver summary.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpochReport {
    pub clock: Step,
    pub controlled: usize,
    pub simulated: usize,
    pub committed: Vec<VehicleId>,
    pub deferred: Vec<VehicleId>,
    /// Summed over the batches solved this epoch.
    pub objective: Objective,
    /// `None` when nothing was solved.
    pub optimality: Option<Optimality>,
    pub solves: usize,
    pub nodes: u64,
    pub elapsed: Duration,
}

#[derive(Clone, Debug)]
pub struct EpochOutcome {
    pub report: EpochReport,
    /// Every instance solved this epoch with its schedule.
    pub batches: Vec<(SchedulingInstance, Schedule)>,
}

impl EpochState {
    pub fn new(network: &Network) -> Self {
        EpochState {
            clock: 0,
            committed: BTreeMap::new(),
            pending: Vec::new(),
            ledger: OccupancyLedger::for_network(network),
        }
    }

    pub fn admit(&mut self, demand: Demand) {
        let at = self.pending.partition_point(|p| p.demand.id < demand.id);
        self.pending.insert(at, Pending { demand, deferrals: 0 });
    }

    /// Commits a vehicle's plan as is.
    pub fn commit(&mut self, commitment: Commitment) {
        for s in &commitment.stays {
            self.ledger.add_stay(*s).expect("committed stays are non-empty");
        }
        self.committed.insert(commitment.vehicle, commitment);
    }

    /// Committed vehicles still on the network at or after `clock`.
    pub fn active(&self) -> Vec<VehicleState> {
        self.committed
            .values()
            .filter(|c| c.last_exit() > self.clock)
            .map(Commitment::as_simulated)
            .collect()
    }
}

/// Builds the commitment of a fixed simulated demand record.
pub fn fixed_commitment(network: &Network, demand: &Demand) -> Result<Commitment, ControlError> {
    let stays = demand
        .fixed
        .clone()
        .filter(|s| !s.is_empty())
        .ok_or(ControlError::MissingStays(demand.id))?;
    let streets: Vec<StreetId> = stays.iter().map(|s| s.street).collect();
    let linked = stays.windows(2).all(|w| w[0].exit == w[1].enter && network.has_link(w[0].street, w[1].street));
    if !linked
        || stays.iter().any(|s| s.exit <= s.enter || s.street.index() >= network.street_count())
        || streets[0] != demand.origin
        || streets[streets.len() - 1] != demand.destination
    {
        return Err(ControlError::BrokenStays(demand.id));
    }
    let depart = stays[0].enter;
    let empty = OccupancyLedger::for_network(network);
    Ok(Commitment {
        vehicle: demand.id,
        class: VehicleClass::Simulated,
        request: demand.depart,
        depart,
        route: Route {
            id: RouteId(0),
            vehicle: demand.id,
            windows: compute_windows(network, &streets, &empty, depart),
            cost: CostModel::Length.cost(network, &streets),
            streets,
        },
        stays,
    })
}

fn commit_solution(
    state: &mut EpochState,
    batch: &[VehicleState],
    schedule: &Schedule,
    committed: &mut Vec<VehicleId>,
) {
    for v in batch {
        let route_id = schedule.routes[&v.id];
        let route = v.routes.iter().find(|r| r.id == route_id).expect("chosen route").clone();
        let stays: Vec<Stay> = schedule.stays_of(v.id).map(VehicleStay::stay).collect();
        let request = state
            .pending
            .iter()
            .find(|p| p.demand.id == v.id)
            .map_or(v.depart, |p| p.demand.depart);
        state.commit(Commitment {
            vehicle: v.id,
            class: VehicleClass::Controlled,
            request,
            depart: v.depart,
            route,
            stays,
        });
        committed.push(v.id);
    }
}

/// Schedules every pending vehicle at the current clock, defers those that
/// cannot enter, and advances the clock by one epoch.
pub fn step_epoch(
    state: &mut EpochState,
    network: &Network,
    config: &ControllerConfig,
) -> Result<EpochOutcome, ControlError> {
    let clock = state.clock;
    let mut report = EpochReport { clock, ..Default::default() };
    let mut batches = Vec::new();
    let mut vehicles = Vec::with_capacity(state.pending.len());
    for p in &state.pending {
        let d = &p.demand;
        let routes = build_routes(network, d.id, d.origin, d.destination, &state.ledger, clock, &config.routes)?;
        vehicles.push(VehicleState {
            id: d.id,
            class: VehicleClass::Controlled,
            depart: clock,
            origin: d.origin,
            destination: d.destination,
            routes,
            fixed_schedule: None,
        });
    }
    report.controlled = vehicles.len();

    let mut queue: VecDeque<Vec<VehicleState>> = VecDeque::new();
    if !vehicles.is_empty() {
        queue.push_back(vehicles);
    }
    let mut deferred = Vec::new();
    let mut committed = Vec::new();
    while let Some(mut batch) = queue.pop_front() {
        let simulated = state.active();
        report.simulated = report.simulated.max(simulated.len());
        let instance = SchedulingInstance {
            network: network.clone(),
            horizon: default_horizon(network, &batch, &simulated, None),
            controlled: batch.clone(),
            simulated,
            protect_simulated: true,
        };
        match solve(&instance, &config.solve) {
            Ok(solution) => {
                report.solves += 1;
                report.nodes += solution.stats.nodes;
                report.elapsed += solution.stats.elapsed;
                report.objective.cost += solution.objective.cost;
                report.objective.spread += solution.objective.spread;
                report.optimality = match (report.optimality, solution.optimality) {
                    (Some(Optimality::AnytimeBest), _) | (_, Optimality::AnytimeBest) => {
                        Some(Optimality::AnytimeBest)
                    }
                    _ => Some(Optimality::Proven),
                };
                commit_solution(state, &batch, &solution.schedule, &mut committed);
                batches.push((instance, solution.schedule));
            }
            Err(SolveError::Infeasible { vehicles }) => {
                batch.retain(|v| {
                    let blocked = vehicles.contains(&v.id);
                    if blocked {
                        deferred.push(v.id);
                    }
                    !blocked
                });
                if !batch.is_empty() {
                    queue.push_front(batch);
                }
            }
            Err(SolveError::Timeout) if batch.len() > 1 => {
                let tail = batch.split_off(batch.len() / 2);
                queue.push_front(tail);
                queue.push_front(batch);
            }
            Err(SolveError::Timeout) => deferred.push(batch[0].id),
            Err(SolveError::Invalid(e)) => return Err(e.into()),
        }
    }

    state.pending.retain(|p| !committed.contains(&p.demand.id));
    for p in &mut state.pending {
        p.deferrals += 1;
        if p.deferrals > config.max_defer {
            return Err(ControlError::DeferLimit {
                vehicle: p.demand.id,
                deferrals: p.deferrals,
                limit: config.max_defer,
                clock,
            });
        }
    }
    committed.sort();
    deferred.sort();
    report.committed = committed;
    report.deferred = deferred;
    state.clock += config.epoch_steps.max(1);
    Ok(EpochOutcome { report, batches })
}

/// The whole demand as one scheduling instance: controlled vehicles depart
/// exactly when requested, with candidate routes computed against the
/// simulated traffic.
pub fn demand_instance(
    demand: &[Demand],
    network: &Network,
    routes: &RouteParams,
) -> Result<SchedulingInstance, ControlError> {
    let mut seen = std::collections::BTreeSet::new();
    let mut ledger = OccupancyLedger::for_network(network);
    let mut simulated = Vec::new();
    for d in demand {
        if !seen.insert(d.id) {
            return Err(ControlError::DuplicateVehicle(d.id));
        }
        if d.class == VehicleClass::Simulated {
            let c = fixed_commitment(network, d)?;
            for s in &c.stays {
                ledger.add_stay(*s).expect("validated street");
            }
            simulated.push(c.as_simulated());
        }
    }
    let mut controlled = Vec::new();
    for d in demand.iter().filter(|d| d.class == VehicleClass::Controlled) {
        controlled.push(VehicleState {
            id: d.id,
            class: VehicleClass::Controlled,
            depart: d.depart,
            origin: d.origin,
            destination: d.destination,
            routes: build_routes(network, d.id, d.origin, d.destination, &ledger, d.depart, routes)?,
            fixed_schedule: None,
        });
    }
    let instance = SchedulingInstance {
        network: network.clone(),
        horizon: default_horizon(network, &controlled, &simulated, None),
        controlled,
        simulated,
        protect_simulated: false,
    };
    instance.validate()?;
    Ok(instance)
}

/// Complete plan of a run, one commitment per vehicle in id order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub vehicles: Vec<Commitment>,
}

impl Trace {
    /// All committed stays as one schedule, with the instance it should be
    /// checked against: controlled vehicles keep their chosen route as sole
    /// candidate, and every enter is subject to the capacity and
    /// travel-time rules.
    pub fn global_instance(&self, network: &Network) -> (SchedulingInstance, Schedule) {
        let mut controlled = Vec::new();
        let mut simulated = Vec::new();
        let mut schedule = Schedule::default();
        for c in &self.vehicles {
            match c.class {
                VehicleClass::Controlled => controlled.push(c.as_controlled()),
                VehicleClass::Simulated => simulated.push(c.as_simulated()),
            }
            schedule.routes.insert(c.vehicle, c.route.id);
            schedule.stays.extend(c.stays.iter().map(|s| VehicleStay {
                vehicle: c.vehicle,
                street: s.street,
                enter: s.enter,
                exit: s.exit,
            }));
        }
        schedule.normalize();
        let horizon = self.vehicles.iter().map(Commitment::last_exit).max().unwrap_or(0);
        let instance = SchedulingInstance {
            network: network.clone(),
            horizon,
            controlled,
            simulated,
            protect_simulated: true,
        };
        (instance, schedule)
    }

    /// Re-checks the whole trace at once.
    pub fn recheck(&self, network: &Network) -> Vec<Violation> {
        let (instance, schedule) = self.global_instance(network);
        check(&schedule, &instance)
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub trace: Trace,
    pub epochs: Vec<EpochReport>,
}

/// Runs epochs until every demanded vehicle is committed.
pub fn run(demand: &[Demand], network: &Network, config: &ControllerConfig) -> Result<RunOutput, ControlError> {
    run_with(demand, network, config, |_, _| {})
}

/// [`run`] with a callback after every epoch.
pub fn run_with(
    demand: &[Demand],
    network: &Network,
    config: &ControllerConfig,
    mut observe: impl FnMut(&EpochState, &EpochOutcome),
) -> Result<RunOutput, ControlError> {
    let mut seen = std::collections::HashSet::new();
    for d in demand {
        if !seen.insert(d.id) {
            return Err(ControlError::DuplicateVehicle(d.id));
        }
    }
    let mut state = EpochState::new(network);
    let mut background = Vec::new();
    let mut arrivals: Vec<&Demand> = Vec::new();
    for d in demand {
        match d.class {
            VehicleClass::Simulated => {
                let c = fixed_commitment(network, d)?;
                background.push(c.clone());
                state.commit(c);
            }
            VehicleClass::Controlled => arrivals.push(d),
        }
    }
    let background_trace = Trace { vehicles: background };
    if let Some(v) = background_trace.recheck(network).into_iter().next() {
        return Err(ControlError::Background(v));
    }
    arrivals.sort_by_key(|d| (d.depart, d.id));
    let mut arrivals: VecDeque<&Demand> = arrivals.into();
    let mut epochs = Vec::new();
    while !arrivals.is_empty() || !state.pending.is_empty() {
        if state.pending.is_empty() {
            if let Some(next) = arrivals.front() {
                state.clock = state.clock.max(next.depart);
            }
        }
        while arrivals.front().is_some_and(|d| d.depart <= state.clock) {
            state.admit(arrivals.pop_front().unwrap().clone());
        }
        let outcome = step_epoch(&mut state, network, config)?;
        observe(&state, &outcome);
        epochs.push(outcome.report);
    }
    Ok(RunOutput {
        trace: Trace { vehicles: state.committed.into_values().collect() },
        epochs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{line_network, random_demand, grid_network, GridSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn arrival(id: u32, depart: Step, origin: u32, destination: u32) -> Demand {
        Demand {
            id: VehicleId(id),
            class: VehicleClass::Controlled,
            depart,
            origin: StreetId(origin),
            destination: StreetId(destination),
            fixed: None,
        }
    }

    fn config() -> ControllerConfig {
        ControllerConfig {
            solve: SolveConfig { budget: Duration::from_secs(10), ..Default::default() },
            ..Default::default()
        }
    }

    #[test]
    fn first_epoch_commits_all_arrivals() {
        let net = line_network(&[125.0; 3], 12, 5);
        let mut state = EpochState::new(&net);
        for i in 0..3 {
            state.admit(arrival(i, 0, 0, 2));
        }
        let out = step_epoch(&mut state, &net, &config()).unwrap();
        assert_eq!(out.report.committed.len(), 3);
        assert_eq!(out.batches[0].0.simulated.len(), 0);
        assert!(state.pending.is_empty());
        assert_eq!(state.ledger.occupancy(StreetId(0), 0).unwrap(), 3);
        assert_eq!(state.clock, 1);

        state.admit(arrival(3, 1, 0, 2));
        let out = step_epoch(&mut state, &net, &config()).unwrap();
        let (instance, _) = &out.batches[0];
        assert_eq!((instance.controlled.len(), instance.simulated.len()), (1, 3));
    }

    #[test]
    fn blocked_origin_defers_one_epoch_at_a_time() {
        let net = line_network(&[125.0, 125.0], 1, 5);
        let mut state = EpochState::new(&net);
        let blocker = Demand {
            id: VehicleId(9),
            class: VehicleClass::Simulated,
            depart: 0,
            origin: StreetId(0),
            destination: StreetId(0),
            fixed: Some(vec![Stay { street: StreetId(0), enter: 0, exit: 3 }]),
        };
        state.commit(fixed_commitment(&net, &blocker).unwrap());
        state.admit(arrival(0, 0, 0, 1));
        for clock in 0..3 {
            let out = step_epoch(&mut state, &net, &config()).unwrap();
            assert_eq!(out.report.deferred, vec![VehicleId(0)], "clock {clock}");
            assert_eq!(state.pending[0].deferrals, clock + 1);
        }
        let out = step_epoch(&mut state, &net, &config()).unwrap();
        assert_eq!(out.report.committed, vec![VehicleId(0)]);
        assert_eq!(state.committed[&VehicleId(0)].depart, 3);
        assert_eq!(state.committed[&VehicleId(0)].request, 0);
    }

    #[test]
    fn defer_limit_aborts_the_run() {
        let net = line_network(&[125.0, 125.0], 1, 5);
        let blocker = Demand {
            id: VehicleId(9),
            class: VehicleClass::Simulated,
            depart: 0,
            origin: StreetId(0),
            destination: StreetId(0),
            fixed: Some(vec![Stay { street: StreetId(0), enter: 0, exit: 6 }]),
        };
        let cfg = ControllerConfig { max_defer: 2, ..config() };
        let err = run(&[blocker, arrival(0, 0, 0, 1)], &net, &cfg).unwrap_err();
        assert!(matches!(err, ControlError::DeferLimit { vehicle: VehicleId(0), .. }), "{err}");
    }

    #[test]
    fn empty_demand_gives_empty_trace() {
        let net = line_network(&[125.0], 6, 5);
        let out = run(&[], &net, &config()).unwrap();
        assert!(out.trace.vehicles.is_empty());
        assert!(out.epochs.is_empty());
    }

    #[test]
    fn lone_vehicle_trace_is_its_solo_schedule() {
        let net = line_network(&[125.0; 3], 6, 5);
        let out = run(&[arrival(0, 4, 0, 2)], &net, &config()).unwrap();
        let c = &out.trace.vehicles[0];
        assert_eq!(
            c.stays,
            vec![
                Stay { street: StreetId(0), enter: 4, exit: 6 },
                Stay { street: StreetId(1), enter: 6, exit: 8 },
                Stay { street: StreetId(2), enter: 8, exit: 10 },
            ]
        );
    }

    #[test]
    fn unreachable_destination_is_an_error() {
        let net = line_network(&[125.0; 3], 6, 5);
        let err = run(&[arrival(0, 0, 2, 0)], &net, &config()).unwrap_err();
        assert!(matches!(err, ControlError::Unreachable(_)));
    }

    #[test]
    fn grid_run_passes_every_epoch_and_the_global_check() {
        let net = grid_network(&GridSpec { rows: 3, cols: 3, capacity: 3, ..Default::default() });
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let demand = random_demand(&net, 50, 2.0, &mut rng);
        let mut previous: Vec<Commitment> = Vec::new();
        let out = run_with(&demand, &net, &config(), |state, outcome| {
            for (instance, schedule) in &outcome.batches {
                assert!(check(schedule, instance).is_empty());
            }
            for c in &previous {
                assert_eq!(state.committed.get(&c.vehicle), Some(c));
            }
            previous = state.committed.values().cloned().collect();
        })
        .unwrap();
        assert_eq!(out.trace.vehicles.len(), 50);
        assert_eq!(out.trace.recheck(&net), vec![]);
    }
}

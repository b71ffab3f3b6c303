//! Branch-and-bound over route choices and street exit steps.
//!
//! Vehicles are placed one street at a time. Placing a stay only ever raises
//! occupancies, and every constraint and both objective terms are monotone
//! in occupancy, so a partial assignment that breaks a constraint (or whose
//! objective already reaches the incumbent) cannot be repaired by adding
//! more stays.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Objective, SchedulingInstance};
use crate::net_model::{Network, OccupancyLedger, Stay, Step, StreetId};
use crate::preprocessor::{RouteId, VehicleId};

pub(crate) struct CandidateRoute {
    pub id: RouteId,
    pub cost: u64,
    pub streets: Vec<StreetId>,
    /// Absolute enter windows.
    pub lo: Vec<Step>,
    pub hi: Vec<Step>,
}

pub(crate) struct Candidate {
    pub id: VehicleId,
    pub depart: Step,
    /// In route id order.
    pub routes: Vec<CandidateRoute>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Arrival {
    enter: Step,
    exit: Step,
    /// Travel-time and capacity rules apply at this enter.
    checked: bool,
}

/// Occupancy ledger plus the enter events needed to re-check constraints.
#[derive(Clone)]
pub(crate) struct State {
    ledger: OccupancyLedger,
    arrivals: Vec<Vec<Arrival>>,
    street_spread: Vec<u64>,
    spread: u64,
}

impl State {
    fn new(street_count: usize) -> Self {
        State {
            ledger: OccupancyLedger::new(street_count),
            arrivals: vec![Vec::new(); street_count],
            street_spread: vec![0; street_count],
            spread: 0,
        }
    }

    fn insert(&mut self, street: StreetId, arrival: Arrival) {
        self.ledger
            .add_stay(Stay { street, enter: arrival.enter, exit: arrival.exit })
            .expect("stays are non-empty");
        let list = &mut self.arrivals[street.index()];
        let at = list.partition_point(|a| a.enter <= arrival.enter);
        list.insert(at, arrival);
    }

    fn remove(&mut self, street: StreetId, arrival: Arrival) {
        self.ledger
            .remove_stay(Stay { street, enter: arrival.enter, exit: arrival.exit })
            .expect("known street");
        let list = &mut self.arrivals[street.index()];
        let at = list
            .iter()
            .rposition(|a| *a == arrival)
            .expect("removing a stay that was placed");
        list.remove(at);
    }

    fn compute_street_spread(&self, street: StreetId) -> u64 {
        let mut total = 0;
        let mut last = None;
        for a in &self.arrivals[street.index()] {
            if last != Some(a.enter) {
                total += u64::from(self.ledger.count(street, a.enter));
                last = Some(a.enter);
            }
        }
        total
    }

    fn refresh_spread(&mut self, street: StreetId) -> u64 {
        let old = self.street_spread[street.index()];
        let new = self.compute_street_spread(street);
        self.street_spread[street.index()] = new;
        self.spread = self.spread - old + new;
        old
    }

    /// Rules r11/r13 at every checked enter on `street` in `[from, to)`.
    fn street_ok(&self, net: &Network, street: StreetId, from: Step, to: Step) -> bool {
        let s = net.street(street);
        let list = &self.arrivals[street.index()];
        let start = list.partition_point(|a| a.enter < from);
        list[start..]
            .iter()
            .take_while(|a| a.enter < to)
            .filter(|a| a.checked)
            .all(|a| {
                let occ = self.ledger.count(street, a.enter);
                occ <= s.capacity && a.exit >= a.enter + s.travel_time(occ)
            })
    }

    /// Rule r14 at every enter into the street's roundabout in `[from, to)`.
    fn roundabout_ok(&self, net: &Network, street: StreetId, from: Step, to: Step) -> bool {
        let Some(r) = net.roundabout_of(street) else {
            return true;
        };
        let rb = &net.roundabouts()[r];
        let mut times: Vec<Step> = rb
            .members
            .iter()
            .flat_map(|m| {
                let list = &self.arrivals[m.index()];
                let start = list.partition_point(|a| a.enter < from);
                list[start..].iter().take_while(|a| a.enter < to).map(|a| a.enter)
            })
            .collect();
        times.sort_unstable();
        times.dedup();
        times.into_iter().all(|t| {
            rb.members
                .iter()
                .map(|m| self.ledger.count(*m, t))
                .sum::<u32>()
                <= rb.capacity
        })
    }

    /// Adds a controlled stay if no constraint breaks. Returns the street's
    /// previous spread contribution for [`State::unplace`].
    fn place(&mut self, net: &Network, street: StreetId, enter: Step, exit: Step) -> Option<u64> {
        let arrival = Arrival { enter, exit, checked: true };
        self.insert(street, arrival);
        if !self.street_ok(net, street, enter, exit) || !self.roundabout_ok(net, street, enter, exit)
        {
            self.remove(street, arrival);
            return None;
        }
        Some(self.refresh_spread(street))
    }

    fn unplace(&mut self, street: StreetId, enter: Step, exit: Step, old_spread: u64) {
        self.remove(street, Arrival { enter, exit, checked: true });
        let current = self.street_spread[street.index()];
        self.street_spread[street.index()] = old_spread;
        self.spread = self.spread - current + old_spread;
    }

    fn all_ok(&self, net: &Network) -> bool {
        net.street_ids()
            .all(|s| self.street_ok(net, s, 0, Step::MAX) && self.roundabout_ok(net, s, 0, Step::MAX))
    }
}

pub(crate) struct Model<'a> {
    pub net: &'a Network,
    pub horizon: Step,
    pub vehicles: Vec<Candidate>,
    base: State,
}

impl<'a> Model<'a> {
    pub fn new(instance: &'a SchedulingInstance) -> Self {
        let net = &instance.network;
        let mut base = State::new(net.street_count());
        for v in &instance.simulated {
            for stay in v.fixed_schedule.iter().flatten() {
                base.insert(
                    stay.street,
                    Arrival {
                        enter: stay.enter,
                        exit: stay.exit,
                        checked: instance.protect_simulated,
                    },
                );
            }
        }
        for s in net.street_ids() {
            base.refresh_spread(s);
        }
        let mut vehicles: Vec<Candidate> = instance
            .controlled
            .iter()
            .map(|v| {
                let mut routes: Vec<CandidateRoute> = v
                    .routes
                    .iter()
                    .map(|r| CandidateRoute {
                        id: r.id,
                        cost: r.cost,
                        streets: r.streets.clone(),
                        lo: r.windows.iter().map(|w| v.depart + w.min_enter).collect(),
                        hi: r.windows.iter().map(|w| v.depart + w.max_enter).collect(),
                    })
                    .collect();
                routes.sort_by_key(|r| r.id);
                Candidate { id: v.id, depart: v.depart, routes }
            })
            .collect();
        vehicles.sort_by_key(|v| v.id);
        Model { net, horizon: instance.horizon, vehicles, base }
    }

    /// Same network and simulated traffic, only the listed vehicles.
    pub fn restricted(&self, keep: &[usize]) -> Model<'a> {
        Model {
            net: self.net,
            horizon: self.horizon,
            vehicles: keep
                .iter()
                .map(|&i| {
                    let v = &self.vehicles[i];
                    Candidate {
                        id: v.id,
                        depart: v.depart,
                        routes: v
                            .routes
                            .iter()
                            .map(|r| CandidateRoute {
                                id: r.id,
                                cost: r.cost,
                                streets: r.streets.clone(),
                                lo: r.lo.clone(),
                                hi: r.hi.clone(),
                            })
                            .collect(),
                    }
                })
                .collect(),
            base: self.base.clone(),
        }
    }

    /// Simulated traffic on its own satisfies every enforced rule.
    pub fn base_ok(&self) -> bool {
        self.base.all_ok(self.net)
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Incumbent {
    pub objective: Objective,
    /// Route index per model vehicle.
    pub routes: Vec<usize>,
    /// (model vehicle, street, enter, exit)
    pub stays: Vec<(usize, StreetId, Step, Step)>,
}

pub(crate) struct Shared {
    pub best: Mutex<Option<Incumbent>>,
    version: AtomicU64,
    pub stop: AtomicBool,
    deadline: Instant,
    node_limit: Option<u64>,
}

impl Shared {
    pub fn new(deadline: Instant, node_limit: Option<u64>) -> Self {
        Shared {
            best: Mutex::new(None),
            version: AtomicU64::new(0),
            stop: AtomicBool::new(false),
            deadline,
            node_limit,
        }
    }

    pub fn offer(&self, candidate: Incumbent) -> Objective {
        let mut best = self.best.lock().expect("incumbent lock");
        match &*best {
            Some(b) if b.objective <= candidate.objective => b.objective,
            _ => {
                let obj = candidate.objective;
                *best = Some(candidate);
                self.version.fetch_add(1, Ordering::AcqRel);
                obj
            }
        }
    }

    fn best_objective(&self) -> Option<Objective> {
        self.best
            .lock()
            .expect("incumbent lock")
            .as_ref()
            .map(|b| b.objective)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Strategy {
    /// Depth-first in vehicle id / route id / earliest-step order.
    DepthFirst,
    /// Route combinations in nondecreasing total cost; the first feasible
    /// level is the optimal cost.
    CostLevels,
    /// Depth-first with a seeded vehicle and route order.
    Shuffled(u64),
    /// Stop at the first feasible assignment.
    FirstFeasible,
    /// Depth-first, trying only the earliest valid exit from each
    /// vehicle's last street. Incomplete; used to find incumbents fast.
    Greedy,
}

pub(crate) struct Worker<'m, 'a> {
    model: &'m Model<'a>,
    shared: &'m Shared,
    strategy: Strategy,
    state: State,
    order: Vec<usize>,
    route_order: Vec<Vec<usize>>,
    fixed_routes: Option<Vec<usize>>,
    rest_cost: Vec<u64>,
    rest_streets: Vec<u64>,
    chosen: Vec<usize>,
    placed: Vec<(usize, StreetId, Step, Step)>,
    cost: u64,
    best: Option<Objective>,
    seen_version: u64,
    pub nodes: u64,
    aborted: bool,
    found: bool,
}

impl<'m, 'a> Worker<'m, 'a> {
    pub fn new(model: &'m Model<'a>, shared: &'m Shared, strategy: Strategy) -> Self {
        let n = model.vehicles.len();
        let mut order: Vec<usize> = (0..n).collect();
        let mut route_order: Vec<Vec<usize>> = model
            .vehicles
            .iter()
            .map(|v| (0..v.routes.len()).collect())
            .collect();
        if let Strategy::Shuffled(seed) = strategy {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            order.shuffle(&mut rng);
            for routes in &mut route_order {
                routes.shuffle(&mut rng);
            }
        }
        let mut rest_cost = vec![0; n + 1];
        let mut rest_streets = vec![0; n + 1];
        for p in (0..n).rev() {
            let v = &model.vehicles[order[p]];
            rest_cost[p] = rest_cost[p + 1] + v.routes.iter().map(|r| r.cost).min().unwrap_or(0);
            rest_streets[p] = rest_streets[p + 1]
                + v.routes.iter().map(|r| r.streets.len() as u64).min().unwrap_or(0);
        }
        Worker {
            model,
            shared,
            strategy,
            state: model.base.clone(),
            order,
            route_order,
            fixed_routes: None,
            rest_cost,
            rest_streets,
            chosen: vec![0; n],
            placed: Vec::new(),
            cost: 0,
            best: None,
            seen_version: u64::MAX,
            nodes: 0,
            aborted: false,
            found: false,
        }
    }

    /// Runs the strategy. Returns true when the search space was exhausted.
    pub fn run(&mut self) -> bool {
        self.sync();
        match self.strategy {
            Strategy::CostLevels => self.cost_levels(),
            _ => self.vehicle(0),
        }
        !self.aborted
    }

    pub fn found(&self) -> bool {
        self.found
    }

    fn sync(&mut self) {
        let version = self.shared.version.load(Ordering::Acquire);
        if version != self.seen_version {
            self.seen_version = version;
            if let Some(obj) = self.shared.best_objective() {
                self.best = Some(self.best.map_or(obj, |b| b.min(obj)));
            }
        }
    }

    fn tick(&mut self) {
        self.nodes += 1;
        if self.nodes % 256 != 0 {
            return;
        }
        self.sync();
        if self.shared.stop.load(Ordering::Relaxed)
            || Instant::now() >= self.shared.deadline
            || self.shared.node_limit.is_some_and(|l| self.nodes >= l)
        {
            self.aborted = true;
        }
    }

    fn done(&self) -> bool {
        self.aborted || (self.strategy == Strategy::FirstFeasible && self.found)
    }

    fn bound_ok(&self, p: usize, own_streets_left: usize) -> bool {
        if self.strategy == Strategy::FirstFeasible {
            return true;
        }
        let Some(best) = self.best else {
            return true;
        };
        let bound = Objective {
            cost: self.cost + self.rest_cost[p + 1],
            spread: self.state.spread + own_streets_left as u64 + self.rest_streets[p + 1],
        };
        bound < best
    }

    fn record(&mut self) {
        self.found = true;
        let objective = Objective { cost: self.cost, spread: self.state.spread };
        if self.best.is_some_and(|b| b <= objective) {
            return;
        }
        let kept = self.shared.offer(Incumbent {
            objective,
            routes: self.chosen.clone(),
            stays: self.placed.clone(),
        });
        self.best = Some(kept);
    }

    fn vehicle(&mut self, p: usize) {
        if self.done() {
            return;
        }
        if p == self.order.len() {
            self.record();
            return;
        }
        let model = self.model;
        let vi = self.order[p];
        let routes = match &self.fixed_routes {
            Some(fixed) => vec![fixed[vi]],
            None => self.route_order[vi].clone(),
        };
        for ri in routes {
            let route = &model.vehicles[vi].routes[ri];
            self.chosen[vi] = ri;
            self.cost += route.cost;
            if self.bound_ok(p, route.streets.len()) {
                self.street(p, vi, ri, 0, model.vehicles[vi].depart);
            }
            self.cost -= route.cost;
            if self.done() {
                return;
            }
        }
    }

    fn street(&mut self, p: usize, vi: usize, ri: usize, i: usize, enter: Step) {
        self.tick();
        if self.done() {
            return;
        }
        let model = self.model;
        let net = model.net;
        let route = &model.vehicles[vi].routes[ri];
        let sid = route.streets[i];
        let street = net.street(sid);
        let before = self.state.ledger.count(sid, enter);
        if before + 1 > street.capacity {
            return;
        }
        let last = i + 1 == route.streets.len();
        let mut lo = enter + street.travel_time(before + 1).max(1);
        let mut hi = (enter + street.max_travel_time).min(model.horizon);
        if !last {
            lo = lo.max(route.lo[i + 1]);
            hi = hi.min(route.hi[i + 1]);
        }
        let own_left = route.streets.len() - i - 1;
        for exit in lo..=hi {
            if !last {
                let next = route.streets[i + 1];
                if self.state.ledger.count(next, exit) + 1 > net.street(next).capacity {
                    continue;
                }
            }
            let Some(old) = self.state.place(net, sid, enter, exit) else {
                continue;
            };
            if self.bound_ok(p, own_left) {
                self.placed.push((vi, sid, enter, exit));
                if last {
                    self.vehicle(p + 1);
                } else {
                    self.street(p, vi, ri, i + 1, exit);
                }
                self.placed.pop();
            }
            self.state.unplace(sid, enter, exit, old);
            // Heuristic cut: later exits from the last street are skipped even
            // though a longer stay can absorb vehicles placed afterwards.
            if (last && self.strategy == Strategy::Greedy) || self.done() {
                return;
            }
        }
    }

    /// Visits route combinations cheapest first.
    fn cost_levels(&mut self) {
        let model = self.model;
        let n = model.vehicles.len();
        let by_cost: Vec<Vec<usize>> = model
            .vehicles
            .iter()
            .map(|v| {
                let mut idx: Vec<usize> = (0..v.routes.len()).collect();
                idx.sort_by_key(|&r| (v.routes[r].cost, v.routes[r].id));
                idx
            })
            .collect();
        if by_cost.iter().any(|r| r.is_empty()) {
            return;
        }
        let cost_of = |pos: &[usize]| -> u64 {
            pos.iter()
                .enumerate()
                .map(|(v, &k)| model.vehicles[v].routes[by_cost[v][k]].cost)
                .sum()
        };
        let mut heap = BinaryHeap::new();
        let start = vec![0usize; n];
        heap.push(Reverse((cost_of(&start), start, 0usize)));
        while let Some(Reverse((cost, pos, from))) = heap.pop() {
            self.sync();
            if self.best.is_some_and(|b| cost > b.cost) {
                break;
            }
            self.fixed_routes = Some(pos.iter().enumerate().map(|(v, &k)| by_cost[v][k]).collect());
            self.vehicle(0);
            if self.aborted {
                return;
            }
            for j in from..n {
                if pos[j] + 1 < by_cost[j].len() {
                    let mut next = pos.clone();
                    next[j] += 1;
                    heap.push(Reverse((cost_of(&next), next, j)));
                }
            }
        }
        self.fixed_routes = None;
    }
}

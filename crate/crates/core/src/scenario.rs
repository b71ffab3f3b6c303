//! Synthetic networks, demand and small random instances.
//!
//! Everything here is driven by a caller-supplied seed so fixtures are
//! reproducible.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use crate::controller::Demand;
use crate::net_model::{Link, Network, OccupancyLedger, Stay, Step, Street, StreetId, StreetOverrides};
use crate::preprocessor::{
    build_routes, compute_windows, CostModel, DiversityParams, Route, RouteId, RouteParams,
    VehicleClass, VehicleId, VehicleState,
};
use crate::scheduler::{default_horizon, SchedulingInstance};

/// A street chain `s0 -> s1 -> ...` with uniform capacity.
pub fn line_network(lengths: &[f64], capacity: u32, step_seconds: u32) -> Network {
    let streets = lengths
        .iter()
        .enumerate()
        .map(|(i, l)| Street::new(format!("s{i}"), *l, capacity, step_seconds).expect("valid street"))
        .collect();
    let links = (1..lengths.len() as u32)
        .map(|i| Link { from: StreetId(i - 1), to: StreetId(i) })
        .collect();
    Network::new(step_seconds, streets, links, vec![]).expect("valid line")
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub block_m: f64,
    pub capacity: u32,
    pub step_seconds: u32,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { rows: 5, cols: 5, block_m: 150.0, capacity: 12, step_seconds: 5 }
    }
}

/// Name of the grid street from junction `a` to junction `b`.
pub fn grid_street(a: (usize, usize), b: (usize, usize)) -> String {
    format!("{}.{}>{}.{}", a.0, a.1, b.0, b.1)
}

/// Two-way street grid between `rows x cols` junctions. Every street links
/// to every street leaving its end junction except the U-turn.
pub fn grid_network(spec: &GridSpec) -> Network {
    let mut ends = Vec::new();
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            if c + 1 < spec.cols {
                ends.push(((r, c), (r, c + 1)));
                ends.push(((r, c + 1), (r, c)));
            }
            if r + 1 < spec.rows {
                ends.push(((r, c), (r + 1, c)));
                ends.push(((r + 1, c), (r, c)));
            }
        }
    }
    let streets = ends
        .iter()
        .map(|&(a, b)| {
            Street::new(grid_street(a, b), spec.block_m, spec.capacity, spec.step_seconds)
                .expect("valid street")
        })
        .collect();
    let mut links = Vec::new();
    for (i, &(_, b)) in ends.iter().enumerate() {
        for (j, &(c, d)) in ends.iter().enumerate() {
            if c == b && d != ends[i].0 {
                links.push(Link { from: StreetId(i as u32), to: StreetId(j as u32) });
            }
        }
    }
    Network::new(spec.step_seconds, streets, links, vec![]).expect("valid grid")
}

/// `count` controlled vehicles with random distinct origin and destination
/// streets, departing at a uniform rate of `per_step` vehicles per step.
pub fn random_demand<R: Rng>(network: &Network, count: usize, per_step: f64, rng: &mut R) -> Vec<Demand> {
    let ids: Vec<StreetId> = network.street_ids().collect();
    (0..count)
        .map(|i| {
            let origin = *ids.choose(rng).expect("non-empty network");
            let mut destination = *ids.choose(rng).expect("non-empty network");
            while destination == origin {
                destination = *ids.choose(rng).expect("non-empty network");
            }
            Demand {
                id: VehicleId(i as u32),
                class: VehicleClass::Controlled,
                depart: (i as f64 / per_step).floor() as Step,
                origin,
                destination,
                fixed: None,
            }
        })
        .collect()
}

/// A simulated vehicle following `stays` (which must be a linked path).
pub fn simulated_vehicle(network: &Network, id: VehicleId, stays: Vec<Stay>) -> VehicleState {
    let streets: Vec<StreetId> = stays.iter().map(|s| s.street).collect();
    let depart = stays.first().map_or(0, |s| s.enter);
    let empty = OccupancyLedger::for_network(network);
    let route = Route {
        id: RouteId(0),
        vehicle: id,
        windows: compute_windows(network, &streets, &empty, depart),
        cost: CostModel::Length.cost(network, &streets),
        streets: streets.clone(),
    };
    VehicleState {
        id,
        class: VehicleClass::Simulated,
        depart,
        origin: streets[0],
        destination: *streets.last().expect("non-empty stays"),
        routes: vec![route],
        fixed_schedule: Some(stays),
    }
}

/// A controlled vehicle with candidate routes computed against `ledger`.
pub fn controlled_vehicle(
    network: &Network,
    id: VehicleId,
    depart: Step,
    origin: StreetId,
    destination: StreetId,
    ledger: &OccupancyLedger,
    params: &RouteParams,
) -> Option<VehicleState> {
    let routes = build_routes(network, id, origin, destination, ledger, depart, params).ok()?;
    Some(VehicleState {
        id,
        class: VehicleClass::Controlled,
        depart,
        origin,
        destination,
        routes,
        fixed_schedule: None,
    })
}

/// Random instance inside the brute-force guard: at most 3 controlled
/// vehicles, 8 streets and a 15-step horizon.
pub fn random_small_instance<R: Rng>(rng: &mut R) -> SchedulingInstance {
    loop {
        if let Some(instance) = try_small_instance(rng, 15) {
            return instance;
        }
    }
}

/// Random instance of moderate size, not bounded by the brute-force guard.
pub fn random_medium_instance<R: Rng>(rng: &mut R) -> SchedulingInstance {
    loop {
        let spec = GridSpec {
            rows: rng.gen_range(2..=4),
            cols: rng.gen_range(2..=4),
            block_m: [60.0, 100.0, 150.0][rng.gen_range(0..3)],
            capacity: rng.gen_range(2..=6),
            step_seconds: 5,
        };
        let net = grid_network(&spec);
        let ids: Vec<StreetId> = net.street_ids().collect();
        let mut ledger = OccupancyLedger::for_network(&net);
        let mut simulated = Vec::new();
        for k in 0..rng.gen_range(0..8) {
            let start = rng.gen_range(0..6);
            let stays = random_walk(&net, &ids, rng, start, 4);
            for s in &stays {
                ledger.add_stay(*s).expect("valid stay");
            }
            simulated.push(simulated_vehicle(&net, VehicleId(100 + k), stays));
        }
        let params = RouteParams {
            diversity: DiversityParams { k: 3, ..Default::default() },
            path_limit: 30,
            cost_model: CostModel::Length,
        };
        let mut controlled = Vec::new();
        for k in 0..rng.gen_range(1..=5) {
            let o = *ids.choose(rng).unwrap();
            let d = *ids.choose(rng).unwrap();
            if o == d {
                continue;
            }
            let depart = rng.gen_range(0..4);
            if let Some(v) = controlled_vehicle(&net, VehicleId(k), depart, o, d, &ledger, &params) {
                controlled.push(v);
            }
        }
        if controlled.is_empty() {
            continue;
        }
        let horizon = default_horizon(&net, &controlled, &simulated, Some(80));
        let instance = SchedulingInstance {
            network: net,
            horizon,
            controlled,
            simulated,
            protect_simulated: rng.gen_bool(0.5),
        };
        if instance.validate().is_ok() {
            return instance;
        }
    }
}

/// Random linked walk with light-ish stays starting at `start`.
fn random_walk<R: Rng>(net: &Network, ids: &[StreetId], rng: &mut R, start: Step, max_len: usize) -> Vec<Stay> {
    let mut street = *ids.choose(rng).expect("non-empty network");
    let mut t = start;
    let mut stays = Vec::new();
    let len = rng.gen_range(1..=max_len);
    for _ in 0..len {
        let s = net.street(street);
        let exit = t + s.travel.light + rng.gen_range(0..=1);
        stays.push(Stay { street, enter: t, exit });
        t = exit;
        let next: Vec<StreetId> = net
            .successors(street)
            .iter()
            .copied()
            .filter(|n| !stays.iter().any(|s| s.street == *n))
            .collect();
        match next.choose(rng) {
            Some(&n) => street = n,
            None => break,
        }
    }
    stays
}

fn small_network<R: Rng>(rng: &mut R) -> Network {
    let n = rng.gen_range(3..=8);
    let step = 5;
    let streets: Vec<Street> = (0..n)
        .map(|i| {
            let length = [30.0, 60.0, 90.0, 125.0][rng.gen_range(0..4)];
            let capacity = rng.gen_range(1..=4);
            let heavy = crate::net_model::steps_at_speed(length, crate::net_model::HEAVY_KMH, step);
            let overrides = StreetOverrides {
                max_travel_time: Some(heavy + rng.gen_range(0..=2)),
                ..Default::default()
            };
            Street::with_overrides(format!("s{i}"), length, capacity, step, overrides).expect("valid")
        })
        .collect();
    let mut links = Vec::new();
    for i in 0..n as u32 {
        for j in 0..n as u32 {
            let p = if j == i + 1 { 0.8 } else { 0.2 };
            if i != j && rng.gen_bool(p) {
                links.push(Link { from: StreetId(i), to: StreetId(j) });
            }
        }
    }
    let mut roundabouts = Vec::new();
    if n >= 4 && rng.gen_bool(0.3) {
        let a = rng.gen_range(1..n as u32 - 1);
        roundabouts.push(crate::net_model::Roundabout {
            name: "R".into(),
            capacity: rng.gen_range(1..=3),
            members: vec![StreetId(a), StreetId(a + 1)],
        });
    }
    Network::new(step, streets, links, roundabouts).expect("valid small network")
}

fn try_small_instance<R: Rng>(rng: &mut R, horizon_cap: Step) -> Option<SchedulingInstance> {
    let net = small_network(rng);
    let ids: Vec<StreetId> = net.street_ids().collect();
    let mut ledger = OccupancyLedger::for_network(&net);
    let mut simulated = Vec::new();
    for k in 0..rng.gen_range(0..=3) {
        let start = rng.gen_range(0..5);
        let stays = random_walk(&net, &ids, rng, start, 3);
        if stays.last().is_some_and(|s| s.exit > horizon_cap) {
            continue;
        }
        for s in &stays {
            ledger.add_stay(*s).ok()?;
        }
        simulated.push(simulated_vehicle(&net, VehicleId(10 + k), stays));
    }
    let params = RouteParams {
        diversity: DiversityParams { k: rng.gen_range(1..=3), ..Default::default() },
        path_limit: 20,
        cost_model: if rng.gen_bool(0.5) { CostModel::Length } else { CostModel::LightTime },
    };
    let mut controlled = Vec::new();
    for k in 0..rng.gen_range(1..=3) {
        let o = *ids.choose(rng)?;
        let d = *ids.choose(rng)?;
        if o == d {
            continue;
        }
        let depart = rng.gen_range(0..=2);
        if let Some(mut v) = controlled_vehicle(&net, VehicleId(k), depart, o, d, &ledger, &params) {
            v.routes.retain(|r| r.streets.len() <= 4);
            if !v.routes.is_empty() {
                controlled.push(v);
            }
        }
    }
    if controlled.is_empty() {
        return None;
    }
    let horizon = default_horizon(&net, &controlled, &simulated, Some(horizon_cap));
    let instance = SchedulingInstance {
        network: net,
        horizon,
        controlled,
        simulated,
        protect_simulated: rng.gen_bool(0.3),
    };
    instance.validate().ok()?;
    Some(instance)
}

/// A narrow shortest corridor and a wider bypass between two feeder streets
/// and one exit street.
pub fn bottleneck_network() -> Network {
    let step = 5;
    let street = |name: &str, len: f64, cap: u32| Street::new(name, len, cap, step).expect("valid street");
    let streets = vec![
        street("west", 100.0, 6),
        street("south", 100.0, 6),
        street("c1", 200.0, 3),
        street("c2", 200.0, 3),
        street("b1", 250.0, 8),
        street("b2", 250.0, 8),
        street("exit", 100.0, 20),
    ];
    let links = [(0, 2), (0, 4), (1, 2), (1, 4), (2, 3), (4, 5), (3, 6), (5, 6)]
        .into_iter()
        .map(|(a, b)| Link { from: StreetId(a), to: StreetId(b) })
        .collect();
    Network::new(step, streets, links, vec![]).expect("valid network")
}

/// Rush-hour demand towards the exit of [`bottleneck_network`]: one or two
/// arrivals per step, more than the corridor can carry.
pub fn rush_hour(seed: u64, vehicles: usize) -> (Network, Vec<Demand>) {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let net = bottleneck_network();
    let feeders = [StreetId(0), StreetId(1)];
    let exit = StreetId(6);
    let mut demand = Vec::with_capacity(vehicles);
    let mut depart = 0;
    while demand.len() < vehicles {
        let burst = rng.gen_range(1..=2).min(vehicles - demand.len());
        let first = rng.gen_range(0..2);
        for k in 0..burst {
            demand.push(Demand {
                id: VehicleId(demand.len() as u32),
                class: VehicleClass::Controlled,
                depart,
                origin: feeders[(first + k) % 2],
                destination: exit,
                fixed: None,
            });
        }
        depart += rng.gen_range(1..=2);
    }
    (net, demand)
}

/// Self-consistent background traffic: `count` vehicles on random walks of
/// 3 to 8 streets, departing uniformly in `0..=depart_until`. Steps are
/// played in order; a vehicle moves on once its travel time has passed and
/// the next street has room, and ends its trip early if it is still stuck
/// when its street's maximum travel time runs out.
pub fn background_traffic<R: Rng>(net: &Network, count: usize, depart_until: Step, rng: &mut R) -> Vec<Vec<Stay>> {
    struct Trip {
        plan: Vec<StreetId>,
        depart: Step,
        stays: Vec<Stay>,
        ready: Step,
        done: bool,
    }
    let ids: Vec<StreetId> = net.street_ids().collect();
    let mut trips: Vec<Trip> = (0..count)
        .map(|_| {
            let len = rng.gen_range(3..=8);
            let mut plan = vec![*ids.choose(rng).expect("non-empty network")];
            while plan.len() < len {
                let last = plan[plan.len() - 1];
                let next: Vec<StreetId> =
                    net.successors(last).iter().copied().filter(|n| !plan.contains(n)).collect();
                match next.choose(rng) {
                    Some(&n) => plan.push(n),
                    None => break,
                }
            }
            Trip { plan, depart: rng.gen_range(0..=depart_until), stays: Vec::new(), ready: 0, done: false }
        })
        .collect();
    let mut on = vec![0u32; net.street_count()];
    let mut t: Step = 0;
    while trips.iter().any(|v| !v.done) {
        let mut entered = Vec::new();
        // Leaving the network never needs room.
        for v in trips.iter_mut().filter(|v| !v.done && !v.stays.is_empty()) {
            if v.ready <= t && v.stays.len() == v.plan.len() {
                let last = v.stays.last_mut().expect("started");
                last.exit = t;
                on[last.street.index()] -= 1;
                v.done = true;
            }
        }
        let mut moved = true;
        while moved {
            moved = false;
            for (i, v) in trips.iter_mut().enumerate() {
                if v.done || entered.contains(&i) {
                    continue;
                }
                let wants = if v.stays.is_empty() { v.depart <= t } else { v.ready <= t };
                if !wants {
                    continue;
                }
                let next = v.plan[v.stays.len()];
                if on[next.index()] >= net.street(next).capacity {
                    continue;
                }
                if let Some(last) = v.stays.last_mut() {
                    last.exit = t;
                    on[last.street.index()] -= 1;
                }
                on[next.index()] += 1;
                v.stays.push(Stay { street: next, enter: t, exit: 0 });
                entered.push(i);
                moved = true;
            }
        }
        for v in trips.iter_mut().filter(|v| !v.done) {
            if let Some(last) = v.stays.last_mut() {
                if last.enter < t && last.enter + net.street(last.street).max_travel_time == t {
                    last.exit = t;
                    on[last.street.index()] -= 1;
                    v.done = true;
                }
            }
        }
        for i in entered {
            let v = &mut trips[i];
            let last = v.stays.last().expect("just entered");
            v.ready = t + net.street(last.street).travel_time(on[last.street.index()]);
        }
        t += 1;
    }
    trips.into_iter().map(|v| v.stays).collect()
}

/// A 5x5 grid carrying `background` simulated vehicles, plus `batch`
/// controlled vehicles that all request entry at the step the last
/// background vehicle may depart. Only controlled enters are constrained.
pub fn loaded_grid(seed: u64, background: usize, batch: usize) -> SchedulingInstance {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let net = grid_network(&GridSpec::default());
    let clock = 8;
    let mut ledger = OccupancyLedger::for_network(&net);
    let simulated: Vec<VehicleState> = background_traffic(&net, background, clock, &mut rng)
        .into_iter()
        .enumerate()
        .map(|(i, stays)| {
            for s in &stays {
                ledger.add_stay(*s).expect("street of this network");
            }
            simulated_vehicle(&net, VehicleId(i as u32), stays)
        })
        .collect();
    let ids: Vec<StreetId> = net.street_ids().collect();
    let mut controlled = Vec::new();
    while controlled.len() < batch {
        let (o, d) = (*ids.choose(&mut rng).expect("streets"), *ids.choose(&mut rng).expect("streets"));
        if o == d {
            continue;
        }
        let id = VehicleId((background + controlled.len()) as u32);
        if let Some(v) = controlled_vehicle(&net, id, clock, o, d, &ledger, &RouteParams::default()) {
            controlled.push(v);
        }
    }
    SchedulingInstance {
        horizon: default_horizon(&net, &controlled, &simulated, None),
        network: net,
        controlled,
        simulated,
        protect_simulated: false,
    }
}

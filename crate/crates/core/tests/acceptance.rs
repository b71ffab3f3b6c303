//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cutc_core::controller::{run, ControllerConfig};
use cutc_core::io;
use cutc_core::microsim::{
    baseline_requests, compare_baseline, metrics, simulate, EventKind, EventLog, SimConfig, SimRequest,
};
use cutc_core::net_model::{Link, Network, OccupancyLedger, Roundabout, Stay, Step, Street, StreetId};
use cutc_core::preprocessor::{compute_windows, Route, RouteId, VehicleClass, VehicleId, VehicleState};
use cutc_core::scenario::{
    grid_network, line_network, loaded_grid, random_demand, random_medium_instance, random_small_instance,
    rush_hour, GridSpec,
};
use cutc_core::scheduler::{
    brute_force_solve, check, evaluate, solve, BruteForceError, Optimality, Schedule, SchedulingInstance,
    SolveConfig, SolveError, VehicleStay,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn budget(secs: f64) -> SolveConfig {
    SolveConfig { budget: Duration::from_secs_f64(secs), ..Default::default() }
}

// ------------------------------------------------------------ naive oracle

/// Vehicles on `street` at `t`, counted from scratch.
fn naive_occ(stays: &[VehicleStay], street: StreetId, t: Step) -> u32 {
    stays.iter().filter(|s| s.street == street && s.enter <= t && t < s.exit).count() as u32
}

fn naive_travel(street: &Street, occ: u32) -> Step {
    if occ >= street.thresholds.heavy_from {
        street.travel.heavy
    } else if occ >= street.thresholds.medium_from {
        street.travel.medium
    } else {
        street.travel.light
    }
}

/// Rule tags broken by `schedule`, evaluated directly from the rule text.
fn naive_tags(schedule: &Schedule, inst: &SchedulingInstance) -> BTreeSet<&'static str> {
    let net = &inst.network;
    let mut tags = BTreeSet::new();
    for v in &inst.controlled {
        let mine: Vec<&VehicleStay> = schedule.stays.iter().filter(|s| s.vehicle == v.id).collect();
        let Some(route) = schedule.routes.get(&v.id).and_then(|r| v.routes.iter().find(|x| x.id == *r)) else {
            tags.insert("r1");
            continue;
        };
        if mine.iter().any(|s| !route.streets.contains(&s.street)) {
            tags.insert("r4");
        }
        let per_street: Vec<Vec<&&VehicleStay>> =
            route.streets.iter().map(|st| mine.iter().filter(|s| s.street == *st).collect()).collect();
        if per_street.iter().any(|p| p.len() != 1) {
            tags.insert("r4");
            continue;
        }
        let ordered: Vec<&VehicleStay> = per_street.iter().map(|p| *p[0]).collect();
        if ordered[0].enter != v.depart {
            tags.insert("r5");
        }
        for (i, s) in ordered.iter().enumerate() {
            let w = route.windows[i];
            if i > 0 && (s.enter < v.depart + w.min_enter || s.enter > v.depart + w.max_enter) {
                tags.insert("r4");
            }
            if s.enter > inst.horizon {
                tags.insert("r4");
            }
            let max_tt = net.street(s.street).max_travel_time;
            if s.exit <= s.enter || s.exit > s.enter + max_tt || s.exit > inst.horizon {
                tags.insert("r6");
            }
            if let Some(next) = ordered.get(i + 1) {
                if next.enter != s.exit {
                    tags.insert("r12");
                }
            }
        }
    }
    for v in &inst.simulated {
        let mut got: Vec<Stay> = schedule.stays.iter().filter(|s| s.vehicle == v.id).map(|s| s.stay()).collect();
        let mut want = v.fixed_schedule.clone().unwrap_or_default();
        got.sort();
        want.sort();
        if got != want || schedule.routes.get(&v.id) != Some(&v.routes[0].id) {
            tags.insert("r2");
        }
    }
    let controlled: BTreeSet<VehicleId> = inst.controlled.iter().map(|v| v.id).collect();
    for s in &schedule.stays {
        let street = net.street(s.street);
        let occ = naive_occ(&schedule.stays, s.street, s.enter);
        if controlled.contains(&s.vehicle) || inst.protect_simulated {
            if occ > street.capacity {
                tags.insert("r13");
            }
            if s.exit < s.enter + naive_travel(street, occ) {
                tags.insert("r11");
            }
        }
        for rb in net.roundabouts().iter().filter(|rb| rb.members.contains(&s.street)) {
            let total: u32 = rb.members.iter().map(|m| naive_occ(&schedule.stays, *m, s.enter)).sum();
            if total > rb.capacity {
                tags.insert("r14");
            }
        }
    }
    tags
}

fn lib_tags(schedule: &Schedule, inst: &SchedulingInstance) -> BTreeSet<&'static str> {
    check(schedule, inst).iter().map(|v| v.rule.tag()).collect()
}

// ------------------------------------------------------------ criterion 1

fn oracle_equivalence() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let (mut feasible, mut infeasible) = (0, 0);
    for i in 0..200 {
        let inst = random_small_instance(&mut rng);
        let brute = brute_force_solve(&inst);
        let sol = solve(&inst, &budget(60.0));
        match (brute, sol) {
            (Ok((bs, bo)), Ok(s)) => {
                ensure(s.optimality == Optimality::Proven, || format!("instance {i}: not proven"))?;
                let a = evaluate(&s.schedule, &inst).map_err(|e| format!("instance {i}: solve: {e}"))?;
                let b = evaluate(&bs, &inst).map_err(|e| format!("instance {i}: brute: {e}"))?;
                ensure(a == b && b == bo, || format!("instance {i}: solve {a:?} vs brute {b:?}"))?;
                feasible += 1;
            }
            (Err(BruteForceError::Infeasible { .. }), Err(SolveError::Infeasible { .. })) => infeasible += 1,
            (b, s) => return Err(format!("instance {i}: brute {b:?} vs solve {s:?}")),
        }
    }
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(120), || format!("took {elapsed:?}"))?;
    Ok(format!("200 instances ({feasible} feasible, {infeasible} infeasible) identical objectives in {elapsed:.1?}"))
}

// ------------------------------------------------------------ criterion 2

/// Single-edit variants of a valid schedule, labelled with the rule each
/// edit is aimed at.
fn mutations(inst: &SchedulingInstance, valid: &Schedule) -> Vec<(&'static str, Schedule)> {
    let mut out = Vec::new();
    for v in &inst.controlled {
        let mut idx: Vec<usize> = (0..valid.stays.len()).filter(|&i| valid.stays[i].vehicle == v.id).collect();
        idx.sort_by_key(|&i| valid.stays[i].enter);
        let (first, last) = (idx[0], idx[idx.len() - 1]);
        let edit = |f: &dyn Fn(&mut Schedule)| {
            let mut s = valid.clone();
            f(&mut s);
            s
        };
        out.push(("r1", edit(&|s| {
            s.routes.remove(&v.id);
        })));
        out.push(("r4", edit(&|s| {
            s.stays.remove(last);
        })));
        let st = valid.stays[first];
        if st.enter > 0 {
            out.push(("r5", edit(&|s| s.stays[first].enter -= 1)));
        }
        if st.enter + 1 < st.exit {
            out.push(("r5", edit(&|s| s.stays[first].enter += 1)));
        }
        let st = valid.stays[last];
        let max_tt = inst.network.street(st.street).max_travel_time;
        out.push(("r6", edit(&|s| s.stays[last].exit = inst.horizon + 1)));
        out.push(("r6", edit(&|s| s.stays[last].exit = st.enter + max_tt + 1)));
        if st.exit > st.enter + 1 {
            out.push(("r11", edit(&|s| s.stays[last].exit = st.enter + 1)));
        }
        for w in idx.windows(2) {
            let i = w[0];
            out.push(("r12", edit(&|s| s.stays[i].exit += 1)));
            if valid.stays[i].exit > valid.stays[i].enter + 1 {
                out.push(("r12", edit(&|s| s.stays[i].exit -= 1)));
            }
        }
    }
    out
}

fn one_street_vehicle(net: &Network, id: u32, street: StreetId, depart: Step) -> VehicleState {
    let empty = OccupancyLedger::for_network(net);
    VehicleState {
        id: VehicleId(id),
        class: VehicleClass::Controlled,
        depart,
        origin: street,
        destination: street,
        routes: vec![Route {
            id: RouteId(0),
            vehicle: VehicleId(id),
            streets: vec![street],
            windows: compute_windows(net, &[street], &empty, depart),
            cost: 1,
        }],
        fixed_schedule: None,
    }
}

/// `cap` vehicles enter `crowded` at 0 and leave before a last vehicle
/// enters `late` at `d`. Returns the instance, that valid schedule, and the
/// mutation where the early vehicles stay until their maximum travel time.
fn crowding_fixture(net: Network, crowded: StreetId, late: StreetId, early: u32, d: Step) -> (SchedulingInstance, Schedule, Schedule) {
    let mut controlled: Vec<VehicleState> = (0..early).map(|i| one_street_vehicle(&net, i, crowded, 0)).collect();
    controlled.push(one_street_vehicle(&net, early, late, d));
    let c = net.street(crowded);
    let l = net.street(late);
    let mut valid = Schedule::default();
    for v in &controlled {
        valid.routes.insert(v.id, RouteId(0));
    }
    for i in 0..early {
        valid.stays.push(VehicleStay { vehicle: VehicleId(i), street: crowded, enter: 0, exit: naive_travel(c, early) });
    }
    valid.stays.push(VehicleStay { vehicle: VehicleId(early), street: late, enter: d, exit: d + l.max_travel_time });
    valid.normalize();
    let mut mutated = valid.clone();
    for s in mutated.stays.iter_mut().filter(|s| s.vehicle.0 < early) {
        s.exit = c.max_travel_time;
    }
    let horizon = 4 * (c.max_travel_time + l.max_travel_time + d);
    let inst = SchedulingInstance { network: net, horizon, controlled, simulated: vec![], protect_simulated: false };
    (inst, valid, mutated)
}

fn soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC2);
    let mut solved = 0;
    let mut infeasible = 0;
    let mut timed_out = 0;
    let mut aimed: BTreeMap<&'static str, usize> = BTreeMap::new();
    let mut compared = 0;
    let mut i = 0;
    while solved < 500 {
        ensure(i < 3000, || format!("only {solved} solved in {i} instances"))?;
        i += 1;
        let inst = if i % 2 == 0 { random_small_instance(&mut rng) } else { random_medium_instance(&mut rng) };
        let sol = match solve(&inst, &budget(1.0)) {
            Ok(s) => s,
            Err(SolveError::Infeasible { .. }) => {
                infeasible += 1;
                continue;
            }
            Err(SolveError::Timeout) => {
                timed_out += 1;
                continue;
            }
            Err(e) => return Err(format!("instance {i}: {e}")),
        };
        solved += 1;
        let v = check(&sol.schedule, &inst);
        ensure(v.is_empty(), || format!("instance {i}: {}", v[0]))?;
        ensure(naive_tags(&sol.schedule, &inst).is_empty(), || format!("instance {i}: oracle disagrees"))?;
        for (rule, m) in mutations(&inst, &sol.schedule) {
            let lib = lib_tags(&m, &inst);
            let naive = naive_tags(&m, &inst);
            ensure(lib == naive, || format!("instance {i} {rule} edit: check {lib:?} vs oracle {naive:?}"))?;
            compared += 1;
            if naive == BTreeSet::from([rule]) {
                *aimed.entry(rule).or_default() += 1;
            }
        }
    }
    // capacity and roundabout edits on purpose-built fixtures
    for _ in 0..100 {
        let cap = rng.gen_range(2..=4);
        let net = line_network(&[rng.gen_range(60.0..300.0), 100.0], cap, 5);
        let c = net.street(StreetId(0));
        let lo = naive_travel(c, cap);
        let d = rng.gen_range(lo..c.max_travel_time);
        let (inst, valid, mutated) = crowding_fixture(net, StreetId(0), StreetId(0), cap, d);
        ensure(lib_tags(&valid, &inst).is_empty(), || "r13 fixture invalid".into())?;
        ensure(lib_tags(&mutated, &inst) == BTreeSet::from(["r13"]), || format!("r13: {:?}", lib_tags(&mutated, &inst)))?;
        *aimed.entry("r13").or_default() += 1;

        let ring_cap = rng.gen_range(1..=3);
        let streets = vec![
            Street::new("a", rng.gen_range(40.0..200.0), 8, 5).unwrap(),
            Street::new("b", rng.gen_range(40.0..200.0), 8, 5).unwrap(),
        ];
        let ring = Roundabout { name: "R".into(), capacity: ring_cap, members: vec![StreetId(0), StreetId(1)] };
        let net = Network::new(5, streets, Vec::<Link>::new(), vec![ring]).unwrap();
        let a = net.street(StreetId(0));
        let d = rng.gen_range(naive_travel(a, ring_cap)..a.max_travel_time);
        let (inst, valid, mutated) = crowding_fixture(net, StreetId(0), StreetId(1), ring_cap, d);
        ensure(lib_tags(&valid, &inst).is_empty(), || "r14 fixture invalid".into())?;
        ensure(lib_tags(&mutated, &inst) == BTreeSet::from(["r14"]), || format!("r14: {:?}", lib_tags(&mutated, &inst)))?;
        *aimed.entry("r14").or_default() += 1;
    }
    for rule in ["r1", "r4", "r5", "r6", "r11", "r12", "r13", "r14"] {
        let n = aimed.get(rule).copied().unwrap_or(0);
        ensure(n >= 20, || format!("only {n} single-rule edits for {rule}"))?;
    }
    Ok(format!(
        "{solved} schedules clean ({infeasible} infeasible, {timed_out} without a schedule in budget), {compared} edits agree with the oracle, single-rule edits {aimed:?}"
    ))
}

// ------------------------------------------------------------ criterion 3

fn occupancy_fidelity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC3);
    let mut boundary = 0;
    let mut queries = 0;
    for trial in 0..1000 {
        let streets = rng.gen_range(1..=4);
        let mut ledger = OccupancyLedger::new(streets);
        let mut stays: Vec<VehicleStay> = Vec::new();
        for v in 0..rng.gen_range(0..30) {
            let enter = rng.gen_range(0..20);
            let s = VehicleStay {
                vehicle: VehicleId(v),
                street: StreetId(rng.gen_range(0..streets as u32)),
                enter,
                exit: enter + rng.gen_range(1..10),
            };
            ledger.add_stay(s.stay()).unwrap();
            stays.push(s);
        }
        for _ in 0..rng.gen_range(0..=stays.len() / 3) {
            let s = stays.swap_remove(rng.gen_range(0..stays.len()));
            ensure(ledger.remove_stay(s.stay()).unwrap(), || format!("trial {trial}: remove failed"))?;
        }
        for street in 0..streets as u32 {
            let street = StreetId(street);
            for t in 0..32 {
                let want = naive_occ(&stays, street, t);
                let got = ledger.occupancy(street, t).unwrap();
                ensure(got == want, || format!("trial {trial}: street {} t {t}: {got} vs {want}", street.0))?;
                queries += 1;
                if stays.iter().any(|s| s.street == street && s.exit == t) {
                    boundary += 1;
                }
            }
        }
    }
    ensure(boundary > 1000, || format!("only {boundary} exit-boundary queries"))?;
    Ok(format!("1000 event sets, {queries} queries ({boundary} at an exit step) all exact"))
}

// ------------------------------------------------------------ criterion 4

fn scalability() -> Outcome {
    let mut worst = Duration::ZERO;
    let mut proven = 0;
    for seed in 0..20 {
        let inst = loaded_grid(seed, 200, 5);
        let started = Instant::now();
        let sol = solve(&inst, &budget(4.5));
        let elapsed = started.elapsed();
        worst = worst.max(elapsed);
        let sol = sol.map_err(|e| format!("trial {seed}: {e}"))?;
        ensure(elapsed < Duration::from_secs(5), || format!("trial {seed}: {elapsed:?}"))?;
        ensure(check(&sol.schedule, &inst).is_empty(), || format!("trial {seed}: invalid schedule"))?;
        if sol.optimality == Optimality::Proven {
            proven += 1;
        }
    }
    let net = grid_network(&GridSpec::default());
    Ok(format!(
        "{} streets, 200 simulated + 5 new: 20/20 schedules ({proven} proven), slowest {worst:.2?}",
        net.street_count()
    ))
}

// ------------------------------------------------------------ criterion 5

/// Highest occupancy each street reaches during a simulation.
fn peak_occupancy(log: &EventLog, streets: usize) -> Vec<u32> {
    let mut now = vec![0i64; streets];
    let mut peak = vec![0u32; streets];
    for e in &log.events {
        match e.kind {
            EventKind::Enter(s) => {
                now[s.index()] += 1;
                peak[s.index()] = peak[s.index()].max(now[s.index()] as u32);
            }
            EventKind::Exit(s) => now[s.index()] -= 1,
            _ => {}
        }
    }
    peak
}

fn congestion() -> Outcome {
    let mut rows = Vec::new();
    for seed in 1..=5 {
        let (net, demand) = rush_hour(seed, 30);
        let baseline = simulate(&baseline_requests(&demand, &net).unwrap(), &net, &SimConfig::default());
        let peak = peak_occupancy(&baseline, net.street_count());
        let saturated = net.street_ids().filter(|s| peak[s.index()] >= net.street(*s).capacity).count();
        ensure(saturated >= 1, || format!("seed {seed}: baseline never saturates a street"))?;
        let cmp = compare_baseline(&demand, &net, &ControllerConfig::default(), &SimConfig::default())
            .map_err(|e| format!("seed {seed}: {e}"))?;
        let (o, b) = (&cmp.optimized, &cmp.baseline);
        ensure(o.avg_waiting_time <= b.avg_waiting_time, || format!("seed {seed}: waiting {o:?} vs {b:?}"))?;
        ensure(o.total_duration <= b.total_duration, || format!("seed {seed}: duration {o:?} vs {b:?}"))?;
        let better = |x: f64, y: f64| y > 0.0 && x <= 0.9 * y;
        ensure(
            better(o.avg_waiting_time, b.avg_waiting_time) || better(o.total_duration, b.total_duration),
            || format!("seed {seed}: no 10% improvement"),
        )?;
        rows.push(format!(
            "seed {seed}: wait {:.1}->{:.1}s, total {:.0}->{:.0}s",
            b.avg_waiting_time, o.avg_waiting_time, b.total_duration, o.total_duration
        ));
    }
    Ok(format!("5/5 ({})", rows.join("; ")))
}

// ------------------------------------------------------------ criterion 6

fn req(id: u32, release: u32, route: &[u32]) -> SimRequest {
    SimRequest { id: VehicleId(id), request: release, release, route: route.iter().map(|&s| StreetId(s)).collect() }
}

fn microsim_truth() -> Outcome {
    let cfg = SimConfig::default();
    // 125 m at 45 km/h (12.5 m/s) is 10 s
    let net = line_network(&[125.0], 6, 5);
    let log = simulate(&[req(0, 0, &[0])], &net, &cfg);
    let got: Vec<(u32, EventKind)> = log.events.iter().map(|e| (e.time, e.kind)).collect();
    let s0 = StreetId(0);
    ensure(
        got == vec![(0, EventKind::Request), (0, EventKind::Enter(s0)), (10, EventKind::Reach(s0)), (10, EventKind::Exit(s0))],
        || format!("free street: {got:?}"),
    )?;
    let m = metrics(&log).unwrap();
    ensure(m.avg_speed == 12.5 && m.avg_duration == 10.0, || format!("free street: {m:?}"))?;

    // b has capacity 1; alone on it a car is heavy (15 km/h), 125 m takes 30 s.
    // The second car reaches the end of a at 10 s, waits for b to empty at 30 s,
    // then needs another 30 s.
    let streets = vec![Street::new("a", 125.0, 6, 5).unwrap(), Street::new("b", 125.0, 1, 5).unwrap()];
    let net = Network::new(5, streets, vec![Link { from: StreetId(0), to: StreetId(1) }], vec![]).unwrap();
    let log = simulate(&[req(0, 0, &[1]), req(1, 0, &[0, 1])], &net, &cfg);
    let got: Vec<(u32, EventKind)> =
        log.events.iter().filter(|e| e.vehicle == VehicleId(1)).map(|e| (e.time, e.kind)).collect();
    let (a, b) = (StreetId(0), StreetId(1));
    let want = vec![
        (0, EventKind::Request),
        (0, EventKind::Enter(a)),
        (10, EventKind::Reach(a)),
        (30, EventKind::Exit(a)),
        (30, EventKind::Enter(b)),
        (60, EventKind::Reach(b)),
        (60, EventKind::Exit(b)),
    ];
    ensure(got == want, || format!("blocking: {got:?}"))?;
    let m = metrics(&log).unwrap();
    ensure(m.total_duration == 60.0 && m.avg_waiting_time == 10.0 && m.avg_duration == 45.0, || format!("blocking: {m:?}"))?;

    let mut worst: f64 = 0.0;
    let mut runs = 0;
    for seed in 0..4 {
        let (net, demand) = rush_hour(seed + 10, 20);
        let out = run(&demand, &net, &ControllerConfig::default()).map_err(|e| e.to_string())?;
        for reqs in [SimRequest::from_trace(&out.trace, &net), baseline_requests(&demand, &net).unwrap()] {
            let m = metrics(&simulate(&reqs, &net, &cfg)).map_err(|e| e.to_string())?;
            // one tick of light-tier travel per street is the quantization bound
            let tol = 12.5 * f64::from(cfg.tick_seconds) * 4.0;
            let gap = (m.avg_speed * m.avg_duration - m.avg_route_length).abs();
            ensure(gap <= tol, || format!("identity off by {gap} m"))?;
            worst = worst.max(gap);
            runs += 1;
        }
    }
    Ok(format!("fixtures exact; speed*duration vs length over {runs} runs, largest gap {worst:.2e} m"))
}

// ------------------------------------------------------------ criterion 7

fn round_trip_and_determinism() -> Outcome {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/town/network.txt");
    let town = io::parse_network(&std::fs::read_to_string(fixture).unwrap()).map_err(|e| e.to_string())?;
    let mut nets = vec![town, grid_network(&GridSpec::default()), rush_hour(0, 1).0];
    let mut rng = ChaCha8Rng::seed_from_u64(0xC7);
    let mut checked = 0;
    for i in 0..60 {
        let inst = if i % 2 == 0 { random_small_instance(&mut rng) } else { random_medium_instance(&mut rng) };
        let text = io::write_instance(&inst);
        let back = io::parse_instance(&text, &inst.network).map_err(|e| e.to_string())?;
        ensure(back == inst && io::write_instance(&back) == text, || format!("instance {i}"))?;
        if let Ok(sol) = solve(&inst, &budget(0.5)) {
            let file = io::ScheduleFile { optimality: Some(sol.optimality), objective: Some(sol.objective), schedule: sol.schedule };
            let text = io::write_schedule(&file, &inst.network);
            let back = io::parse_schedule(&text, &inst.network).map_err(|e| e.to_string())?;
            ensure(back == file && io::write_schedule(&back, &inst.network) == text, || format!("schedule {i}"))?;
        }
        nets.push(inst.network);
        checked += 2;
    }
    for net in &nets {
        let text = io::write_network(net);
        let back = io::parse_network(&text).map_err(|e| e.to_string())?;
        ensure(&back == net && io::write_network(&back) == text, || "network".into())?;
        checked += 1;
    }

    let cfg = ControllerConfig { solve: SolveConfig { workers: 1, seed: 17, ..budget(2.0) }, ..Default::default() };
    let scenarios = [rush_hour(4, 30), {
        let net = grid_network(&GridSpec { capacity: 4, ..Default::default() });
        let demand = random_demand(&net, 40, 2.0, &mut ChaCha8Rng::seed_from_u64(4));
        (net, demand)
    }];
    for (k, (net, demand)) in scenarios.iter().enumerate() {
        let text = io::write_demand(demand, net);
        let back = io::parse_demand(&text, net).map_err(|e| e.to_string())?;
        ensure(&back == demand && io::write_demand(&back, net) == text, || format!("demand {k}"))?;

        let traces: Vec<String> = (0..2)
            .map(|_| run(demand, net, &cfg).map(|o| io::write_trace(&o.trace, net)).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
        ensure(traces[0] == traces[1], || format!("scenario {k}: traces differ"))?;
        let trace = io::parse_trace(&traces[0], net).map_err(|e| e.to_string())?;
        ensure(io::write_trace(&trace, net) == traces[0], || format!("trace {k}"))?;

        let log = simulate(&SimRequest::from_trace(&trace, net), net, &SimConfig::default());
        let text = io::write_event_log(&log, net);
        let back = io::parse_event_log(&text, net).map_err(|e| e.to_string())?;
        ensure(back == log && io::write_event_log(&back, net) == text, || format!("event log {k}"))?;

        let m = metrics(&log).map_err(|e| e.to_string())?;
        let text = io::write_metrics(&m);
        let back = io::parse_metrics(&text).map_err(|e| e.to_string())?;
        ensure(back == m && io::write_metrics(&back) == text, || format!("metrics {k}"))?;
        checked += 5;
    }
    Ok(format!("{checked} values round-trip byte-identically; repeated runs give identical traces"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("1 oracle equivalence", oracle_equivalence),
        ("2 soundness", soundness),
        ("3 occupancy fidelity", occupancy_fidelity),
        ("4 scalability", scalability),
        ("5 congestion", congestion),
        ("6 micro-simulator truth", microsim_truth),
        ("7 round-trip and determinism", round_trip_and_determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, f) in criteria {
        let started = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS criterion {name} [{secs:.1}s]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name} [{secs:.1}s]: {detail}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

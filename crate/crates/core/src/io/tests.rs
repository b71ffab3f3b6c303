use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::controller::{run, ControllerConfig};
use crate::microsim::{metrics, simulate, SimConfig, SimRequest};
use crate::scenario::{grid_network, random_demand, random_medium_instance, random_small_instance, GridSpec};
use crate::scheduler::{solve, SolveConfig};

const RING: &str = "\
step_seconds 5
street in 100 6
street out 100 6
street a 30 4
street b 30 4   # ring arcs
street c 30 4
link in a
link a b
link b c
link c a
link b out
ring rb 5 a b c
";

fn small_grid() -> Network {
    grid_network(&GridSpec { rows: 2, cols: 3, capacity: 4, ..Default::default() })
}

#[test]
fn ring_network_contracts_and_round_trips() {
    let net = parse_network(RING).unwrap();
    assert_eq!(net.roundabouts().len(), 1);
    assert_eq!(net.roundabouts()[0].capacity, 5);
    let again = parse_network(&write_network(&net)).unwrap();
    assert_eq!(again, net);
    assert_eq!(write_network(&again), write_network(&net));
}

#[test]
fn network_errors_name_the_line() {
    let cases = [
        ("street a 10 1\n", 1, "step_seconds"),
        ("step_seconds 5\nstreet a 10 0\n", 2, "capacity"),
        ("step_seconds 5\nstreet a 10 1\nstreet a 10 1\n", 3, "duplicate"),
        ("step_seconds 5\nstreet a 10 1\n\nlink a b\n", 4, "unknown street `b`"),
        ("step_seconds 5\nstreet a ten 1\n", 2, "length"),
        ("step_seconds 5\nstreet a 10 1 color=red\n", 2, "color"),
        ("step_seconds 5\nbridge a\n", 2, "unknown record"),
        ("step_seconds 5\nstreet a 10 2\nstreet b 10 2\nring r 2 a b\n", 4, "cycle"),
        ("# empty\n", 1, "step_seconds"),
    ];
    for (text, line, needle) in cases {
        let e = parse_network(text).unwrap_err();
        assert_eq!(e.line, line, "{text:?}: {e}");
        assert!(e.message.contains(needle), "{text:?}: {e}");
    }
}

#[test]
fn street_overrides_survive() {
    let text = "step_seconds 5\nstreet a 150 9 medium_from=2 heavy_from=8 max_tt=40\n";
    let net = parse_network(text).unwrap();
    let s = net.street(StreetId(0));
    assert_eq!((s.thresholds.medium_from, s.thresholds.heavy_from, s.max_travel_time), (2, 8, 40));
    assert_eq!(parse_network(&write_network(&net)).unwrap(), net);
}

#[test]
fn demand_round_trip_with_stays() {
    let net = small_grid();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut demand = random_demand(&net, 12, 2.0, &mut rng);
    let text = "\
vehicle 100 simulated 2 0.0>0.1 0.1>0.2
stay 100 0.0>0.1 2 5
stay 100 0.1>0.2 5 9
";
    demand.extend(parse_demand(text, &net).unwrap());
    let written = write_demand(&demand, &net);
    assert_eq!(parse_demand(&written, &net).unwrap(), demand);
}

#[test]
fn demand_errors_name_the_line() {
    let net = small_grid();
    let cases = [
        ("vehicle 1 controlled 0 0.0>0.1 nowhere\n", 1, "nowhere"),
        ("vehicle 1 bus 0 0.0>0.1 0.1>0.2\n", 1, "class"),
        ("vehicle 1 controlled 0 0.0>0.1 0.1>0.2\nvehicle 1 controlled 0 0.0>0.1 0.1>0.2\n", 2, "duplicate"),
        ("vehicle 1 controlled 0 0.0>0.1 0.1>0.2\nstay 1 0.0>0.1 0 2\n", 2, "controlled"),
        ("stay 4 0.0>0.1 0 2\n", 1, "undeclared"),
        ("vehicle 1 simulated 0 0.0>0.1 0.1>0.2\n", 1, "no stays"),
        ("vehicle 1 simulated 0 0.0>0.1 0.1>0.2\nstay 1 0.0>0.1 0 2\nstay 1 0.1>0.2 3 5\n", 1, "gap-free"),
        ("vehicle 1 simulated 0 0.0>0.1 0.1>0.2\nstay 1 0.0>0.1 2 2\n", 2, "after"),
    ];
    for (text, line, needle) in cases {
        let e = parse_demand(text, &net).unwrap_err();
        assert_eq!(e.line, line, "{text:?}: {e}");
        assert!(e.message.contains(needle), "{text:?}: {e}");
    }
}

#[test]
fn schedule_round_trip_after_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let instance = random_small_instance(&mut rng);
    let sol = solve(&instance, &SolveConfig::default()).unwrap();
    let file = ScheduleFile {
        optimality: Some(sol.optimality),
        objective: Some(sol.objective),
        schedule: sol.schedule,
    };
    let text = write_schedule(&file, &instance.network);
    assert_eq!(parse_schedule(&text, &instance.network).unwrap(), file);
}

#[test]
fn trace_and_event_log_round_trip() {
    let net = small_grid();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let demand = random_demand(&net, 10, 1.0, &mut rng);
    let out = run(&demand, &net, &ControllerConfig::default()).unwrap();
    let text = write_trace(&out.trace, &net);
    assert_eq!(parse_trace(&text, &net).unwrap(), out.trace);

    let log = simulate(&SimRequest::from_trace(&out.trace, &net), &net, &SimConfig::default());
    let text = write_event_log(&log, &net);
    assert_eq!(parse_event_log(&text, &net).unwrap(), log);

    let m = metrics(&log).unwrap();
    assert_eq!(parse_metrics(&write_metrics(&m)).unwrap(), m);
}

#[test]
fn trace_rejects_stays_off_route() {
    let net = small_grid();
    let text = "\
vehicle 1 controlled 0 0
route 1 0 3 0.0>0.1 0 0 0.1>0.2 2 2
stay 1 0.0>0.1 0 2
";
    let e = parse_trace(text, &net).unwrap_err();
    assert_eq!(e.line, 1);
}

#[test]
fn metrics_reject_missing_and_negative() {
    let m = MetricsReport { vehicles: 2, total_duration: 10.5, ..Default::default() };
    let text = write_metrics(&m);
    let missing: String = text.lines().filter(|l| !l.starts_with("avg_speed")).map(|l| format!("{l}\n")).collect();
    assert!(parse_metrics(&missing).unwrap_err().message.contains("avg_speed"));
    let negative = text.replace("total_duration 10.5", "total_duration -1");
    assert!(parse_metrics(&negative).unwrap_err().message.contains("non-negative"));
}

#[test]
fn config_defaults_and_validation() {
    let c = Config::parse("").unwrap();
    assert_eq!(c, Config::default());
    assert_eq!((c.step_seconds, c.tick_seconds, c.k_routes, c.similarity_threshold), (5, 1, 6, 0.5));
    let c = Config::parse("seed 7\nworkers 4\nbudget_secs 0.25\n").unwrap();
    assert_eq!((c.seed, c.workers, c.budget_secs), (7, 4, 0.25));
    assert_eq!(Config::parse("workers 0\n"), Err(ConfigError::NotPositive("workers")));
    assert_eq!(
        Config::parse("tick_seconds 2\n"),
        Err(ConfigError::TickMismatch { step: 5, tick: 2 })
    );
    assert!(matches!(Config::parse("speed 3\n"), Err(ConfigError::Parse(ParseError { line: 1, .. }))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn instances_round_trip(seed in any::<u64>(), medium in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let instance = if medium { random_medium_instance(&mut rng) } else { random_small_instance(&mut rng) };
        let net_text = write_network(&instance.network);
        let net = parse_network(&net_text).unwrap();
        prop_assert_eq!(&net, &instance.network);
        let text = write_instance(&instance);
        let back = parse_instance(&text, &net).unwrap();
        prop_assert_eq!(&back, &instance);
        prop_assert_eq!(write_instance(&back), text);
    }

    #[test]
    fn metrics_round_trip(
        vehicles in 0usize..1000,
        values in prop::array::uniform6(0.0f64..1e7),
    ) {
        let m = MetricsReport {
            vehicles,
            total_duration: values[0],
            avg_route_length: values[1],
            avg_speed: values[2],
            avg_duration: values[3],
            avg_waiting_time: values[4],
            avg_depart_delay: values[5],
        };
        prop_assert_eq!(parse_metrics(&write_metrics(&m)).unwrap(), m);
    }

    #[test]
    fn demand_round_trip(seed in any::<u64>(), count in 0usize..30) {
        let net = small_grid();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let demand = random_demand(&net, count, 1.5, &mut rng);
        prop_assert_eq!(parse_demand(&write_demand(&demand, &net), &net).unwrap(), demand);
    }
}

#[test]
fn minimal_network() {
    let net = parse_network("step_seconds 5\nstreet a 100 3\nstreet b 80 2\nlink a b\n").unwrap();
    assert_eq!((net.street_count(), net.links().len()), (2, 1));
}

#[test]
fn zero_capacity_names_the_street() {
    let e = parse_network("step_seconds 5\nstreet main 100 3\nstreet side 80 0\n").unwrap_err();
    assert_eq!(e.line, 3);
    assert!(e.message.contains("side"), "{e}");
}

#[test]
fn schedule_events_must_pair() {
    let net = small_grid();
    let e = parse_schedule("route 1 0\nenter 1 0.0>0.1 0\nenter 1 0.1>0.2 2\n", &net).unwrap_err();
    assert_eq!(e.line, 2);
    let e = parse_schedule("exit 1 0.0>0.1 2\n", &net).unwrap_err();
    assert_eq!(e.line, 1);
    let e = parse_schedule("enter 1 0.0>0.1 0\nexit 1 0.1>0.2 2\n", &net).unwrap_err();
    assert_eq!(e.line, 2);
    let f = parse_schedule("enter 1 0.0>0.1 0\nexit 1 0.0>0.1 2\n", &net).unwrap();
    assert_eq!(f.schedule.stays.len(), 1);
}

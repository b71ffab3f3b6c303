//! Plain-text file formats.
//!
//! Every format is line based: one record per line, fields separated by
//! whitespace, `#` starts a comment. Street and roundabout names are single
//! tokens. Writers emit exactly what the parsers accept, and parse(write(x))
//! reproduces x.
//!
//! Network:
//! ```text
//! step_seconds 5
//! street <name> <length_m> <capacity> [medium_from=N] [heavy_from=N] [max_tt=N]
//! link <from> <to>
//! ring <name> <capacity> <arc> <arc> ...        # arcs in driving order
//! roundabout <name> <capacity> <street> ...     # already contracted
//! ```
//!
//! Demand:
//! ```text
//! vehicle <id> controlled|simulated <depart> <origin> <destination>
//! stay <id> <street> <enter> <exit>             # simulated vehicles only
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::controller::{Commitment, Demand, EpochReport, Trace};
use crate::microsim::{Event, EventKind, EventLog, MetricsReport};
use crate::net_model::{Network, Stay, Step, Street, StreetId, StreetOverrides};
use crate::preprocessor::{
    contract_roundabouts, ContractError, RawNetwork, RawRing, RawRoundabout, RawStreet, Route,
    RouteId, VehicleClass, VehicleId, VehicleState, Window,
};
use crate::scheduler::{Objective, Optimality, Schedule, SchedulingInstance, VehicleStay};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError { line, message: message.into() })
}

/// Non-empty, comment-stripped lines with their 1-based numbers.
fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.split('#').next().unwrap_or("");
        let fields: Vec<&str> = line.split_whitespace().collect();
        (!fields.is_empty()).then_some((i + 1, fields))
    })
}

fn num<T: FromStr>(line: usize, field: &str, what: &str) -> Result<T, ParseError> {
    field
        .parse()
        .or_else(|_| err(line, format!("bad {what} `{field}`")))
}

fn arity(line: usize, fields: &[&str], min: usize, usage: &str) -> Result<(), ParseError> {
    if fields.len() < min {
        return err(line, format!("expected `{usage}`"));
    }
    Ok(())
}

fn exact(line: usize, fields: &[&str], n: usize, usage: &str) -> Result<(), ParseError> {
    if fields.len() != n {
        return err(line, format!("expected `{usage}`"));
    }
    Ok(())
}

fn street_id(network: &Network, line: usize, name: &str) -> Result<StreetId, ParseError> {
    network
        .id_of(name)
        .or_else(|_| err(line, format!("unknown street `{name}`")))
}

fn class_of(line: usize, word: &str) -> Result<VehicleClass, ParseError> {
    match word {
        "controlled" => Ok(VehicleClass::Controlled),
        "simulated" => Ok(VehicleClass::Simulated),
        other => err(line, format!("unknown vehicle class `{other}`")),
    }
}

fn class_word(class: VehicleClass) -> &'static str {
    match class {
        VehicleClass::Controlled => "controlled",
        VehicleClass::Simulated => "simulated",
    }
}

// ---------------------------------------------------------------- network

pub fn parse_network(text: &str) -> Result<Network, ParseError> {
    let mut raw = RawNetwork::default();
    let mut step = None;
    let mut defined: HashMap<String, usize> = HashMap::new();
    let mut links = Vec::new();
    let mut ring_line = HashMap::new();
    let mut last_line = 0;
    for (line, f) in records(text) {
        last_line = line;
        match f[0] {
            "step_seconds" => {
                exact(line, &f, 2, "step_seconds <n>")?;
                let s: u32 = num(line, f[1], "step_seconds")?;
                if s == 0 {
                    return err(line, "step_seconds must be positive");
                }
                step = Some(s);
            }
            "street" => {
                arity(line, &f, 4, "street <name> <length_m> <capacity> [key=value ...]")?;
                let Some(step) = step else {
                    return err(line, "`step_seconds` must come before the first street");
                };
                let name = f[1].to_string();
                let length_m: f64 = num(line, f[2], "length")?;
                let capacity: u32 = num(line, f[3], "capacity")?;
                let mut overrides = StreetOverrides::default();
                for kv in &f[4..] {
                    let Some((k, v)) = kv.split_once('=') else {
                        return err(line, format!("expected key=value, got `{kv}`"));
                    };
                    let v: u32 = num(line, v, k)?;
                    match k {
                        "medium_from" => overrides.medium_from = Some(v),
                        "heavy_from" => overrides.heavy_from = Some(v),
                        "max_tt" => overrides.max_travel_time = Some(v),
                        _ => return err(line, format!("unknown street option `{k}`")),
                    }
                }
                if let Err(e) = Street::with_overrides(name.clone(), length_m, capacity, step, overrides) {
                    return err(line, e.to_string());
                }
                if defined.insert(name.clone(), line).is_some() {
                    return err(line, format!("duplicate street `{name}`"));
                }
                raw.streets.push(RawStreet { name, length_m, capacity, overrides });
            }
            "link" => {
                exact(line, &f, 3, "link <from> <to>")?;
                links.push((line, f[1].to_string(), f[2].to_string()));
            }
            "ring" | "roundabout" => {
                arity(line, &f, 4, "ring|roundabout <name> <capacity> <street> ...")?;
                let capacity: u32 = num(line, f[2], "capacity")?;
                if capacity == 0 {
                    return err(line, format!("`{}`: capacity must be at least 1", f[1]));
                }
                let members: Vec<String> = f[3..].iter().map(|s| s.to_string()).collect();
                ring_line.insert(f[1].to_string(), line);
                if f[0] == "ring" {
                    raw.rings.push(RawRing { name: f[1].to_string(), capacity, arcs: members });
                } else {
                    raw.roundabouts.push(RawRoundabout { name: f[1].to_string(), capacity, members });
                }
            }
            other => return err(line, format!("unknown record `{other}`")),
        }
    }
    raw.step_seconds = step.ok_or(ParseError { line: last_line.max(1), message: "missing `step_seconds`".into() })?;
    for (line, from, to) in links {
        for name in [&from, &to] {
            if !defined.contains_key(name) {
                return err(line, format!("unknown street `{name}`"));
            }
        }
        raw.links.push((from, to));
    }
    for r in &raw.roundabouts {
        for m in &r.members {
            if !defined.contains_key(m) {
                return err(ring_line[&r.name], format!("roundabout `{}`: unknown street `{m}`", r.name));
            }
        }
    }
    contract_roundabouts(&raw).map_err(|e| {
        let line = match &e {
            ContractError::TooFewArcs { ring }
            | ContractError::UnknownArc { ring, .. }
            | ContractError::SharedArc { ring, .. }
            | ContractError::NotACycle { ring, .. }
            | ContractError::RingToRing { ring, .. } => ring_line.get(ring).copied(),
            ContractError::Net(_) => None,
        };
        ParseError { line: line.unwrap_or(last_line), message: e.to_string() }
    })
}

pub fn write_network(network: &Network) -> String {
    let mut out = String::new();
    writeln!(out, "step_seconds {}", network.step_seconds()).unwrap();
    for s in network.streets() {
        writeln!(
            out,
            "street {} {} {} medium_from={} heavy_from={} max_tt={}",
            s.name, s.length_m, s.capacity, s.thresholds.medium_from, s.thresholds.heavy_from, s.max_travel_time
        )
        .unwrap();
    }
    for l in network.links() {
        writeln!(out, "link {} {}", network.name(l.from), network.name(l.to)).unwrap();
    }
    for r in network.roundabouts() {
        write!(out, "roundabout {} {}", r.name, r.capacity).unwrap();
        for m in &r.members {
            write!(out, " {}", network.name(*m)).unwrap();
        }
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------- demand

pub fn parse_demand(text: &str, network: &Network) -> Result<Vec<Demand>, ParseError> {
    let mut demand: Vec<Demand> = Vec::new();
    let mut index: HashMap<VehicleId, usize> = HashMap::new();
    let mut first_line = HashMap::new();
    for (line, f) in records(text) {
        match f[0] {
            "vehicle" => {
                exact(line, &f, 6, "vehicle <id> controlled|simulated <depart> <origin> <destination>")?;
                let id = VehicleId(num(line, f[1], "vehicle id")?);
                let class = class_of(line, f[2])?;
                let depart = num(line, f[3], "depart step")?;
                let origin = street_id(network, line, f[4])?;
                let destination = street_id(network, line, f[5])?;
                if index.insert(id, demand.len()).is_some() {
                    return err(line, format!("duplicate vehicle {id}"));
                }
                first_line.insert(id, line);
                demand.push(Demand {
                    id,
                    class,
                    depart,
                    origin,
                    destination,
                    fixed: (class == VehicleClass::Simulated).then(Vec::new),
                });
            }
            "stay" => {
                exact(line, &f, 5, "stay <id> <street> <enter> <exit>")?;
                let id = VehicleId(num(line, f[1], "vehicle id")?);
                let Some(&i) = index.get(&id) else {
                    return err(line, format!("stay for undeclared vehicle {id}"));
                };
                let street = street_id(network, line, f[2])?;
                let enter: Step = num(line, f[3], "enter step")?;
                let exit: Step = num(line, f[4], "exit step")?;
                if exit <= enter {
                    return err(line, format!("vehicle {id}: exit {exit} must be after enter {enter}"));
                }
                match &mut demand[i].fixed {
                    Some(stays) => stays.push(Stay { street, enter, exit }),
                    None => return err(line, format!("vehicle {id} is controlled and cannot have stays")),
                }
            }
            other => return err(line, format!("unknown record `{other}`")),
        }
    }
    for d in &demand {
        if let Some(stays) = &d.fixed {
            let line = first_line[&d.id];
            if stays.is_empty() {
                return err(line, format!("simulated vehicle {} has no stays", d.id));
            }
            if stays[0].street != d.origin || stays[stays.len() - 1].street != d.destination {
                return err(line, format!("vehicle {}: stays must run from origin to destination", d.id));
            }
            for w in stays.windows(2) {
                if w[0].exit != w[1].enter || !network.has_link(w[0].street, w[1].street) {
                    return err(line, format!("vehicle {}: stays are not a linked, gap-free path", d.id));
                }
            }
        }
    }
    Ok(demand)
}

pub fn write_demand(demand: &[Demand], network: &Network) -> String {
    let mut out = String::new();
    for d in demand {
        writeln!(
            out,
            "vehicle {} {} {} {} {}",
            d.id.0,
            class_word(d.class),
            d.depart,
            network.name(d.origin),
            network.name(d.destination)
        )
        .unwrap();
        for s in d.fixed.iter().flatten() {
            writeln!(out, "stay {} {} {} {}", d.id.0, network.name(s.street), s.enter, s.exit).unwrap();
        }
    }
    out
}

// ---------------------------------------------------------------- instance

fn write_route(out: &mut String, tag: &str, network: &Network, route: &Route) {
    write!(out, "{tag} {} {} {}", route.vehicle.0, route.id.0, route.cost).unwrap();
    for (s, w) in route.streets.iter().zip(&route.windows) {
        write!(out, " {} {} {}", network.name(*s), w.min_enter, w.max_enter).unwrap();
    }
    out.push('\n');
}

fn parse_route(network: &Network, line: usize, f: &[&str]) -> Result<Route, ParseError> {
    let usage = "<vehicle> <route> <cost> (<street> <min_enter> <max_enter>)...";
    if f.len() < 7 || (f.len() - 4) % 3 != 0 {
        return err(line, format!("expected `{} {usage}`", f[0]));
    }
    let vehicle = VehicleId(num(line, f[1], "vehicle id")?);
    let id = RouteId(num(line, f[2], "route id")?);
    let cost = num(line, f[3], "cost")?;
    let mut streets = Vec::new();
    let mut windows = Vec::new();
    for chunk in f[4..].chunks(3) {
        streets.push(street_id(network, line, chunk[0])?);
        windows.push(Window {
            min_enter: num(line, chunk[1], "min_enter")?,
            max_enter: num(line, chunk[2], "max_enter")?,
        });
    }
    let route = Route { id, vehicle, streets, windows, cost };
    if let Err(e) = route.validate(network) {
        return err(line, format!("vehicle {vehicle} route {id}: {e}"));
    }
    Ok(route)
}

/// Scheduling instance dump. The network is stored separately.
pub fn write_instance(instance: &SchedulingInstance) -> String {
    let net = &instance.network;
    let mut out = String::new();
    writeln!(out, "horizon {}", instance.horizon).unwrap();
    writeln!(out, "protect_simulated {}", u8::from(instance.protect_simulated)).unwrap();
    for v in instance.controlled.iter().chain(&instance.simulated) {
        writeln!(
            out,
            "vehicle {} {} {} {} {}",
            v.id.0,
            class_word(v.class),
            v.depart,
            net.name(v.origin),
            net.name(v.destination)
        )
        .unwrap();
        for r in &v.routes {
            write_route(&mut out, "route", net, r);
        }
        for s in v.fixed_schedule.iter().flatten() {
            writeln!(out, "stay {} {} {} {}", v.id.0, net.name(s.street), s.enter, s.exit).unwrap();
        }
    }
    out
}

pub fn parse_instance(text: &str, network: &Network) -> Result<SchedulingInstance, ParseError> {
    let mut horizon = None;
    let mut protect = false;
    let mut vehicles: Vec<(usize, VehicleState)> = Vec::new();
    let mut index: HashMap<VehicleId, usize> = HashMap::new();
    for (line, f) in records(text) {
        match f[0] {
            "horizon" => {
                exact(line, &f, 2, "horizon <step>")?;
                horizon = Some(num(line, f[1], "horizon")?);
            }
            "protect_simulated" => {
                exact(line, &f, 2, "protect_simulated 0|1")?;
                protect = match f[1] {
                    "0" => false,
                    "1" => true,
                    other => return err(line, format!("expected 0 or 1, got `{other}`")),
                };
            }
            "vehicle" => {
                exact(line, &f, 6, "vehicle <id> controlled|simulated <depart> <origin> <destination>")?;
                let id = VehicleId(num(line, f[1], "vehicle id")?);
                let class = class_of(line, f[2])?;
                if index.insert(id, vehicles.len()).is_some() {
                    return err(line, format!("duplicate vehicle {id}"));
                }
                vehicles.push((
                    line,
                    VehicleState {
                        id,
                        class,
                        depart: num(line, f[3], "depart step")?,
                        origin: street_id(network, line, f[4])?,
                        destination: street_id(network, line, f[5])?,
                        routes: Vec::new(),
                        fixed_schedule: (class == VehicleClass::Simulated).then(Vec::new),
                    },
                ));
            }
            "route" => {
                let route = parse_route(network, line, &f)?;
                let Some(&i) = index.get(&route.vehicle) else {
                    return err(line, format!("route for undeclared vehicle {}", route.vehicle));
                };
                vehicles[i].1.routes.push(route);
            }
            "stay" => {
                exact(line, &f, 5, "stay <id> <street> <enter> <exit>")?;
                let id = VehicleId(num(line, f[1], "vehicle id")?);
                let Some(&i) = index.get(&id) else {
                    return err(line, format!("stay for undeclared vehicle {id}"));
                };
                let stay = Stay {
                    street: street_id(network, line, f[2])?,
                    enter: num(line, f[3], "enter step")?,
                    exit: num(line, f[4], "exit step")?,
                };
                match &mut vehicles[i].1.fixed_schedule {
                    Some(s) => s.push(stay),
                    None => return err(line, format!("vehicle {id} is controlled and cannot have stays")),
                }
            }
            other => return err(line, format!("unknown record `{other}`")),
        }
    }
    let Some(horizon) = horizon else {
        return err(1, "missing `horizon`");
    };
    let mut instance = SchedulingInstance {
        network: network.clone(),
        horizon,
        controlled: Vec::new(),
        simulated: Vec::new(),
        protect_simulated: protect,
    };
    for (line, v) in vehicles {
        if let Err(e) = v.validate(network) {
            return err(line, e.to_string());
        }
        match v.class {
            VehicleClass::Controlled => instance.controlled.push(v),
            VehicleClass::Simulated => instance.simulated.push(v),
        }
    }
    if let Err(e) = instance.validate() {
        return err(1, e.to_string());
    }
    Ok(instance)
}

// ---------------------------------------------------------------- schedule

/// A schedule with the solver verdict it came with.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScheduleFile {
    pub optimality: Option<Optimality>,
    pub objective: Option<Objective>,
    pub schedule: Schedule,
}

pub fn write_schedule(file: &ScheduleFile, network: &Network) -> String {
    let mut out = String::new();
    if let Some(o) = file.optimality {
        writeln!(out, "status {}", o.label()).unwrap();
    }
    if let Some(o) = file.objective {
        writeln!(out, "objective {} {}", o.cost, o.spread).unwrap();
    }
    for (v, r) in &file.schedule.routes {
        writeln!(out, "route {} {}", v.0, r.0).unwrap();
    }
    for s in &file.schedule.stays {
        let name = network.name(s.street);
        writeln!(out, "enter {} {} {}", s.vehicle.0, name, s.enter).unwrap();
        writeln!(out, "exit {} {} {}", s.vehicle.0, name, s.exit).unwrap();
    }
    out
}

pub fn parse_schedule(text: &str, network: &Network) -> Result<ScheduleFile, ParseError> {
    let mut file = ScheduleFile::default();
    let mut open: BTreeMap<VehicleId, (usize, StreetId, Step)> = BTreeMap::new();
    for (line, f) in records(text) {
        match f[0] {
            "status" => {
                exact(line, &f, 2, "status proven|anytime-best")?;
                file.optimality = Some(match f[1] {
                    "proven" => Optimality::Proven,
                    "anytime-best" => Optimality::AnytimeBest,
                    other => return err(line, format!("unknown status `{other}`")),
                });
            }
            "objective" => {
                exact(line, &f, 3, "objective <cost> <spread>")?;
                file.objective = Some(Objective {
                    cost: num(line, f[1], "cost")?,
                    spread: num(line, f[2], "spread")?,
                });
            }
            "route" => {
                exact(line, &f, 3, "route <vehicle> <route>")?;
                let v = VehicleId(num(line, f[1], "vehicle id")?);
                if file.schedule.routes.insert(v, RouteId(num(line, f[2], "route id")?)).is_some() {
                    return err(line, format!("second route for vehicle {v}"));
                }
            }
            "enter" | "exit" => {
                exact(line, &f, 4, "enter|exit <vehicle> <street> <step>")?;
                let vehicle = VehicleId(num(line, f[1], "vehicle id")?);
                let street = street_id(network, line, f[2])?;
                let step: Step = num(line, f[3], "step")?;
                if f[0] == "enter" {
                    if let Some((prev, _, _)) = open.insert(vehicle, (line, street, step)) {
                        return err(prev, format!("vehicle {vehicle}: enter without a matching exit"));
                    }
                } else {
                    match open.remove(&vehicle) {
                        Some((_, s, enter)) if s == street => {
                            file.schedule.stays.push(VehicleStay { vehicle, street, enter, exit: step })
                        }
                        _ => return err(line, format!("vehicle {vehicle}: exit without a matching enter")),
                    }
                }
            }
            other => return err(line, format!("unknown record `{other}`")),
        }
    }
    if let Some((line, _, _)) = open.values().min() {
        return err(*line, "enter without a matching exit");
    }
    file.schedule.normalize();
    Ok(file)
}

// ---------------------------------------------------------------- trace

/// Controller trace: one `vehicle` record per commitment followed by its
/// route (with windows) and stays.
pub fn write_trace(trace: &Trace, network: &Network) -> String {
    let mut out = String::new();
    for c in &trace.vehicles {
        writeln!(
            out,
            "vehicle {} {} {} {}",
            c.vehicle.0,
            class_word(c.class),
            c.request,
            c.depart
        )
        .unwrap();
        write_route(&mut out, "route", network, &c.route);
        for s in &c.stays {
            writeln!(out, "stay {} {} {} {}", c.vehicle.0, network.name(s.street), s.enter, s.exit).unwrap();
        }
    }
    out
}

pub fn parse_trace(text: &str, network: &Network) -> Result<Trace, ParseError> {
    let mut trace = Trace::default();
    let mut lines = Vec::new();
    let mut routes: HashMap<VehicleId, usize> = HashMap::new();
    let mut index: HashMap<VehicleId, usize> = HashMap::new();
    for (line, f) in records(text) {
        match f[0] {
            "vehicle" => {
                exact(line, &f, 5, "vehicle <id> controlled|simulated <request> <depart>")?;
                let id = VehicleId(num(line, f[1], "vehicle id")?);
                if index.insert(id, trace.vehicles.len()).is_some() {
                    return err(line, format!("duplicate vehicle {id}"));
                }
                lines.push(line);
                trace.vehicles.push(Commitment {
                    vehicle: id,
                    class: class_of(line, f[2])?,
                    request: num(line, f[3], "request step")?,
                    depart: num(line, f[4], "depart step")?,
                    route: Route { id: RouteId(0), vehicle: id, streets: vec![], windows: vec![], cost: 0 },
                    stays: Vec::new(),
                });
            }
            "route" => {
                let route = parse_route(network, line, &f)?;
                let Some(&i) = index.get(&route.vehicle) else {
                    return err(line, format!("route for undeclared vehicle {}", route.vehicle));
                };
                if routes.insert(route.vehicle, line).is_some() {
                    return err(line, format!("second route for vehicle {}", route.vehicle));
                }
                trace.vehicles[i].route = route;
            }
            "stay" => {
                exact(line, &f, 5, "stay <id> <street> <enter> <exit>")?;
                let id = VehicleId(num(line, f[1], "vehicle id")?);
                let Some(&i) = index.get(&id) else {
                    return err(line, format!("stay for undeclared vehicle {id}"));
                };
                trace.vehicles[i].stays.push(Stay {
                    street: street_id(network, line, f[2])?,
                    enter: num(line, f[3], "enter step")?,
                    exit: num(line, f[4], "exit step")?,
                });
            }
            other => return err(line, format!("unknown record `{other}`")),
        }
    }
    for (c, line) in trace.vehicles.iter().zip(lines) {
        if !routes.contains_key(&c.vehicle) {
            return err(line, format!("vehicle {} has no route", c.vehicle));
        }
        let streets: Vec<StreetId> = c.stays.iter().map(|s| s.street).collect();
        if streets != c.route.streets {
            return err(line, format!("vehicle {}: stays do not follow the route", c.vehicle));
        }
    }
    Ok(trace)
}

// ---------------------------------------------------------------- simulation

pub fn write_event_log(log: &EventLog, network: &Network) -> String {
    let mut out = String::new();
    writeln!(out, "tick_seconds {}", log.tick_seconds).unwrap();
    for (v, len) in &log.route_length {
        writeln!(out, "length {} {}", v.0, len).unwrap();
    }
    for e in &log.events {
        let (word, street) = match e.kind {
            EventKind::Request => ("request", None),
            EventKind::Enter(s) => ("enter", Some(s)),
            EventKind::Reach(s) => ("reach", Some(s)),
            EventKind::Exit(s) => ("exit", Some(s)),
            EventKind::Reject => ("reject", None),
        };
        write!(out, "{} {word} {}", e.time, e.vehicle.0).unwrap();
        if let Some(s) = street {
            write!(out, " {}", network.name(s)).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn parse_event_log(text: &str, network: &Network) -> Result<EventLog, ParseError> {
    let mut log = EventLog::default();
    let mut tick = None;
    for (line, f) in records(text) {
        match f[0] {
            "tick_seconds" => {
                exact(line, &f, 2, "tick_seconds <n>")?;
                tick = Some(num(line, f[1], "tick_seconds")?);
                continue;
            }
            "length" => {
                exact(line, &f, 3, "length <vehicle> <meters>")?;
                log.route_length.insert(VehicleId(num(line, f[1], "vehicle id")?), num(line, f[2], "length")?);
                continue;
            }
            _ => {}
        }
        arity(line, &f, 3, "<time> <event> <vehicle> [street]")?;
        let time = num(line, f[0], "time")?;
        let vehicle = VehicleId(num(line, f[2], "vehicle id")?);
        let street = || -> Result<StreetId, ParseError> {
            exact(line, &f, 4, "<time> <event> <vehicle> <street>")?;
            street_id(network, line, f[3])
        };
        let kind = match f[1] {
            "request" | "reject" => {
                exact(line, &f, 3, "<time> <event> <vehicle>")?;
                if f[1] == "request" { EventKind::Request } else { EventKind::Reject }
            }
            "enter" => EventKind::Enter(street()?),
            "reach" => EventKind::Reach(street()?),
            "exit" => EventKind::Exit(street()?),
            other => return err(line, format!("unknown event `{other}`")),
        };
        log.events.push(Event { time, vehicle, kind });
    }
    log.tick_seconds = tick.ok_or(ParseError { line: 1, message: "missing `tick_seconds`".into() })?;
    Ok(log)
}

const METRIC_FIELDS: [&str; 7] = [
    "vehicles",
    "total_duration",
    "avg_route_length",
    "avg_speed",
    "avg_duration",
    "avg_waiting_time",
    "avg_depart_delay",
];

pub fn write_metrics(m: &MetricsReport) -> String {
    let mut out = String::new();
    out.push_str("# seconds, meters, m/s; waiting = time stopped at a street end inside the network\n");
    let values = [
        m.vehicles.to_string(),
        m.total_duration.to_string(),
        m.avg_route_length.to_string(),
        m.avg_speed.to_string(),
        m.avg_duration.to_string(),
        m.avg_waiting_time.to_string(),
        m.avg_depart_delay.to_string(),
    ];
    for (k, v) in METRIC_FIELDS.iter().zip(values) {
        writeln!(out, "{k} {v}").unwrap();
    }
    out
}

pub fn parse_metrics(text: &str) -> Result<MetricsReport, ParseError> {
    let mut seen: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    let mut last = 1;
    for (line, f) in records(text) {
        last = line;
        exact(line, &f, 2, "<field> <value>")?;
        let Some(key) = METRIC_FIELDS.iter().find(|k| **k == f[0]) else {
            return err(line, format!("unknown metric `{}`", f[0]));
        };
        if seen.insert(key, (line, f[1])).is_some() {
            return err(line, format!("duplicate metric `{key}`"));
        }
    }
    let get = |k: &str| -> Result<f64, ParseError> {
        let Some(&(line, v)) = seen.get(k) else {
            return err(last, format!("missing metric `{k}`"));
        };
        let x: f64 = num(line, v, k)?;
        if !(x.is_finite() && x >= 0.0) {
            return err(line, format!("`{k}` must be a non-negative number"));
        }
        Ok(x)
    };
    let vehicles = match seen.get("vehicles") {
        Some(&(line, v)) => num(line, v, "vehicles")?,
        None => return err(last, "missing metric `vehicles`"),
    };
    Ok(MetricsReport {
        vehicles,
        total_duration: get("total_duration")?,
        avg_route_length: get("avg_route_length")?,
        avg_speed: get("avg_speed")?,
        avg_duration: get("avg_duration")?,
        avg_waiting_time: get("avg_waiting_time")?,
        avg_depart_delay: get("avg_depart_delay")?,
    })
}

/// Two reports side by side, one metric per row.
pub fn write_comparison(optimized: &MetricsReport, baseline: &MetricsReport) -> String {
    let mut out = String::new();
    writeln!(out, "# seconds, meters, m/s; waiting = time stopped at a street end inside the network").unwrap();
    writeln!(out, "{:<20} {:>14} {:>14}", "metric", "shortest-path", "optimized").unwrap();
    let rows = [
        ("total_duration", baseline.total_duration, optimized.total_duration),
        ("avg_route_length", baseline.avg_route_length, optimized.avg_route_length),
        ("avg_speed", baseline.avg_speed, optimized.avg_speed),
        ("avg_duration", baseline.avg_duration, optimized.avg_duration),
        ("avg_waiting_time", baseline.avg_waiting_time, optimized.avg_waiting_time),
        ("avg_depart_delay", baseline.avg_depart_delay, optimized.avg_depart_delay),
    ];
    for (name, b, o) in rows {
        writeln!(out, "{name:<20} {b:>14.2} {o:>14.2}").unwrap();
    }
    out
}

/// Per-epoch solver statistics, one `epoch` line each. Wall times vary
/// between runs, so this file is kept apart from the trace.
pub fn write_epoch_stats(epochs: &[EpochReport]) -> String {
    let mut out = String::new();
    out.push_str("# epoch <clock> <controlled> <simulated> <committed> <deferred> <solves> <nodes> <cost> <spread> <status> <wall_ms>\n");
    for e in epochs {
        writeln!(
            out,
            "epoch {} {} {} {} {} {} {} {} {} {} {:.3}",
            e.clock,
            e.controlled,
            e.simulated,
            e.committed.len(),
            e.deferred.len(),
            e.solves,
            e.nodes,
            e.objective.cost,
            e.objective.spread,
            e.optimality.map_or("none", Optimality::label),
            e.elapsed.as_secs_f64() * 1e3
        )
        .unwrap();
    }
    out
}

// ---------------------------------------------------------------- config

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub step_seconds: u32,
    pub tick_seconds: u32,
    pub k_routes: usize,
    pub similarity_threshold: f64,
    pub budget_secs: f64,
    pub workers: usize,
    pub seed: u64,
    pub epoch_steps: u32,
    pub max_defer: u32,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            step_seconds: 5,
            tick_seconds: 1,
            k_routes: 6,
            similarity_threshold: 0.5,
            budget_secs: 5.0,
            workers: 1,
            seed: 0,
            epoch_steps: 1,
            max_defer: 120,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("`{0}` must be positive")]
    NotPositive(&'static str),
    #[error("step_seconds ({step}) must be a multiple of tick_seconds ({tick})")]
    TickMismatch { step: u32, tick: u32 },
    #[error(transparent)]
    Parse(#[from] ParseError),
}

impl Config {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("step_seconds", self.step_seconds > 0),
            ("tick_seconds", self.tick_seconds > 0),
            ("k_routes", self.k_routes > 0),
            ("similarity_threshold", self.similarity_threshold > 0.0),
            ("budget_secs", self.budget_secs > 0.0),
            ("workers", self.workers > 0),
            ("epoch_steps", self.epoch_steps > 0),
            ("max_defer", self.max_defer > 0),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, ok)| !ok) {
            return Err(ConfigError::NotPositive(name));
        }
        if self.step_seconds % self.tick_seconds != 0 {
            return Err(ConfigError::TickMismatch { step: self.step_seconds, tick: self.tick_seconds });
        }
        Ok(())
    }

    /// Reads `key value` lines over the defaults.
    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let mut c = Config::default();
        for (line, f) in records(text) {
            exact(line, &f, 2, "<key> <value>")?;
            let v = f[1];
            match f[0] {
                "step_seconds" => c.step_seconds = num(line, v, "step_seconds")?,
                "tick_seconds" => c.tick_seconds = num(line, v, "tick_seconds")?,
                "k_routes" => c.k_routes = num(line, v, "k_routes")?,
                "similarity_threshold" => c.similarity_threshold = num(line, v, "similarity_threshold")?,
                "budget_secs" => c.budget_secs = num(line, v, "budget_secs")?,
                "workers" => c.workers = num(line, v, "workers")?,
                "seed" => c.seed = num(line, v, "seed")?,
                "epoch_steps" => c.epoch_steps = num(line, v, "epoch_steps")?,
                "max_defer" => c.max_defer = num(line, v, "max_defer")?,
                other => return Err(ParseError { line, message: format!("unknown key `{other}`") }.into()),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn controller(&self) -> crate::controller::ControllerConfig {
        use crate::preprocessor::{DiversityParams, RouteParams};
        crate::controller::ControllerConfig {
            routes: RouteParams {
                diversity: DiversityParams {
                    k: self.k_routes,
                    similarity_threshold: self.similarity_threshold,
                    ..Default::default()
                },
                ..Default::default()
            },
            solve: crate::scheduler::SolveConfig {
                budget: std::time::Duration::from_secs_f64(self.budget_secs),
                workers: self.workers,
                seed: self.seed,
                node_limit: None,
            },
            epoch_steps: self.epoch_steps,
            max_defer: self.max_defer,
        }
    }

    pub fn sim(&self) -> crate::microsim::SimConfig {
        crate::microsim::SimConfig { tick_seconds: self.tick_seconds, ..Default::default() }
    }
}

#[cfg(test)]
mod tests;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use super::{Objective, Schedule, SchedulingInstance, VehicleStay};
use crate::net_model::{Step, StreetId};
use crate::preprocessor::{VehicleClass, VehicleId};

/// Constraint families a schedule can break.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    /// Controlled vehicle without exactly one valid candidate route.
    R1,
    /// Simulated vehicle moved off its committed route or timing.
    R2,
    /// Stay missing, duplicated, off-route, or entered outside its window.
    R4,
    /// Origin street not entered at the departure step.
    R5,
    /// Exit not after enter, or later than the street's max travel time.
    R6,
    /// Exit earlier than the occupancy-dependent travel time allows.
    R11,
    /// Consecutive streets do not hand over at the same step.
    R12,
    /// Street over capacity at a controlled enter.
    R13,
    /// Roundabout over capacity at an enter into one of its streets.
    R14,
}

impl Rule {
    pub fn tag(self) -> &'static str {
        match self {
            Rule::R1 => "r1",
            Rule::R2 => "r2",
            Rule::R4 => "r4",
            Rule::R5 => "r5",
            Rule::R6 => "r6",
            Rule::R11 => "r11",
            Rule::R12 => "r12",
            Rule::R13 => "r13",
            Rule::R14 => "r14",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub rule: Rule,
    pub vehicle: VehicleId,
    pub street: Option<StreetId>,
    pub step: Option<Step>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} vehicle {}", self.rule, self.vehicle)?;
        if let Some(s) = self.street {
            write!(f, " street {s}")?;
        }
        if let Some(t) = self.step {
            write!(f, " step {t}")?;
        }
        write!(f, ": {}", self.detail)
    }
}

/// Enter/exit lists per street, counted by direct scan.
struct Occupancy {
    by_street: HashMap<StreetId, (Vec<Step>, Vec<Step>)>,
}

impl Occupancy {
    fn new<'a>(stays: impl Iterator<Item = &'a VehicleStay>) -> Self {
        let mut by_street: HashMap<StreetId, (Vec<Step>, Vec<Step>)> = HashMap::new();
        for s in stays {
            let e = by_street.entry(s.street).or_default();
            e.0.push(s.enter);
            e.1.push(s.exit);
        }
        Occupancy { by_street }
    }

    fn at(&self, street: StreetId, t: Step) -> u32 {
        self.by_street.get(&street).map_or(0, |(enters, exits)| {
            let entered = enters.iter().filter(|&&x| x <= t).count() as i64;
            let exited = exits.iter().filter(|&&x| x <= t).count() as i64;
            (entered - exited).max(0) as u32
        })
    }
}

/// Every hard-constraint violation in `schedule`; empty iff it is valid.
pub fn check(schedule: &Schedule, instance: &SchedulingInstance) -> Vec<Violation> {
    let net = &instance.network;
    let mut out = Vec::new();
    let mut push = |rule, vehicle, street, step, detail: String| {
        out.push(Violation { rule, vehicle, street, step, detail })
    };

    let mut by_vehicle: BTreeMap<VehicleId, Vec<&VehicleStay>> = BTreeMap::new();
    for s in &schedule.stays {
        by_vehicle.entry(s.vehicle).or_default().push(s);
    }
    for (&vid, stays) in &by_vehicle {
        if instance.vehicle(vid).is_none() {
            push(Rule::R1, vid, stays.first().map(|s| s.street), None, "unknown vehicle".into());
        }
    }
    for s in &schedule.stays {
        if s.street.index() >= net.street_count() {
            push(Rule::R4, s.vehicle, Some(s.street), Some(s.enter), "unknown street".into());
        }
    }
    let valid_street = |s: &&VehicleStay| s.street.index() < net.street_count();

    for v in &instance.controlled {
        let stays: Vec<&VehicleStay> = by_vehicle
            .get(&v.id)
            .map(|s| s.iter().copied().filter(valid_street).collect())
            .unwrap_or_default();
        let Some(route_id) = schedule.routes.get(&v.id) else {
            push(Rule::R1, v.id, None, None, "no route chosen".into());
            continue;
        };
        let Some(route) = v.routes.iter().find(|r| r.id == *route_id) else {
            push(Rule::R1, v.id, None, None, format!("route {route_id} is not a candidate"));
            continue;
        };
        let mut ordered = Vec::with_capacity(route.streets.len());
        let mut complete = true;
        for &street in &route.streets {
            let on: Vec<_> = stays.iter().filter(|s| s.street == street).collect();
            match on.as_slice() {
                [one] => ordered.push(**one),
                [] => {
                    push(Rule::R4, v.id, Some(street), None, "no stay on a route street".into());
                    complete = false;
                }
                [first, ..] => {
                    push(Rule::R4, v.id, Some(street), Some(first.enter), "street entered more than once".into());
                    complete = false;
                }
            }
        }
        for s in &stays {
            if !route.streets.contains(&s.street) {
                push(Rule::R4, v.id, Some(s.street), Some(s.enter), "stay off the chosen route".into());
            }
        }
        if !complete {
            continue;
        }
        if ordered[0].enter != v.depart {
            push(
                Rule::R5,
                v.id,
                Some(ordered[0].street),
                Some(ordered[0].enter),
                format!("origin entered at {} instead of {}", ordered[0].enter, v.depart),
            );
        }
        for (i, s) in ordered.iter().enumerate() {
            let w = route.windows[i];
            if i > 0 && !(v.depart + w.min_enter <= s.enter && s.enter <= v.depart + w.max_enter) {
                push(
                    Rule::R4,
                    v.id,
                    Some(s.street),
                    Some(s.enter),
                    format!(
                        "enter outside window [{}, {}]",
                        v.depart + w.min_enter,
                        v.depart + w.max_enter
                    ),
                );
            }
            if s.enter > instance.horizon {
                push(Rule::R4, v.id, Some(s.street), Some(s.enter), "enter past the horizon".into());
            }
            let max_tt = net.street(s.street).max_travel_time;
            if s.exit <= s.enter || s.exit > s.enter + max_tt {
                push(
                    Rule::R6,
                    v.id,
                    Some(s.street),
                    Some(s.exit),
                    format!("exit {} outside ({}, {}]", s.exit, s.enter, s.enter + max_tt),
                );
            } else if s.exit > instance.horizon {
                push(Rule::R6, v.id, Some(s.street), Some(s.exit), "exit past the horizon".into());
            }
            if let Some(next) = ordered.get(i + 1) {
                if next.enter != s.exit {
                    push(
                        Rule::R12,
                        v.id,
                        Some(next.street),
                        Some(next.enter),
                        format!("entered at {} but left the previous street at {}", next.enter, s.exit),
                    );
                }
            }
        }
    }

    for v in &instance.simulated {
        let route = &v.routes[0];
        if schedule.routes.get(&v.id) != Some(&route.id) {
            push(Rule::R2, v.id, None, None, "committed route changed".into());
        }
        let mut got: Vec<_> = by_vehicle
            .get(&v.id)
            .map(|s| s.iter().map(|s| s.stay()).collect())
            .unwrap_or_default();
        let mut want = v.fixed_schedule.clone().unwrap_or_default();
        got.sort();
        want.sort();
        if got != want {
            push(Rule::R2, v.id, None, None, "committed timing changed".into());
        }
    }

    let occupancy = Occupancy::new(schedule.stays.iter().filter(valid_street));
    let class_of: HashMap<VehicleId, VehicleClass> = instance
        .controlled
        .iter()
        .chain(&instance.simulated)
        .map(|v| (v.id, v.class))
        .collect();
    for s in schedule.stays.iter().filter(valid_street) {
        let street = net.street(s.street);
        let occ = occupancy.at(s.street, s.enter);
        let constrained = match class_of.get(&s.vehicle) {
            Some(VehicleClass::Controlled) => true,
            Some(VehicleClass::Simulated) => instance.protect_simulated,
            None => false,
        };
        if constrained {
            if occ > street.capacity {
                push(
                    Rule::R13,
                    s.vehicle,
                    Some(s.street),
                    Some(s.enter),
                    format!("{occ} vehicles on a street of capacity {}", street.capacity),
                );
            }
            let tt = street.travel_time(occ);
            if s.exit < s.enter + tt {
                push(
                    Rule::R11,
                    s.vehicle,
                    Some(s.street),
                    Some(s.exit),
                    format!("left after {} steps, needs {tt} at occupancy {occ}", s.exit.saturating_sub(s.enter)),
                );
            }
        }
        if let Some(r) = net.roundabout_of(s.street) {
            let rb = &net.roundabouts()[r];
            let total: u32 = rb.members.iter().map(|m| occupancy.at(*m, s.enter)).sum();
            if total > rb.capacity {
                push(
                    Rule::R14,
                    s.vehicle,
                    Some(s.street),
                    Some(s.enter),
                    format!("{total} vehicles in roundabout `{}` of capacity {}", rb.name, rb.capacity),
                );
            }
        }
    }
    out
}

/// Sum of street occupancies over every (street, step) at which some
/// vehicle enters that street.
pub fn spread_of(stays: &[VehicleStay]) -> u64 {
    let occupancy = Occupancy::new(stays.iter());
    let instants: BTreeSet<(StreetId, Step)> = stays.iter().map(|s| (s.street, s.enter)).collect();
    instants
        .into_iter()
        .map(|(street, t)| u64::from(occupancy.at(street, t)))
        .sum()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvaluateError {
    #[error("schedule breaks {} constraint(s), first: {}", .0.len(), .0[0])]
    Invalid(Vec<Violation>),
}

/// Objective of a valid schedule.
pub fn evaluate(schedule: &Schedule, instance: &SchedulingInstance) -> Result<Objective, EvaluateError> {
    let violations = check(schedule, instance);
    if !violations.is_empty() {
        return Err(EvaluateError::Invalid(violations));
    }
    let cost = instance
        .controlled
        .iter()
        .map(|v| {
            let id = schedule.routes[&v.id];
            v.routes.iter().find(|r| r.id == id).map_or(0, |r| r.cost)
        })
        .sum();
    Ok(Objective { cost, spread: spread_of(&schedule.stays) })
}

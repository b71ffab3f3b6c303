//! Exhaustive reference solver for small instances, used as a test oracle.

use thiserror::Error;

use super::{check, evaluate, InstanceError, Objective, Schedule, SchedulingInstance, VehicleStay};
use crate::preprocessor::{Route, RouteId, VehicleState};

pub const BRUTE_FORCE_MAX_CONTROLLED: usize = 3;
pub const BRUTE_FORCE_MAX_STREETS: usize = 8;
pub const BRUTE_FORCE_MAX_HORIZON: u32 = 15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BruteForceError {
    #[error("instance too large for exhaustive search ({controlled} controlled, {streets} streets, horizon {horizon})")]
    TooLarge { controlled: usize, streets: usize, horizon: u32 },
    #[error(transparent)]
    Invalid(#[from] InstanceError),
    #[error("infeasible")]
    Infeasible,
}

type Choice = (RouteId, Vec<VehicleStay>);

fn walk(
    instance: &SchedulingInstance,
    v: &VehicleState,
    route: &Route,
    i: usize,
    enter: u32,
    stays: &mut Vec<VehicleStay>,
    out: &mut Vec<Choice>,
) {
    let street = route.streets[i];
    let max_tt = instance.network.street(street).max_travel_time;
    let hi = (enter + max_tt).min(instance.horizon);
    for exit in enter + 1..=hi {
        if let Some(w) = route.windows.get(i + 1) {
            if exit < v.depart + w.min_enter || exit > v.depart + w.max_enter {
                continue;
            }
        }
        stays.push(VehicleStay { vehicle: v.id, street, enter, exit });
        if i + 1 == route.streets.len() {
            out.push((route.id, stays.clone()));
        } else {
            walk(instance, v, route, i + 1, exit, stays, out);
        }
        stays.pop();
    }
}

/// Every (route, timing) pair a vehicle could take, respecting its route
/// windows, the origin departure, hand-over at equal steps, the max travel
/// time and the horizon. Travel times and capacities are left to `check`.
fn vehicle_options(instance: &SchedulingInstance, v: &VehicleState) -> Vec<Choice> {
    let mut out = Vec::new();
    for route in &v.routes {
        let mut stays = Vec::new();
        if v.depart <= instance.horizon {
            walk(instance, v, route, 0, v.depart, &mut stays, &mut out);
        }
    }
    out
}

/// Exhaustive lexicographic optimum. Refuses instances above the size guard.
pub fn brute_force_solve(instance: &SchedulingInstance) -> Result<(Schedule, Objective), BruteForceError> {
    let controlled = instance.controlled.len();
    let streets = instance.network.street_count();
    if controlled > BRUTE_FORCE_MAX_CONTROLLED
        || streets > BRUTE_FORCE_MAX_STREETS
        || instance.horizon > BRUTE_FORCE_MAX_HORIZON
    {
        return Err(BruteForceError::TooLarge { controlled, streets, horizon: instance.horizon });
    }
    instance.validate()?;
    let mut vehicles: Vec<&VehicleState> = instance.controlled.iter().collect();
    vehicles.sort_by_key(|v| v.id);
    let options: Vec<Vec<Choice>> = vehicles.iter().map(|v| vehicle_options(instance, v)).collect();

    let mut base = Schedule::default();
    for v in &instance.simulated {
        base.routes.insert(v.id, v.routes[0].id);
        for s in v.fixed_schedule.iter().flatten() {
            base.stays.push(VehicleStay { vehicle: v.id, street: s.street, enter: s.enter, exit: s.exit });
        }
    }

    let mut best: Option<(Schedule, Objective)> = None;
    let mut pick = vec![0usize; options.len()];
    if options.iter().any(|o| o.is_empty()) {
        return Err(BruteForceError::Infeasible);
    }
    loop {
        let mut schedule = base.clone();
        for (k, v) in vehicles.iter().enumerate() {
            let (route, stays) = &options[k][pick[k]];
            schedule.routes.insert(v.id, *route);
            schedule.stays.extend_from_slice(stays);
        }
        if check(&schedule, instance).is_empty() {
            schedule.normalize();
            let objective = evaluate(&schedule, instance).expect("checked schedule");
            if best.as_ref().map_or(true, |(_, b)| objective < *b) {
                best = Some((schedule, objective));
            }
        }
        // odometer over option indices, last vehicle fastest
        let mut k = options.len();
        loop {
            if k == 0 {
                return best.ok_or(BruteForceError::Infeasible);
            }
            k -= 1;
            pick[k] += 1;
            if pick[k] < options[k].len() {
                break;
            }
            pick[k] = 0;
        }
    }
}

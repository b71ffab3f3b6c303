//! Exact lexicographic scheduler over the relaxed discrete model.
//!
//! Decision variables are one route per controlled vehicle and an enter and
//! exit step for every street of that route. Hard constraints:
//!
//! * the origin street is entered at the vehicle's departure step, every
//!   later street inside its route window;
//! * `enter < exit <= enter + max_travel_time`;
//! * consecutive streets hand over at the same step;
//! * `exit >= enter + travel_time(occupancy at enter)`;
//! * at a controlled enter the street holds at most its capacity;
//! * at any enter into a roundabout street the roundabout holds at most its
//!   capacity.
//!
//! The objective is the total route cost, ties broken by the sum of street
//! occupancies taken at every enter instant.

mod brute;
mod check;
mod search;
mod solve;

use std::collections::BTreeMap;

use thiserror::Error;

pub use brute::{brute_force_solve, BruteForceError, BRUTE_FORCE_MAX_CONTROLLED, BRUTE_FORCE_MAX_HORIZON, BRUTE_FORCE_MAX_STREETS};
pub use check::{check, evaluate, spread_of, EvaluateError, Rule, Violation};
pub use solve::{solve, Optimality, SolveConfig, SolveError, SolveStats, Solution};

use crate::net_model::{Network, Stay, Step, StreetId};
use crate::preprocessor::{latest_exit, Route, RouteId, VehicleClass, VehicleError, VehicleId, VehicleState};

#[derive(Clone, Debug, PartialEq)]
pub struct SchedulingInstance {
    pub network: Network,
    /// Last usable step.
    pub horizon: Step,
    pub controlled: Vec<VehicleState>,
    pub simulated: Vec<VehicleState>,
    /// Also enforce the travel-time and capacity rules at simulated
    /// vehicles' enter events, so committed plans stay valid when new
    /// vehicles are added around them.
    pub protect_simulated: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstanceError {
    #[error(transparent)]
    Vehicle(#[from] VehicleError),
    #[error("vehicle {0} appears more than once")]
    DuplicateVehicle(VehicleId),
    #[error("vehicle {0} is listed with the wrong class")]
    WrongClass(VehicleId),
    #[error("simulated vehicle {vehicle} has an event at step {step}, past the horizon {horizon}")]
    PastHorizon { vehicle: VehicleId, step: Step, horizon: Step },
    #[error("controlled vehicle {0} has no route that fits in the horizon")]
    NoFittingRoute(VehicleId),
}

impl SchedulingInstance {
    pub fn vehicle(&self, id: VehicleId) -> Option<&VehicleState> {
        self.controlled
            .iter()
            .chain(&self.simulated)
            .find(|v| v.id == id)
    }

    /// True when the route can be completed at free flow before the horizon.
    pub fn route_fits(&self, vehicle: &VehicleState, route: &Route) -> bool {
        let (Some(&last), Some(w)) = (route.streets.last(), route.windows.last()) else {
            return false;
        };
        vehicle.depart + w.min_enter + self.network.street(last).travel.light <= self.horizon
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        let mut seen = std::collections::HashSet::new();
        for v in self.controlled.iter().chain(&self.simulated) {
            if !seen.insert(v.id) {
                return Err(InstanceError::DuplicateVehicle(v.id));
            }
            v.validate(&self.network)?;
        }
        for v in &self.controlled {
            if v.class != VehicleClass::Controlled {
                return Err(InstanceError::WrongClass(v.id));
            }
            if !v.routes.iter().any(|r| self.route_fits(v, r)) {
                return Err(InstanceError::NoFittingRoute(v.id));
            }
        }
        for v in &self.simulated {
            if v.class != VehicleClass::Simulated {
                return Err(InstanceError::WrongClass(v.id));
            }
            for stay in v.fixed_schedule.iter().flatten() {
                if stay.exit > self.horizon {
                    return Err(InstanceError::PastHorizon {
                        vehicle: v.id,
                        step: stay.exit,
                        horizon: self.horizon,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Horizon that lets every candidate route run to its latest exit, capped.
pub fn default_horizon(
    network: &Network,
    controlled: &[VehicleState],
    simulated: &[VehicleState],
    cap: Option<Step>,
) -> Step {
    let planned = controlled
        .iter()
        .flat_map(|v| {
            v.routes
                .iter()
                .map(move |r| v.depart + latest_exit(network, &r.streets, &r.windows))
        })
        .max()
        .unwrap_or(0);
    let committed = simulated
        .iter()
        .flat_map(|v| v.fixed_schedule.iter().flatten())
        .map(|s| s.exit)
        .max()
        .unwrap_or(0);
    let horizon = planned.max(committed);
    match cap {
        Some(cap) => horizon.min(cap.max(committed)),
        None => horizon,
    }
}

/// One vehicle's stay on one street in a schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VehicleStay {
    pub vehicle: VehicleId,
    pub enter: Step,
    pub exit: Step,
    pub street: StreetId,
}

impl VehicleStay {
    pub fn stay(&self) -> Stay {
        Stay { street: self.street, enter: self.enter, exit: self.exit }
    }
}

/// Chosen routes and street timings for every vehicle of an instance,
/// simulated ones included.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Schedule {
    pub routes: BTreeMap<VehicleId, RouteId>,
    /// Sorted by vehicle, then time.
    pub stays: Vec<VehicleStay>,
}

impl Schedule {
    pub fn normalize(&mut self) {
        self.stays.sort();
    }

    pub fn stays_of(&self, vehicle: VehicleId) -> impl Iterator<Item = &VehicleStay> {
        self.stays.iter().filter(move |s| s.vehicle == vehicle)
    }
}

/// Lexicographic objective: route cost first, then occupancy spread.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Objective {
    pub cost: u64,
    pub spread: u64,
}

//! Builds the relaxed scheduling instance: diverse candidate routes per
//! vehicle, roundabout contraction and per-street enter windows.

mod diverse;
mod paths;
mod roundabout;
mod windows;

use std::fmt;

use thiserror::Error;

pub use diverse::{cluster_paths, jaccard, select_diverse_routes, DiversityParams};
pub use paths::enumerate_acyclic_paths;
pub use roundabout::{
    contract_roundabouts, contracted_name, ContractError, RawNetwork, RawRing, RawRoundabout,
    RawStreet,
};
pub use windows::{compute_windows, exit_bound, latest_exit, Window};

use crate::net_model::{Network, OccupancyLedger, Stay, Step, StreetId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VehicleId(pub u32);

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Index of a route among one vehicle's candidates; lower ids are cheaper.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RouteId(pub u32);

impl fmt::Display for RouteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VehicleClass {
    /// New vehicle whose route and timing are decided now.
    Controlled,
    /// Vehicle with a committed route and timing.
    Simulated,
}

impl VehicleClass {
    pub fn code(self) -> u8 {
        match self {
            VehicleClass::Controlled => 1,
            VehicleClass::Simulated => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Route {
    pub id: RouteId,
    pub vehicle: VehicleId,
    pub streets: Vec<StreetId>,
    /// Enter windows, relative to the route start.
    pub windows: Vec<Window>,
    pub cost: u64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RouteError {
    #[error("route {route} of vehicle {vehicle} is empty")]
    Empty { vehicle: VehicleId, route: RouteId },
    #[error("route {route} of vehicle {vehicle}: no link from street {from} to {to}")]
    Disconnected { vehicle: VehicleId, route: RouteId, from: StreetId, to: StreetId },
    #[error("route {route} of vehicle {vehicle} visits street {street} twice")]
    Cycle { vehicle: VehicleId, route: RouteId, street: StreetId },
    #[error("route {route} of vehicle {vehicle}: {reason}")]
    BadWindows { vehicle: VehicleId, route: RouteId, reason: String },
    #[error("route {route} of vehicle {vehicle}: unknown street {street}")]
    UnknownStreet { vehicle: VehicleId, route: RouteId, street: StreetId },
}

impl Route {
    pub fn origin(&self) -> StreetId {
        self.streets[0]
    }

    pub fn destination(&self) -> StreetId {
        *self.streets.last().expect("routes are non-empty")
    }

    pub fn validate(&self, network: &Network) -> Result<(), RouteError> {
        let (vehicle, route) = (self.vehicle, self.id);
        if self.streets.is_empty() {
            return Err(RouteError::Empty { vehicle, route });
        }
        for &street in &self.streets {
            if street.index() >= network.street_count() {
                return Err(RouteError::UnknownStreet { vehicle, route, street });
            }
        }
        for (i, &street) in self.streets.iter().enumerate() {
            if self.streets[..i].contains(&street) {
                return Err(RouteError::Cycle { vehicle, route, street });
            }
        }
        for pair in self.streets.windows(2) {
            if !network.has_link(pair[0], pair[1]) {
                return Err(RouteError::Disconnected { vehicle, route, from: pair[0], to: pair[1] });
            }
        }
        let bad = |reason: String| RouteError::BadWindows { vehicle, route, reason };
        if self.windows.len() != self.streets.len() {
            return Err(bad(format!(
                "{} windows for {} streets",
                self.windows.len(),
                self.streets.len()
            )));
        }
        if self.windows[0].min_enter != 0 {
            return Err(bad("first street must open at 0".into()));
        }
        for (i, w) in self.windows.iter().enumerate() {
            if w.min_enter > w.max_enter {
                return Err(bad(format!("window {i} is empty")));
            }
            if i > 0 && w.min_enter < self.windows[i - 1].min_enter {
                return Err(bad(format!("window {i} opens before window {}", i - 1)));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VehicleState {
    pub id: VehicleId,
    pub class: VehicleClass,
    /// Step at which the vehicle enters its origin street.
    pub depart: Step,
    pub origin: StreetId,
    pub destination: StreetId,
    pub routes: Vec<Route>,
    /// Committed stays, in absolute steps; present iff simulated.
    pub fixed_schedule: Option<Vec<Stay>>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VehicleError {
    #[error("controlled vehicle {0} has no candidate route")]
    NoRoutes(VehicleId),
    #[error("controlled vehicle {0} must not carry a fixed schedule")]
    ControlledWithSchedule(VehicleId),
    #[error("simulated vehicle {0} needs exactly one route")]
    SimulatedRouteCount(VehicleId),
    #[error("simulated vehicle {0} needs a fixed schedule covering its route")]
    SimulatedSchedule(VehicleId),
    #[error("vehicle {0}: route does not run from its origin to its destination")]
    Endpoints(VehicleId),
    #[error(transparent)]
    Route(#[from] RouteError),
}

impl VehicleState {
    pub fn validate(&self, network: &Network) -> Result<(), VehicleError> {
        let id = self.id;
        match self.class {
            VehicleClass::Controlled => {
                if self.routes.is_empty() {
                    return Err(VehicleError::NoRoutes(id));
                }
                if self.fixed_schedule.is_some() {
                    return Err(VehicleError::ControlledWithSchedule(id));
                }
            }
            VehicleClass::Simulated => {
                if self.routes.len() != 1 {
                    return Err(VehicleError::SimulatedRouteCount(id));
                }
                let Some(fixed) = &self.fixed_schedule else {
                    return Err(VehicleError::SimulatedSchedule(id));
                };
                let streets: Vec<StreetId> = fixed.iter().map(|s| s.street).collect();
                if streets != self.routes[0].streets || fixed.iter().any(|s| s.exit <= s.enter) {
                    return Err(VehicleError::SimulatedSchedule(id));
                }
            }
        }
        for route in &self.routes {
            route.validate(network)?;
            if route.origin() != self.origin || route.destination() != self.destination {
                return Err(VehicleError::Endpoints(id));
            }
        }
        Ok(())
    }
}

/// How a route's scalar cost is derived.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CostModel {
    /// Total length in whole meters.
    #[default]
    Length,
    /// Sum of light-tier travel steps.
    LightTime,
}

impl CostModel {
    pub fn cost(self, network: &Network, streets: &[StreetId]) -> u64 {
        match self {
            CostModel::Length => network.path_length(streets).round() as u64,
            CostModel::LightTime => streets
                .iter()
                .map(|s| u64::from(network.street(*s).travel.light))
                .sum(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RouteParams {
    pub diversity: DiversityParams,
    /// Cap on the acyclic paths enumerated before selection.
    pub path_limit: usize,
    pub cost_model: CostModel,
}

impl Default for RouteParams {
    fn default() -> Self {
        RouteParams {
            diversity: DiversityParams::default(),
            path_limit: 200,
            cost_model: CostModel::default(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreprocessError {
    #[error("vehicle {vehicle}: destination `{to}` is unreachable from `{from}`")]
    Unreachable { vehicle: VehicleId, from: String, to: String },
}

/// Diverse candidate paths between two streets, shortest first.
pub fn candidate_paths(
    network: &Network,
    from: StreetId,
    to: StreetId,
    params: &RouteParams,
) -> Vec<Vec<StreetId>> {
    let all = enumerate_acyclic_paths(network, from, to, params.path_limit.max(1));
    select_diverse_routes(network, &all, &params.diversity)
}

/// Turns street sequences into routes with costs and windows for a vehicle
/// departing at `depart`. Route ids follow cost order.
pub fn routes_from_paths(
    network: &Network,
    vehicle: VehicleId,
    paths: &[Vec<StreetId>],
    ledger: &OccupancyLedger,
    depart: Step,
    cost_model: CostModel,
) -> Vec<Route> {
    let mut priced: Vec<(u64, &Vec<StreetId>)> = paths
        .iter()
        .map(|p| (cost_model.cost(network, p), p))
        .collect();
    priced.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    priced
        .into_iter()
        .enumerate()
        .map(|(i, (cost, streets))| Route {
            id: RouteId(i as u32),
            vehicle,
            windows: compute_windows(network, streets, ledger, depart),
            streets: streets.clone(),
            cost,
        })
        .collect()
}

/// Candidate routes for a controlled vehicle.
pub fn build_routes(
    network: &Network,
    vehicle: VehicleId,
    origin: StreetId,
    destination: StreetId,
    ledger: &OccupancyLedger,
    depart: Step,
    params: &RouteParams,
) -> Result<Vec<Route>, PreprocessError> {
    let paths = candidate_paths(network, origin, destination, params);
    if paths.is_empty() {
        return Err(PreprocessError::Unreachable {
            vehicle,
            from: network.name(origin).to_string(),
            to: network.name(destination).to_string(),
        });
    }
    Ok(routes_from_paths(network, vehicle, &paths, ledger, depart, params.cost_model))
}

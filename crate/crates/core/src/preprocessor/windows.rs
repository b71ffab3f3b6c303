use crate::net_model::{steps_at_speed, Network, OccupancyLedger, Step, StreetId, LIGHT_KMH};

/// Enter-time bounds of one street on a route, relative to the route start.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Window {
    pub min_enter: Step,
    pub max_enter: Step,
}

impl Window {
    pub fn contains(&self, t: Step) -> bool {
        self.min_enter <= t && t <= self.max_enter
    }
}

/// Longest time a vehicle entering `street` while `others` vehicles are
/// already on it can be expected to stay there.
///
/// Below capacity the speed drops in inverse proportion to the occupancy,
/// and the bound never undercuts the tier time the vehicle itself would get.
/// At or above capacity the vehicle waits for the whole queue to drain.
pub fn exit_bound(network: &Network, street: StreetId, others: u32) -> Step {
    let s = network.street(street);
    if others >= s.capacity {
        return s.max_travel_time;
    }
    let slowed = steps_at_speed(
        s.length_m,
        LIGHT_KMH / f64::from(others.max(1)),
        network.step_seconds(),
    );
    slowed
        .max(s.travel_time(others + 1))
        .min(s.max_travel_time)
}

/// Per-street enter windows of a route for a vehicle starting at `depart`.
///
/// The minimum is the free-flow arrival time: light-tier travel on every
/// earlier street. The maximum chains [`exit_bound`] from the latest enter
/// of each street, with occupancies read from `ledger` at the street's
/// free-flow arrival.
pub fn compute_windows(
    network: &Network,
    route: &[StreetId],
    ledger: &OccupancyLedger,
    depart: Step,
) -> Vec<Window> {
    let mut windows = Vec::with_capacity(route.len());
    let (mut lo, mut hi) = (0, 0);
    for &street in route {
        windows.push(Window { min_enter: lo, max_enter: hi });
        let others = ledger.count(street, depart + lo);
        lo += network.street(street).travel.light;
        hi += exit_bound(network, street, others);
    }
    windows
}

/// Latest step at which the route's last street may be left.
pub fn latest_exit(network: &Network, route: &[StreetId], windows: &[Window]) -> Step {
    match (route.last(), windows.last()) {
        (Some(&s), Some(w)) => w.max_enter + network.street(s).max_travel_time,
        _ => 0,
    }
}

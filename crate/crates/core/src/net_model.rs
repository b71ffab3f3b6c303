//! Road-network data model: streets, links, roundabouts, tiered travel times
//! and the per-street occupancy ledger.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// A discrete scheduling instant. One step lasts `Network::step_seconds`.
pub type Step = u32;

/// Speed used when a street carries heavy traffic.
pub const HEAVY_KMH: f64 = 15.0;
/// Speed used when a street carries medium traffic.
pub const MEDIUM_KMH: f64 = 30.0;
/// Speed used when a street carries light traffic.
pub const LIGHT_KMH: f64 = 45.0;

/// Dense index of a street inside its [`Network`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StreetId(pub u32);

impl StreetId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("street `{0}`: length must be positive and finite")]
    BadLength(String),
    #[error("street `{0}`: capacity must be at least 1")]
    ZeroCapacity(String),
    #[error("street `{street}`: {reason}")]
    BadThresholds { street: String, reason: String },
    #[error("street `{street}`: max travel time {max} is below the heavy travel time {heavy}")]
    BadMaxTravelTime { street: String, max: Step, heavy: Step },
    #[error("duplicate street id `{0}`")]
    DuplicateStreet(String),
    #[error("unknown street `{0}`")]
    UnknownStreet(String),
    #[error("unknown street index {0}")]
    UnknownStreetIndex(u32),
    #[error("link `{0}` -> `{0}` is a self-link")]
    SelfLink(String),
    #[error("roundabout `{0}`: capacity must be at least 1")]
    ZeroRoundaboutCapacity(String),
    #[error("roundabout `{0}` has no member streets")]
    EmptyRoundabout(String),
    #[error("street `{street}` belongs to roundabouts `{first}` and `{second}`")]
    SharedRoundaboutMember { street: String, first: String, second: String },
    #[error("duplicate roundabout id `{0}`")]
    DuplicateRoundabout(String),
    #[error("unknown roundabout index {0}")]
    UnknownRoundabout(usize),
    #[error("step_seconds must be positive")]
    ZeroStep,
    #[error("stay on street {street:?} must exit after it enters (enter {enter}, exit {exit})")]
    EmptyStay { street: StreetId, enter: Step, exit: Step },
}

/// Traffic tier of a street, selected by its occupancy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Tier {
    Light,
    Medium,
    Heavy,
}

impl Tier {
    pub fn kmh(self) -> f64 {
        match self {
            Tier::Light => LIGHT_KMH,
            Tier::Medium => MEDIUM_KMH,
            Tier::Heavy => HEAVY_KMH,
        }
    }

    pub fn meters_per_second(self) -> f64 {
        self.kmh() / 3.6
    }
}

/// Occupancy bounds of the three tiers.
///
/// Light covers `[0, medium_from)`, medium covers `[medium_from, heavy_from)`
/// and heavy covers `[heavy_from, ∞)`. Medium may be empty on small streets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TierThresholds {
    pub medium_from: u32,
    pub heavy_from: u32,
}

impl TierThresholds {
    /// Splits `[0, capacity]` in thirds, rounding the cut points up.
    pub fn for_capacity(capacity: u32) -> Self {
        TierThresholds {
            medium_from: capacity.div_ceil(3),
            heavy_from: (2 * capacity).div_ceil(3),
        }
    }

    pub fn tier(&self, occupancy: u32) -> Tier {
        if occupancy >= self.heavy_from {
            Tier::Heavy
        } else if occupancy >= self.medium_from {
            Tier::Medium
        } else {
            Tier::Light
        }
    }

    fn validate(&self, street: &str, capacity: u32) -> Result<(), NetError> {
        let bad = |reason: String| NetError::BadThresholds {
            street: street.to_string(),
            reason,
        };
        if self.medium_from == 0 {
            return Err(bad("light tier must cover occupancy 0".into()));
        }
        if self.medium_from > self.heavy_from {
            return Err(bad(format!(
                "medium threshold {} exceeds heavy threshold {}",
                self.medium_from, self.heavy_from
            )));
        }
        if self.heavy_from > capacity {
            return Err(bad(format!(
                "heavy threshold {} exceeds capacity {capacity}",
                self.heavy_from
            )));
        }
        Ok(())
    }
}

/// Travel time in steps for each tier.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TierTimes {
    pub heavy: Step,
    pub medium: Step,
    pub light: Step,
}

impl TierTimes {
    pub fn get(&self, tier: Tier) -> Step {
        match tier {
            Tier::Light => self.light,
            Tier::Medium => self.medium,
            Tier::Heavy => self.heavy,
        }
    }
}

/// Number of whole steps needed to cover `length_m` at `kmh`, at least one.
pub fn steps_at_speed(length_m: f64, kmh: f64, step_seconds: u32) -> Step {
    let seconds = length_m * 3.6 / kmh;
    let steps = seconds / f64::from(step_seconds);
    // absorb representation error so that exact quotients do not round up
    let steps = (steps - 1e-9).ceil();
    if steps < 1.0 {
        1
    } else {
        steps as Step
    }
}

/// Optional per-street values that replace the derived defaults.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StreetOverrides {
    pub medium_from: Option<u32>,
    pub heavy_from: Option<u32>,
    pub max_travel_time: Option<Step>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Street {
    pub name: String,
    pub length_m: f64,
    pub capacity: u32,
    pub thresholds: TierThresholds,
    pub travel: TierTimes,
    /// Steps needed to drain the street when it is full.
    pub max_travel_time: Step,
}

impl Street {
    /// Builds a street with derived thresholds and travel times.
    pub fn new(
        name: impl Into<String>,
        length_m: f64,
        capacity: u32,
        step_seconds: u32,
    ) -> Result<Street, NetError> {
        Street::with_overrides(
            name,
            length_m,
            capacity,
            step_seconds,
            StreetOverrides::default(),
        )
    }

    pub fn with_overrides(
        name: impl Into<String>,
        length_m: f64,
        capacity: u32,
        step_seconds: u32,
        overrides: StreetOverrides,
    ) -> Result<Street, NetError> {
        let name = name.into();
        if step_seconds == 0 {
            return Err(NetError::ZeroStep);
        }
        if !(length_m.is_finite() && length_m > 0.0) {
            return Err(NetError::BadLength(name));
        }
        if capacity == 0 {
            return Err(NetError::ZeroCapacity(name));
        }
        let defaults = TierThresholds::for_capacity(capacity);
        let thresholds = TierThresholds {
            medium_from: overrides.medium_from.unwrap_or(defaults.medium_from),
            heavy_from: overrides.heavy_from.unwrap_or(defaults.heavy_from),
        };
        thresholds.validate(&name, capacity)?;
        let travel = TierTimes {
            heavy: steps_at_speed(length_m, HEAVY_KMH, step_seconds),
            medium: steps_at_speed(length_m, MEDIUM_KMH, step_seconds),
            light: steps_at_speed(length_m, LIGHT_KMH, step_seconds),
        };
        let max_travel_time = overrides
            .max_travel_time
            .unwrap_or(capacity * travel.heavy);
        if max_travel_time < travel.heavy {
            return Err(NetError::BadMaxTravelTime {
                street: name,
                max: max_travel_time,
                heavy: travel.heavy,
            });
        }
        Ok(Street {
            name,
            length_m,
            capacity,
            thresholds,
            travel,
            max_travel_time,
        })
    }

    pub fn tier(&self, occupancy: u32) -> Tier {
        self.thresholds.tier(occupancy)
    }

    /// Minimum steps to traverse the street when `occupancy` vehicles are on it.
    ///
    /// Occupancy above capacity stays in the heavy tier.
    pub fn travel_time(&self, occupancy: u32) -> Step {
        self.travel.get(self.tier(occupancy))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Link {
    pub from: StreetId,
    pub to: StreetId,
}

/// A contracted roundabout: its member streets share one capacity.
#[derive(Clone, Debug, PartialEq)]
pub struct Roundabout {
    pub name: String,
    pub capacity: u32,
    pub members: Vec<StreetId>,
}

#[derive(Clone, Debug)]
pub struct Network {
    step_seconds: u32,
    streets: Vec<Street>,
    links: Vec<Link>,
    roundabouts: Vec<Roundabout>,
    successors: Vec<Vec<StreetId>>,
    predecessors: Vec<Vec<StreetId>>,
    by_name: HashMap<String, StreetId>,
    roundabout_of: Vec<Option<usize>>,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.step_seconds == other.step_seconds
            && self.streets == other.streets
            && self.links == other.links
            && self.roundabouts == other.roundabouts
    }
}

impl Network {
    pub fn new(
        step_seconds: u32,
        streets: Vec<Street>,
        links: Vec<Link>,
        roundabouts: Vec<Roundabout>,
    ) -> Result<Network, NetError> {
        if step_seconds == 0 {
            return Err(NetError::ZeroStep);
        }
        let mut by_name = HashMap::with_capacity(streets.len());
        for (i, street) in streets.iter().enumerate() {
            if by_name
                .insert(street.name.clone(), StreetId(i as u32))
                .is_some()
            {
                return Err(NetError::DuplicateStreet(street.name.clone()));
            }
        }
        let n = streets.len();
        let mut links = links;
        links.sort();
        links.dedup();
        let mut successors = vec![Vec::new(); n];
        let mut predecessors = vec![Vec::new(); n];
        for link in &links {
            for id in [link.from, link.to] {
                if id.index() >= n {
                    return Err(NetError::UnknownStreetIndex(id.0));
                }
            }
            if link.from == link.to {
                return Err(NetError::SelfLink(streets[link.from.index()].name.clone()));
            }
            successors[link.from.index()].push(link.to);
            predecessors[link.to.index()].push(link.from);
        }
        let mut roundabout_of: Vec<Option<usize>> = vec![None; n];
        let mut names = HashMap::new();
        for (r, roundabout) in roundabouts.iter().enumerate() {
            if names.insert(roundabout.name.clone(), r).is_some() {
                return Err(NetError::DuplicateRoundabout(roundabout.name.clone()));
            }
            if roundabout.capacity == 0 {
                return Err(NetError::ZeroRoundaboutCapacity(roundabout.name.clone()));
            }
            if roundabout.members.is_empty() {
                return Err(NetError::EmptyRoundabout(roundabout.name.clone()));
            }
            for member in &roundabout.members {
                let slot = roundabout_of
                    .get_mut(member.index())
                    .ok_or(NetError::UnknownStreetIndex(member.0))?;
                if let Some(prev) = *slot {
                    return Err(NetError::SharedRoundaboutMember {
                        street: streets[member.index()].name.clone(),
                        first: roundabouts[prev].name.clone(),
                        second: roundabout.name.clone(),
                    });
                }
                *slot = Some(r);
            }
        }
        Ok(Network {
            step_seconds,
            streets,
            links,
            roundabouts,
            successors,
            predecessors,
            by_name,
            roundabout_of,
        })
    }

    pub fn step_seconds(&self) -> u32 {
        self.step_seconds
    }

    pub fn streets(&self) -> &[Street] {
        &self.streets
    }

    pub fn street(&self, id: StreetId) -> &Street {
        &self.streets[id.index()]
    }

    pub fn get(&self, id: StreetId) -> Result<&Street, NetError> {
        self.streets
            .get(id.index())
            .ok_or(NetError::UnknownStreetIndex(id.0))
    }

    pub fn street_count(&self) -> usize {
        self.streets.len()
    }

    pub fn street_ids(&self) -> impl Iterator<Item = StreetId> {
        (0..self.streets.len() as u32).map(StreetId)
    }

    pub fn id_of(&self, name: &str) -> Result<StreetId, NetError> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| NetError::UnknownStreet(name.to_string()))
    }

    pub fn name(&self, id: StreetId) -> &str {
        &self.streets[id.index()].name
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn successors(&self, id: StreetId) -> &[StreetId] {
        &self.successors[id.index()]
    }

    pub fn predecessors(&self, id: StreetId) -> &[StreetId] {
        &self.predecessors[id.index()]
    }

    pub fn has_link(&self, from: StreetId, to: StreetId) -> bool {
        self.successors[from.index()].contains(&to)
    }

    pub fn roundabouts(&self) -> &[Roundabout] {
        &self.roundabouts
    }

    pub fn roundabout_of(&self, id: StreetId) -> Option<usize> {
        self.roundabout_of[id.index()]
    }

    /// Sum of street lengths along a street sequence.
    pub fn path_length(&self, path: &[StreetId]) -> f64 {
        path.iter().map(|s| self.street(*s).length_m).sum()
    }
}

/// One vehicle's presence on one street: `[enter, exit)` in steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Stay {
    pub street: StreetId,
    pub enter: Step,
    pub exit: Step,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct StreetEvents {
    enters: Vec<Step>,
    exits: Vec<Step>,
}

impl StreetEvents {
    fn count(&self, t: Step) -> u32 {
        let entered = self.enters.partition_point(|&x| x <= t);
        let exited = self.exits.partition_point(|&x| x <= t);
        (entered - exited) as u32
    }
}

fn insert_sorted(v: &mut Vec<Step>, x: Step) {
    let at = v.partition_point(|&y| y <= x);
    v.insert(at, x);
}

fn remove_sorted(v: &mut Vec<Step>, x: Step) -> bool {
    match v.binary_search(&x) {
        Ok(at) => {
            v.remove(at);
            true
        }
        Err(_) => false,
    }
}

/// Enter and exit events per street.
///
/// `occupancy(S, T)` counts enters at or before `T` minus exits at or before
/// `T`, so a vehicle leaving at `T` is no longer counted at `T`. Cloning is
/// cheap: streets are shared until one side writes to them.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OccupancyLedger {
    streets: Vec<Arc<StreetEvents>>,
}

impl OccupancyLedger {
    pub fn new(street_count: usize) -> Self {
        let empty = Arc::new(StreetEvents::default());
        OccupancyLedger {
            streets: vec![empty; street_count],
        }
    }

    pub fn for_network(network: &Network) -> Self {
        OccupancyLedger::new(network.street_count())
    }

    pub fn street_count(&self) -> usize {
        self.streets.len()
    }

    /// Independent copy sharing unchanged streets with `self`.
    pub fn snapshot(&self) -> Self {
        self.clone()
    }

    fn events_mut(&mut self, street: StreetId) -> Result<&mut StreetEvents, NetError> {
        self.streets
            .get_mut(street.index())
            .map(Arc::make_mut)
            .ok_or(NetError::UnknownStreetIndex(street.0))
    }

    pub fn add_stay(&mut self, stay: Stay) -> Result<(), NetError> {
        if stay.exit <= stay.enter {
            return Err(NetError::EmptyStay {
                street: stay.street,
                enter: stay.enter,
                exit: stay.exit,
            });
        }
        let events = self.events_mut(stay.street)?;
        insert_sorted(&mut events.enters, stay.enter);
        insert_sorted(&mut events.exits, stay.exit);
        Ok(())
    }

    /// Removes one previously added stay. Returns false when it was absent.
    pub fn remove_stay(&mut self, stay: Stay) -> Result<bool, NetError> {
        let events = self.events_mut(stay.street)?;
        let Ok(enter_at) = events.enters.binary_search(&stay.enter) else {
            return Ok(false);
        };
        if events.exits.binary_search(&stay.exit).is_err() {
            return Ok(false);
        }
        events.enters.remove(enter_at);
        remove_sorted(&mut events.exits, stay.exit);
        Ok(true)
    }

    pub fn occupancy(&self, street: StreetId, t: Step) -> Result<u32, NetError> {
        self.streets
            .get(street.index())
            .map(|events| events.count(t))
            .ok_or(NetError::UnknownStreetIndex(street.0))
    }

    /// Unchecked variant for hot loops; panics on an unknown street.
    pub(crate) fn count(&self, street: StreetId, t: Step) -> u32 {
        self.streets[street.index()].count(t)
    }

    /// Total occupancy of a roundabout's member streets at `t`.
    pub fn roundabout_occupancy(
        &self,
        network: &Network,
        roundabout: usize,
        t: Step,
    ) -> Result<u32, NetError> {
        let r = network
            .roundabouts()
            .get(roundabout)
            .ok_or(NetError::UnknownRoundabout(roundabout))?;
        r.members
            .iter()
            .map(|s| self.occupancy(*s, t))
            .sum::<Result<u32, _>>()
    }

    /// Sorted enter steps recorded on `street`.
    pub fn enters(&self, street: StreetId) -> &[Step] {
        &self.streets[street.index()].enters
    }

    /// Sorted exit steps recorded on `street`.
    pub fn exits(&self, street: StreetId) -> &[Step] {
        &self.streets[street.index()].exits
    }

    /// Shares storage with `other` for `street`.
    pub fn shares_street_with(&self, other: &Self, street: StreetId) -> bool {
        Arc::ptr_eq(&self.streets[street.index()], &other.streets[street.index()])
    }
}

impl fmt::Display for StreetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

use std::collections::{BTreeSet, HashMap, HashSet};

use thiserror::Error;

use crate::net_model::{Link, NetError, Network, Roundabout, Street, StreetId, StreetOverrides};

/// A street as read from a network description, before contraction.
#[derive(Clone, Debug, PartialEq)]
pub struct RawStreet {
    pub name: String,
    pub length_m: f64,
    pub capacity: u32,
    pub overrides: StreetOverrides,
}

/// Ring arcs of a physical roundabout, listed in driving order.
#[derive(Clone, Debug, PartialEq)]
pub struct RawRing {
    pub name: String,
    pub capacity: u32,
    pub arcs: Vec<String>,
}

/// A roundabout whose streets are already contracted.
#[derive(Clone, Debug, PartialEq)]
pub struct RawRoundabout {
    pub name: String,
    pub capacity: u32,
    pub members: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawNetwork {
    pub step_seconds: u32,
    pub streets: Vec<RawStreet>,
    pub links: Vec<(String, String)>,
    pub rings: Vec<RawRing>,
    pub roundabouts: Vec<RawRoundabout>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContractError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("ring `{ring}`: needs at least two arcs")]
    TooFewArcs { ring: String },
    #[error("ring `{ring}`: arc `{arc}` is not a street")]
    UnknownArc { ring: String, arc: String },
    #[error("ring `{ring}`: arc `{arc}` already belongs to another ring")]
    SharedArc { ring: String, arc: String },
    #[error("ring `{ring}`: arcs do not form a cycle, no link `{from}` -> `{to}`")]
    NotACycle { ring: String, from: String, to: String },
    #[error("ring `{ring}`: arc `{arc}` links directly into ring `{other}`")]
    RingToRing { ring: String, arc: String, other: String },
}

/// Name of the contracted street joining two ring arcs.
pub fn contracted_name(ring: &str, entry_arc: &str, exit_arc: &str) -> String {
    format!("{ring}:{entry_arc}>{exit_arc}")
}

/// Replaces every ring with one street per (entry arc, exit arc) pair.
///
/// An entry arc is a ring arc fed by an outside street; an exit arc is one
/// that feeds an outside street. The contracted street covers the arcs from
/// the entry arc to the exit arc in driving order and its length is their
/// sum. Full laps back to the entry point are not generated. All contracted
/// streets of one ring form a [`Roundabout`] carrying the ring capacity, and
/// each of them gets that capacity as its own street capacity.
pub fn contract_roundabouts(raw: &RawNetwork) -> Result<Network, ContractError> {
    let step = raw.step_seconds;
    let index: HashMap<&str, usize> = raw
        .streets
        .iter()
        .enumerate()
        .map(|(i, s)| (s.name.as_str(), i))
        .collect();
    if index.len() != raw.streets.len() {
        let mut seen = HashSet::new();
        for s in &raw.streets {
            if !seen.insert(s.name.as_str()) {
                return Err(NetError::DuplicateStreet(s.name.clone()).into());
            }
        }
    }
    let lookup = |name: &str| {
        index
            .get(name)
            .copied()
            .ok_or_else(|| NetError::UnknownStreet(name.to_string()))
    };
    let mut links: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (a, b) in &raw.links {
        links.insert((lookup(a)?, lookup(b)?));
    }

    // ring membership
    let mut ring_of: HashMap<usize, usize> = HashMap::new();
    for (r, ring) in raw.rings.iter().enumerate() {
        if ring.arcs.len() < 2 {
            return Err(ContractError::TooFewArcs { ring: ring.name.clone() });
        }
        if ring.capacity == 0 {
            return Err(NetError::ZeroRoundaboutCapacity(ring.name.clone()).into());
        }
        for arc in &ring.arcs {
            let i = index.get(arc.as_str()).copied().ok_or_else(|| {
                ContractError::UnknownArc { ring: ring.name.clone(), arc: arc.clone() }
            })?;
            if ring_of.insert(i, r).is_some() {
                return Err(ContractError::SharedArc { ring: ring.name.clone(), arc: arc.clone() });
            }
        }
        let n = ring.arcs.len();
        for k in 0..n {
            let (a, b) = (lookup(&ring.arcs[k])?, lookup(&ring.arcs[(k + 1) % n])?);
            if !links.contains(&(a, b)) {
                return Err(ContractError::NotACycle {
                    ring: ring.name.clone(),
                    from: ring.arcs[k].clone(),
                    to: ring.arcs[(k + 1) % n].clone(),
                });
            }
        }
    }
    for &(a, b) in &links {
        if let (Some(&ra), Some(&rb)) = (ring_of.get(&a), ring_of.get(&b)) {
            if ra != rb {
                return Err(ContractError::RingToRing {
                    ring: raw.rings[ra].name.clone(),
                    arc: raw.streets[a].name.clone(),
                    other: raw.rings[rb].name.clone(),
                });
            }
        }
    }

    let mut streets = Vec::new();
    let mut new_id: HashMap<usize, StreetId> = HashMap::new();
    for (i, s) in raw.streets.iter().enumerate() {
        if ring_of.contains_key(&i) {
            continue;
        }
        new_id.insert(i, StreetId(streets.len() as u32));
        streets.push(Street::with_overrides(
            s.name.clone(),
            s.length_m,
            s.capacity,
            step,
            s.overrides,
        )?);
    }
    let mut out_links: Vec<Link> = links
        .iter()
        .filter_map(|(a, b)| match (new_id.get(a), new_id.get(b)) {
            (Some(&from), Some(&to)) => Some(Link { from, to }),
            _ => None,
        })
        .collect();

    let mut roundabouts = Vec::new();
    for (r, ring) in raw.rings.iter().enumerate() {
        let arcs: Vec<usize> = ring.arcs.iter().map(|a| index[a.as_str()]).collect();
        let n = arcs.len();
        let outside = |s: &usize| !ring_of.contains_key(s) || ring_of[s] != r;
        let feeders: Vec<Vec<StreetId>> = arcs
            .iter()
            .map(|&arc| {
                links
                    .iter()
                    .filter(|(a, b)| *b == arc && outside(a))
                    .filter_map(|(a, _)| new_id.get(a).copied())
                    .collect()
            })
            .collect();
        let drains: Vec<Vec<StreetId>> = arcs
            .iter()
            .map(|&arc| {
                links
                    .iter()
                    .filter(|(a, b)| *a == arc && outside(b))
                    .filter_map(|(_, b)| new_id.get(b).copied())
                    .collect()
            })
            .collect();
        let mut members = Vec::new();
        for i in 0..n {
            if feeders[i].is_empty() {
                continue;
            }
            for span in 1..n {
                let k = (i + span - 1) % n;
                if drains[k].is_empty() {
                    continue;
                }
                let length: f64 = (0..span)
                    .map(|d| raw.streets[arcs[(i + d) % n]].length_m)
                    .sum();
                let id = StreetId(streets.len() as u32);
                streets.push(Street::new(
                    contracted_name(&ring.name, &ring.arcs[i], &ring.arcs[k]),
                    length,
                    ring.capacity,
                    step,
                )?);
                out_links.extend(feeders[i].iter().map(|&from| Link { from, to: id }));
                out_links.extend(drains[k].iter().map(|&to| Link { from: id, to }));
                members.push(id);
            }
        }
        if !members.is_empty() {
            roundabouts.push(Roundabout {
                name: ring.name.clone(),
                capacity: ring.capacity,
                members,
            });
        }
    }

    let by_name: HashMap<&str, StreetId> = streets
        .iter()
        .enumerate()
        .map(|(i, s)| (s.name.as_str(), StreetId(i as u32)))
        .collect();
    for rb in &raw.roundabouts {
        let members = rb
            .members
            .iter()
            .map(|m| {
                by_name
                    .get(m.as_str())
                    .copied()
                    .ok_or_else(|| NetError::UnknownStreet(m.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        roundabouts.push(Roundabout {
            name: rb.name.clone(),
            capacity: rb.capacity,
            members,
        });
    }
    Ok(Network::new(step, streets, out_links, roundabouts)?)
}

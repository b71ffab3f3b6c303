use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::net_model::{Network, StreetId};

/// Length of the shortest street sequence from each street to `to`, counting
/// every street on the way including both ends. `None` when unreachable.
fn distances_to(network: &Network, to: StreetId) -> Vec<Option<f64>> {
    let mut dist: Vec<Option<f64>> = vec![None; network.street_count()];
    let mut heap = BinaryHeap::new();
    let start = network.street(to).length_m;
    dist[to.index()] = Some(start);
    heap.push(Reverse(Entry { f: start, path: vec![to] }));
    while let Some(Reverse(Entry { f, path })) = heap.pop() {
        let node = path[0];
        if dist[node.index()].is_some_and(|d| d < f) {
            continue;
        }
        for &pred in network.predecessors(node) {
            let nd = f + network.street(pred).length_m;
            if dist[pred.index()].map_or(true, |d| nd < d) {
                dist[pred.index()] = Some(nd);
                heap.push(Reverse(Entry { f: nd, path: vec![pred] }));
            }
        }
    }
    dist
}

#[derive(Debug)]
struct Entry {
    f: f64,
    path: Vec<StreetId>,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.f
            .total_cmp(&other.f)
            .then_with(|| self.path.cmp(&other.path))
    }
}

/// Acyclic street sequences from `from` to `to`, shortest first.
///
/// Returns every such path when there are fewer than `limit`, otherwise the
/// `limit` shortest by total length (ties broken by street order). Paths are
/// expanded best-first with the unconstrained shortest distance to `to` as
/// an admissible estimate, so they come out in nondecreasing length.
pub fn enumerate_acyclic_paths(
    network: &Network,
    from: StreetId,
    to: StreetId,
    limit: usize,
) -> Vec<Vec<StreetId>> {
    let mut found = Vec::new();
    if limit == 0 || from.index() >= network.street_count() || to.index() >= network.street_count()
    {
        return found;
    }
    let remaining = distances_to(network, to);
    let Some(h0) = remaining[from.index()] else {
        return found;
    };
    let mut heap = BinaryHeap::new();
    heap.push(Reverse(Entry { f: h0, path: vec![from] }));
    while let Some(Reverse(Entry { path, .. })) = heap.pop() {
        let last = *path.last().expect("paths are never empty");
        if last == to {
            found.push(path);
            if found.len() == limit {
                break;
            }
            continue;
        }
        let g = network.path_length(&path);
        for &next in network.successors(last) {
            if path.contains(&next) {
                continue;
            }
            let Some(h) = remaining[next.index()] else {
                continue;
            };
            let mut extended = path.clone();
            extended.push(next);
            heap.push(Reverse(Entry { f: g + h, path: extended }));
        }
    }
    found
}

use std::collections::BTreeSet;

use crate::net_model::{Network, StreetId};

/// Knobs for the diverse route selection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiversityParams {
    /// Routes kept per vehicle.
    pub k: usize,
    /// Jaccard similarity at or above which two paths share a cluster.
    pub similarity_threshold: f64,
    /// Shortest paths taken from each cluster.
    pub per_cluster: usize,
}

impl Default for DiversityParams {
    fn default() -> Self {
        DiversityParams {
            k: 6,
            similarity_threshold: 0.5,
            per_cluster: 2,
        }
    }
}

/// Jaccard similarity of the street sets of two paths.
pub fn jaccard(a: &[StreetId], b: &[StreetId]) -> f64 {
    let a: BTreeSet<_> = a.iter().collect();
    let b: BTreeSet<_> = b.iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Single-linkage clusters over street-set similarity. Each cluster lists
/// path indices sorted by (length, path); clusters are ordered by their
/// shortest member.
pub fn cluster_paths(
    network: &Network,
    paths: &[Vec<StreetId>],
    similarity_threshold: f64,
) -> Vec<Vec<usize>> {
    let n = paths.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            if jaccard(&paths[i], &paths[j]) >= similarity_threshold {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let order = sorted_by_length(network, paths, (0..n).collect());
    let mut clusters: Vec<(usize, Vec<usize>)> = Vec::new();
    for i in order {
        let root = find(&mut parent, i);
        match clusters.iter_mut().find(|(r, _)| *r == root) {
            Some((_, members)) => members.push(i),
            None => clusters.push((root, vec![i])),
        }
    }
    clusters.into_iter().map(|(_, members)| members).collect()
}

fn sorted_by_length(network: &Network, paths: &[Vec<StreetId>], mut idx: Vec<usize>) -> Vec<usize> {
    idx.sort_by(|&a, &b| {
        network
            .path_length(&paths[a])
            .total_cmp(&network.path_length(&paths[b]))
            .then_with(|| paths[a].cmp(&paths[b]))
    });
    idx
}

/// Picks up to `k` mutually different short paths.
///
/// Paths are clustered by street-set similarity, the `per_cluster` shortest
/// of each cluster are kept, and the `k` shortest of those are returned in
/// nondecreasing length. Non-empty input always gives non-empty output.
pub fn select_diverse_routes(
    network: &Network,
    paths: &[Vec<StreetId>],
    params: &DiversityParams,
) -> Vec<Vec<StreetId>> {
    let per_cluster = params.per_cluster.max(1);
    let k = params.k.max(1);
    let picked: Vec<usize> = cluster_paths(network, paths, params.similarity_threshold)
        .into_iter()
        .flat_map(|members| members.into_iter().take(per_cluster))
        .collect();
    sorted_by_length(network, paths, picked)
        .into_iter()
        .take(k)
        .map(|i| paths[i].clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net_model::Street;

    fn bare_network(n: usize) -> Network {
        let streets = (0..n)
            .map(|i| Street::new(format!("s{i}"), 10.0 + i as f64, 4, 5).unwrap())
            .collect();
        Network::new(5, streets, vec![], vec![]).unwrap()
    }

    fn p(ids: &[u32]) -> Vec<StreetId> {
        ids.iter().copied().map(StreetId).collect()
    }

    #[test]
    fn single_path_passes_through() {
        let net = bare_network(4);
        let paths = vec![p(&[0, 1, 2])];
        for k in 1..4 {
            let params = DiversityParams { k, ..Default::default() };
            assert_eq!(select_diverse_routes(&net, &paths, &params), paths);
        }
    }

    #[test]
    fn same_street_set_keeps_the_shorter() {
        let net = bare_network(4);
        // same set, different order; lengths equal so street order decides
        let paths = vec![p(&[0, 2, 1]), p(&[0, 1, 2])];
        let params = DiversityParams { k: 1, ..Default::default() };
        assert_eq!(select_diverse_routes(&net, &paths, &params), vec![p(&[0, 1, 2])]);
    }

    #[test]
    fn empty_input_gives_empty_output() {
        let net = bare_network(1);
        assert!(select_diverse_routes(&net, &[], &DiversityParams::default()).is_empty());
    }

    #[test]
    fn ten_paths_in_three_clusters() {
        // street i has length 10 + i. Clusters are built from disjoint
        // street pools {0..5}, {6..11}, {12..17}, all sharing endpoints 18/19.
        let net = bare_network(20);
        let paths = vec![
            p(&[18, 0, 1, 2, 19]),
            p(&[18, 0, 1, 3, 19]),
            p(&[18, 0, 1, 4, 19]),
            p(&[18, 0, 1, 5, 19]),
            p(&[18, 6, 7, 8, 19]),
            p(&[18, 6, 7, 9, 19]),
            p(&[18, 6, 7, 10, 19]),
            p(&[18, 12, 13, 14, 19]),
            p(&[18, 12, 13, 15, 19]),
            p(&[18, 12, 13, 16, 19]),
        ];
        // Hand clustering at threshold 0.5: paths within a pool share 4 of
        // 6 streets (2/3), across pools 2 of 8 (1/4).
        assert!((jaccard(&paths[0], &paths[1]) - 4.0 / 6.0).abs() < 1e-12);
        assert!((jaccard(&paths[0], &paths[4]) - 2.0 / 8.0).abs() < 1e-12);
        let clusters = cluster_paths(&net, &paths, 0.5);
        assert_eq!(clusters, vec![vec![0, 1, 2, 3], vec![4, 5, 6], vec![7, 8, 9]]);

        let params = DiversityParams { k: 4, ..Default::default() };
        let picked = select_diverse_routes(&net, &paths, &params);
        // two per cluster: paths 0,1 (90, 91 m), 4,5 (108, 109 m), 7,8 (126, 127 m)
        assert_eq!(picked, vec![
            paths[0].clone(),
            paths[1].clone(),
            paths[4].clone(),
            paths[5].clone(),
        ]);
        let cluster_of = |path: &Vec<StreetId>| {
            let i = paths.iter().position(|q| q == path).unwrap();
            clusters.iter().position(|c| c.contains(&i)).unwrap()
        };
        let distinct: BTreeSet<_> = picked.iter().map(cluster_of).collect();
        assert!(distinct.len() >= 2);
    }
}

//! Cluster statistics of a single configuration: the origin cluster, pivotal
//! edges for a connection, long non-pivotal edges and the nice-connection flag.

use std::collections::VecDeque;

use serde::Serialize;

use crate::region::Region;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClusterStats {
    /// Vertices of the origin cluster, ascending.
    pub cluster: Vec<usize>,
    pub size: usize,
    pub connected: bool,
    /// Edges pivotal for {origin ↔ target}, ascending.
    pub pivotal: Vec<usize>,
    /// Open non-pivotal edges inside the origin cluster with ρ ≥ K.
    pub long_edge_count: usize,
    pub nice_connection: bool,
    pub nc_threshold: f64,
}

struct OpenGraph {
    adj: Vec<Vec<(usize, usize)>>,
}

impl OpenGraph {
    fn new(region: &Region, omega: &[bool]) -> Self {
        let mut adj = vec![Vec::new(); region.n_vertices()];
        for (k, e) in region.edges.iter().enumerate() {
            if omega[k] {
                adj[e.u as usize].push((e.v as usize, k));
                adj[e.v as usize].push((e.u as usize, k));
            }
        }
        Self { adj }
    }

    /// Vertices reachable from `src` avoiding edge `skip`.
    fn reach(&self, src: usize, skip: Option<usize>) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        let mut queue = VecDeque::from([src]);
        seen[src] = true;
        while let Some(a) = queue.pop_front() {
            for &(b, k) in &self.adj[a] {
                if Some(k) != skip && !seen[b] {
                    seen[b] = true;
                    queue.push_back(b);
                }
            }
        }
        seen
    }
}

/// Statistics with the nice-connection threshold 3·log f.
pub fn cluster_stats(region: &Region, omega: &[bool], target: usize, k: f64, f: f64) -> ClusterStats {
    cluster_stats_with_threshold(region, omega, target, k, f, 3.0 * f.ln())
}

/// Statistics with an explicit nice-connection threshold (e.g. K_x for
/// sub-exponential couplings).
pub fn cluster_stats_with_threshold(
    region: &Region,
    omega: &[bool],
    target: usize,
    k: f64,
    f: f64,
    nc_threshold: f64,
) -> ClusterStats {
    assert_eq!(omega.len(), region.n_edges(), "configuration length");
    let g = OpenGraph::new(region, omega);
    let origin = region.origin;
    let in_cluster = g.reach(origin, None);
    let cluster: Vec<usize> = (0..in_cluster.len()).filter(|&v| in_cluster[v]).collect();
    let connected = in_cluster[target];
    let inner_open: Vec<usize> = (0..region.n_edges())
        .filter(|&e| omega[e] && in_cluster[region.edges[e].u as usize])
        .collect();
    let pivotal: Vec<usize> = if connected && target != origin {
        inner_open.iter().copied().filter(|&e| !g.reach(origin, Some(e))[target]).collect()
    } else {
        Vec::new()
    };
    let long_edge_count = inner_open
        .iter()
        .filter(|&&e| region.edges[e].rho >= k && pivotal.binary_search(&e).is_err())
        .count();
    let nice_connection = connected
        && cluster.len() as f64 <= f
        && inner_open
            .iter()
            .all(|&e| region.edges[e].rho < nc_threshold || pivotal.binary_search(&e).is_ok());
    ClusterStats {
        size: cluster.len(),
        cluster,
        connected,
        pivotal,
        long_edge_count,
        nice_connection,
        nc_threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::couplings::{normalize, PrefactorSpec};
    use crate::exact::random_omega;
    use crate::geometry::NormSpec;
    use crate::region::Cutoff;

    fn region(n: usize, cutoff: Cutoff) -> Region {
        let spec = normalize(NormSpec::l1(1), PrefactorSpec::polynomial(2.0, true), None).unwrap();
        Region::interval(&spec, n, cutoff).unwrap()
    }

    #[test]
    fn path_edges_are_pivotal() {
        let r = region(3, Cutoff::None);
        let e01 = r.edge_between(0, 1).unwrap();
        let e12 = r.edge_between(1, 2).unwrap();
        let e02 = r.edge_between(0, 2).unwrap();
        let mut om = vec![false; r.n_edges()];
        om[e01] = true;
        om[e12] = true;
        let s = cluster_stats(&r, &om, 2, 1.0, 3.0);
        assert_eq!(s.pivotal, {
            let mut v = vec![e01, e12];
            v.sort();
            v
        });
        assert_eq!(s.long_edge_count, 0);
        assert!(s.nice_connection);
        om[e02] = true;
        let s = cluster_stats(&r, &om, 2, 2.0, 3.0);
        assert!(s.pivotal.is_empty());
        assert_eq!(s.long_edge_count, 1);
        assert_eq!(s.size, 3);
    }

    /// Oracle: intersection of the edge sets of all open simple paths.
    fn brute_pivotal(r: &Region, om: &[bool], target: usize) -> Option<Vec<usize>> {
        let n = r.n_vertices();
        let mut inter: Option<Vec<bool>> = None;
        let mut stack = vec![(r.origin, vec![r.origin], Vec::<usize>::new())];
        while let Some((v, path, used)) = stack.pop() {
            if v == target {
                let mut mask = vec![false; r.n_edges()];
                for &e in &used {
                    mask[e] = true;
                }
                inter = Some(match inter {
                    None => mask,
                    Some(m) => m.iter().zip(&mask).map(|(a, b)| *a && *b).collect(),
                });
                continue;
            }
            for w in 0..n {
                if path.contains(&w) {
                    continue;
                }
                if let Some(e) = r.edge_between(v, w) {
                    if om[e] {
                        let mut p = path.clone();
                        p.push(w);
                        let mut u = used.clone();
                        u.push(e);
                        stack.push((w, p, u));
                    }
                }
            }
        }
        inter.map(|m| (0..m.len()).filter(|&e| m[e]).collect())
    }

    #[test]
    fn pivotal_matches_path_enumeration() {
        let r = region(6, Cutoff::None);
        for seed in 0..300 {
            let om = random_omega(r.n_edges(), seed);
            for target in 1..6 {
                let s = cluster_stats(&r, &om, target, 2.0, 10.0);
                match brute_pivotal(&r, &om, target) {
                    None => assert!(!s.connected && s.pivotal.is_empty()),
                    Some(p) => {
                        assert!(s.connected);
                        assert_eq!(s.pivotal, p, "seed {seed} target {target}");
                    }
                }
                for &e in &s.pivotal {
                    let mut o2 = om.clone();
                    o2[e] = false;
                    assert!(!cluster_stats(&r, &o2, target, 2.0, 10.0).connected);
                }
            }
        }
    }
}

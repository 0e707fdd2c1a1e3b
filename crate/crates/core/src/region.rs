//! Finite regions of Z^d with their long-range edge sets, and model parameters.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::couplings::CouplingSpec;
use crate::geometry::{for_each_lattice_in_shell, MAX_DIM};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegionError {
    #[error("region is empty")]
    Empty,
    #[error("origin {0:?} is not a vertex of the region")]
    OriginOutside(Vec<i64>),
    #[error("point {0:?} has the wrong dimension")]
    Dimension(Vec<i64>),
    #[error("duplicate vertex {0:?}")]
    Duplicate(Vec<i64>),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("invalid cutoff: {0}")]
    Cutoff(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    Free,
    Wired,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RCParams {
    pub q: f64,
    pub beta: f64,
    pub boundary: Boundary,
}

impl RCParams {
    pub fn new(q: f64, beta: f64, boundary: Boundary) -> Result<Self, RegionError> {
        if !(q >= 1.0 && q.is_finite()) {
            return Err(RegionError::Params(format!("q must be >= 1, got {q}")));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(RegionError::Params(format!("beta must be >= 0, got {beta}")));
        }
        Ok(Self { q, beta, boundary })
    }

    pub fn free(q: f64, beta: f64) -> Self {
        Self::new(q, beta, Boundary::Free).expect("valid parameters")
    }

    pub fn wired(q: f64, beta: f64) -> Self {
        Self::new(q, beta, Boundary::Wired).expect("valid parameters")
    }

    /// e^{βJ} − 1, the open-edge weight.
    #[inline]
    pub fn edge_weight(&self, j: f64) -> f64 {
        (self.beta * j).exp_m1()
    }

    /// 1 − e^{−βJ}: open probability when the endpoints are already connected.
    #[inline]
    pub fn p_connected(&self, j: f64) -> f64 {
        -(-self.beta * j).exp_m1()
    }

    /// (e^{βJ}−1)/(e^{βJ}−1+q): open probability across distinct clusters.
    #[inline]
    pub fn p_separate(&self, j: f64) -> f64 {
        let w = self.edge_weight(j);
        w / (w + self.q)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Cutoff {
    /// Every pair of vertices is an edge.
    None,
    /// Only pairs with ρ(x−y) ≤ R.
    Radius(f64),
    /// The smallest integer radius whose omitted mass per vertex is ≤ ε.
    Auto(f64),
}

pub const DEFAULT_EPS_TAIL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Edge {
    pub u: u32,
    pub v: u32,
    pub j: f64,
    pub rho: f64,
}

/// All couplings from a vertex to sites outside the region, merged into one
/// edge to a single outside vertex. Parallel edges into the wired exterior
/// carry weight e^{βΣJ}−1 jointly, so the merge is exact.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GhostEdge {
    pub v: u32,
    pub j: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Region {
    pub dim: usize,
    pub points: Vec<[i64; MAX_DIM]>,
    pub origin: usize,
    pub edges: Vec<Edge>,
    /// Vertices joined to some site outside the region by a coupling in range.
    pub boundary_incident: Vec<bool>,
    /// Boundary edges, one per boundary-incident vertex; random under the
    /// wired boundary condition, absent under the free one.
    pub ghost: Vec<GhostEdge>,
    /// Edge-range radius, when a cutoff is active.
    pub cutoff_radius: Option<f64>,
    /// Bound on the coupling mass per vertex dropped by the cutoff.
    pub omitted_mass: f64,
    pub coupling: CouplingSpec,
}

impl Region {
    /// Vertices `points`, origin at `origin`, edges between all pairs in range.
    pub fn from_points(
        coupling: &CouplingSpec,
        points: &[Vec<i64>],
        origin: &[i64],
        cutoff: Cutoff,
    ) -> Result<Self, RegionError> {
        let dim = coupling.dim();
        if points.is_empty() {
            return Err(RegionError::Empty);
        }
        let mut pts = Vec::with_capacity(points.len());
        let mut seen = HashSet::new();
        for p in points {
            if p.len() != dim {
                return Err(RegionError::Dimension(p.clone()));
            }
            let mut a = [0i64; MAX_DIM];
            a[..dim].copy_from_slice(p);
            if !seen.insert(a) {
                return Err(RegionError::Duplicate(p.clone()));
            }
            pts.push(a);
        }
        if origin.len() != dim {
            return Err(RegionError::Dimension(origin.to_vec()));
        }
        let origin = points
            .iter()
            .position(|p| p.as_slice() == origin)
            .ok_or_else(|| RegionError::OriginOutside(origin.to_vec()))?;

        let (radius, omitted) = match cutoff {
            Cutoff::None => (None, 0.0),
            Cutoff::Radius(r) => {
                if !(r > 0.0) {
                    return Err(RegionError::Cutoff(format!("radius must be positive, got {r}")));
                }
                (Some(r), coupling.mass_beyond(r))
            }
            Cutoff::Auto(eps) => {
                if !(eps > 0.0) {
                    return Err(RegionError::Cutoff(format!("epsilon must be positive, got {eps}")));
                }
                let mut r = 1.0;
                while coupling.mass_beyond(r) > eps {
                    r += 1.0;
                }
                (Some(r), coupling.mass_beyond(r))
            }
        };

        let mut edges = Vec::new();
        let mut diff = [0i64; MAX_DIM];
        for a in 0..pts.len() {
            for b in (a + 1)..pts.len() {
                for c in 0..dim {
                    diff[c] = pts[b][c] - pts[a][c];
                }
                let rho = coupling.norm.rho_i(&diff[..dim]);
                if radius.is_some_and(|r| rho > r) {
                    continue;
                }
                edges.push(Edge { u: a as u32, v: b as u32, j: coupling.eval_rho(rho), rho });
            }
        }

        let mut ghost_j = vec![0.0; pts.len()];
        match radius {
            None => {
                // the normalized couplings sum to one
                for e in &edges {
                    ghost_j[e.u as usize] += e.j;
                    ghost_j[e.v as usize] += e.j;
                }
                for g in ghost_j.iter_mut() {
                    *g = (1.0 - *g).max(0.0);
                }
            }
            Some(r) => {
                let mut ball = Vec::new();
                for_each_lattice_in_shell(&coupling.norm, 0.0, r, |z, rho| ball.push((z.to_vec(), rho)));
                for (p, g) in pts.iter().zip(ghost_j.iter_mut()) {
                    for (z, rho) in &ball {
                        let mut y = *p;
                        for c in 0..dim {
                            y[c] += z[c];
                        }
                        if !seen.contains(&y) {
                            *g += coupling.eval_rho(*rho);
                        }
                    }
                }
            }
        }
        let boundary_incident: Vec<bool> = ghost_j.iter().map(|&g| g > 0.0).collect();
        let ghost = ghost_j
            .iter()
            .enumerate()
            .filter(|(_, &j)| j > 0.0)
            .map(|(v, &j)| GhostEdge { v: v as u32, j })
            .collect();

        Ok(Self {
            dim,
            points: pts,
            origin,
            edges,
            boundary_incident,
            ghost,
            cutoff_radius: radius,
            omitted_mass: omitted,
            coupling: coupling.clone(),
        })
    }

    /// The interval {0, …, n−1} in d=1 with origin 0.
    pub fn interval(coupling: &CouplingSpec, n: usize, cutoff: Cutoff) -> Result<Self, RegionError> {
        Self::segment(coupling, 0, n as i64 - 1, cutoff)
    }

    /// The interval {a, …, b} in d=1 with origin 0 (requires a ≤ 0 ≤ b).
    pub fn segment(coupling: &CouplingSpec, a: i64, b: i64, cutoff: Cutoff) -> Result<Self, RegionError> {
        if coupling.dim() != 1 {
            return Err(RegionError::Dimension(vec![a, b]));
        }
        let pts: Vec<Vec<i64>> = (a..=b).map(|x| vec![x]).collect();
        Self::from_points(coupling, &pts, &[0], cutoff)
    }

    /// The box [−n, n]^d centred at the origin.
    pub fn boxed(coupling: &CouplingSpec, n: i64, cutoff: Cutoff) -> Result<Self, RegionError> {
        let d = coupling.dim();
        let side = (2 * n + 1) as usize;
        let mut pts = Vec::with_capacity(side.pow(d as u32));
        for idx in 0..side.pow(d as u32) {
            let mut k = idx;
            let mut p = vec![0i64; d];
            for c in p.iter_mut() {
                *c = (k % side) as i64 - n;
                k /= side;
            }
            pts.push(p);
        }
        Self::from_points(coupling, &pts, &vec![0; d], cutoff)
    }

    pub fn n_vertices(&self) -> usize {
        self.points.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn point(&self, v: usize) -> &[i64] {
        &self.points[v][..self.dim]
    }

    /// Index of the exterior vertex in wired edge lists.
    pub fn ghost_vertex(&self) -> usize {
        self.points.len()
    }

    /// Edges carried by the measure: the internal ones, followed by the
    /// boundary edges (to [`Region::ghost_vertex`]) when wired.
    pub fn measure_edges(&self, boundary: Boundary) -> Vec<(u32, u32, f64)> {
        let mut out: Vec<(u32, u32, f64)> = self.edges.iter().map(|e| (e.u, e.v, e.j)).collect();
        if boundary == Boundary::Wired {
            let g = self.ghost_vertex() as u32;
            out.extend(self.ghost.iter().map(|b| (b.v, g, b.j)));
        }
        out
    }

    pub fn n_measure_edges(&self, boundary: Boundary) -> usize {
        self.edges.len() + if boundary == Boundary::Wired { self.ghost.len() } else { 0 }
    }

    pub fn index_of(&self, p: &[i64]) -> Option<usize> {
        self.points.iter().position(|q| &q[..self.dim] == p)
    }

    /// Index of the edge joining `a` and `b`, if any.
    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        let (a, b) = (a.min(b) as u32, a.max(b) as u32);
        self.edges.iter().position(|e| e.u == a && e.v == b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::couplings::{normalize, PrefactorSpec};
    use crate::geometry::NormSpec;

    fn spec(d: usize) -> CouplingSpec {
        let norm = if d == 1 { NormSpec::l1(1) } else { NormSpec::l1(d) };
        normalize(norm, PrefactorSpec::polynomial(2.0, true), None).unwrap()
    }

    #[test]
    fn interval_has_all_pairs() {
        let r = Region::interval(&spec(1), 5, Cutoff::None).unwrap();
        assert_eq!(r.n_edges(), 10);
        assert!(r.boundary_incident.iter().all(|&b| b));
        assert_eq!(r.ghost.len(), 5);
        // vertex 0 misses J_k for k ≤ −1 and k ≥ 5
        let s = spec(1);
        let want = 0.5 * s.mass_beyond(0.0) + 0.5 * s.mass_beyond(4.0);
        assert!((r.ghost[0].j - want).abs() < 1e-14, "{} vs {want}", r.ghost[0].j);
        let e = r.edge_between(0, 3).unwrap();
        assert_eq!(r.edges[e].rho, 3.0);
        assert!((r.edges[e].j - spec(1).eval(&[3])).abs() < 1e-18);
    }

    #[test]
    fn cutoff_limits_edges_and_boundary() {
        let r = Region::interval(&spec(1), 7, Cutoff::Radius(2.0)).unwrap();
        assert_eq!(r.n_edges(), 6 + 5);
        assert_eq!(r.boundary_incident, vec![true, true, false, false, false, true, true]);
        assert!(r.omitted_mass > 0.0 && r.omitted_mass < 0.1);
        let s = spec(1);
        assert!((r.ghost[0].j - s.eval(&[1]) - s.eval(&[2])).abs() < 1e-16);
        assert!((r.ghost[1].j - s.eval(&[2])).abs() < 1e-16);
        let a = Region::interval(&spec(1), 40, Cutoff::Auto(1e-6)).unwrap();
        assert!(a.omitted_mass <= 1e-6);
    }

    #[test]
    fn box_is_centered() {
        let r = Region::boxed(&spec(2), 1, Cutoff::Radius(1.0)).unwrap();
        assert_eq!(r.n_vertices(), 9);
        assert_eq!(r.point(r.origin), &[0, 0]);
        assert_eq!(r.n_edges(), 12);
        assert!(!r.boundary_incident[r.origin]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = spec(1);
        assert!(Region::from_points(&s, &[vec![1], vec![2]], &[0], Cutoff::None).is_err());
        assert!(Region::from_points(&s, &[vec![0], vec![0]], &[0], Cutoff::None).is_err());
        assert!(RCParams::new(0.5, 1.0, Boundary::Free).is_err());
        assert!(RCParams::new(1.0, -1.0, Boundary::Free).is_err());
    }
}

//! Exact random-cluster probabilities by enumerating every edge configuration
//! of a small region, plus the finite-energy, domination and ratio-mixing audits
//! built on it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::region::{Boundary, RCParams, Region};
use crate::stats::{pairwise_sum, KahanSum};

/// Largest edge count accepted for enumeration.
pub const EDGE_BUDGET: usize = 26;
/// Vertex sets are handled as 64-bit masks.
pub const MAX_EXACT_VERTICES: usize = 64;
pub const AUDIT_TOL: f64 = 1e-12;

const CHUNK: u64 = 1 << 14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExactError {
    #[error("enumeration budget exceeded: {edges} edges > {budget}")]
    BudgetExceeded { edges: usize, budget: usize },
    #[error("too many vertices for exact enumeration: {0} > {MAX_EXACT_VERTICES}")]
    TooManyVertices(usize),
    #[error("configuration has {got} entries, region has {want} edges")]
    LengthMismatch { got: usize, want: usize },
    #[error("finite-energy violation {violation:e} at edge {edge}")]
    FiniteEnergyViolation { edge: usize, violation: f64 },
    #[error("domination violated by {violation:e} on event {event}")]
    DominationViolation { event: String, violation: f64 },
    #[error("event {0} has probability zero")]
    ZeroProbability(&'static str),
    #[error("event supports overlap on edge {0}")]
    OverlappingSupports(usize),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

/// A configuration together with its cluster structure. Under the wired
/// boundary condition edge indices past the internal ones are boundary edges
/// and the exterior is one extra vertex labelled last.
pub struct ConfigView<'a> {
    /// Bit e set when edge e is open.
    pub omega: u64,
    /// Cluster label of every vertex (and of the exterior, when wired).
    pub labels: &'a [u8],
    pub wired: bool,
    /// Clusters counted by the measure.
    pub n_components: usize,
    n: usize,
}

impl ConfigView<'_> {
    #[inline]
    pub fn is_open(&self, e: usize) -> bool {
        self.omega >> e & 1 == 1
    }

    /// Connected in the full lattice, through the exterior when wired.
    #[inline]
    pub fn connected(&self, a: usize, b: usize) -> bool {
        self.labels[a] == self.labels[b]
    }

    #[inline]
    pub fn reaches_boundary(&self, a: usize) -> bool {
        self.wired && self.labels[a] == self.labels[self.n]
    }

    pub fn cluster_size(&self, a: usize) -> usize {
        self.cluster_members(a).count()
    }

    pub fn cluster_members(&self, a: usize) -> impl Iterator<Item = usize> + '_ {
        let l = self.labels[a];
        self.labels[..self.n].iter().enumerate().filter(move |(_, &x)| x == l).map(|(i, _)| i)
    }
}

/// Precomputed data for weight evaluation.
struct Ctx {
    /// Region vertices; the exterior (wired) is vertex `n`.
    n: usize,
    ends: Vec<(u32, u32)>,
    weights: Vec<f64>,
    q: f64,
    wired: bool,
}

impl Ctx {
    fn new(region: &Region, params: &RCParams) -> Result<Self, ExactError> {
        let m = region.n_measure_edges(params.boundary);
        if m > EDGE_BUDGET {
            return Err(ExactError::BudgetExceeded { edges: m, budget: EDGE_BUDGET });
        }
        Self::unchecked(region, params)
    }

    fn unchecked(region: &Region, params: &RCParams) -> Result<Self, ExactError> {
        let n = region.n_vertices();
        let wired = params.boundary == Boundary::Wired;
        if n + usize::from(wired) > MAX_EXACT_VERTICES {
            return Err(ExactError::TooManyVertices(n));
        }
        let edges = region.measure_edges(params.boundary);
        Ok(Self {
            n,
            ends: edges.iter().map(|&(u, v, _)| (u, v)).collect(),
            weights: edges.iter().map(|&(_, _, j)| params.edge_weight(j)).collect(),
            q: params.q,
            wired,
        })
    }

    fn n_labelled(&self) -> usize {
        self.n + usize::from(self.wired)
    }

    /// Labels the clusters of `omega` (exterior included when wired) and
    /// returns their number. Every exterior vertex has an endpoint in the
    /// boundary edge set, so the exterior cluster always counts.
    fn label(&self, omega: u64, labels: &mut [u8]) -> usize {
        let mut adj = [0u64; MAX_EXACT_VERTICES];
        let mut bits = omega;
        while bits != 0 {
            let e = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let (u, v) = self.ends[e];
            adj[u as usize] |= 1 << v;
            adj[v as usize] |= 1 << u;
        }
        let nl = self.n_labelled();
        let full = if nl == 64 { u64::MAX } else { (1u64 << nl) - 1 };
        let mut remaining = full;
        let mut label = 0usize;
        while remaining != 0 {
            let seed = remaining & remaining.wrapping_neg();
            let mut comp = seed;
            let mut frontier = seed;
            loop {
                let mut next = 0u64;
                let mut f = frontier;
                while f != 0 {
                    let b = f.trailing_zeros() as usize;
                    f &= f - 1;
                    next |= adj[b];
                }
                next &= !comp;
                if next == 0 {
                    break;
                }
                comp |= next;
                frontier = next;
            }
            let mut c = comp;
            while c != 0 {
                let b = c.trailing_zeros() as usize;
                c &= c - 1;
                labels[b] = label as u8;
            }
            remaining &= !comp;
            label += 1;
        }
        label
    }

    fn weight(&self, omega: u64, labels: &mut [u8]) -> (f64, usize) {
        let comps = self.label(omega, labels);
        let mut w = 1.0;
        let mut bits = omega;
        while bits != 0 {
            let e = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            w *= self.weights[e];
        }
        w *= self.q.powi(comps as i32);
        (w, comps)
    }

    /// Σ_ω weight(ω)·obs(ω) for every observable slot, and Σ_ω weight(ω).
    fn enumerate<F>(&self, n_obs: usize, obs: F) -> (Vec<f64>, f64)
    where
        F: Fn(&ConfigView, &mut [f64]) + Sync,
    {
        let m = self.ends.len();
        let total: u64 = 1 << m;
        let n_chunks = total.div_ceil(CHUNK);
        let partial: Vec<(Vec<f64>, f64)> = (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let mut labels = vec![0u8; self.n_labelled()];
                let mut vals = vec![0.0; n_obs];
                let mut acc = vec![KahanSum::default(); n_obs];
                let mut z = KahanSum::default();
                let lo = c * CHUNK;
                let hi = (lo + CHUNK).min(total);
                for i in lo..hi {
                    // Gray-code order
                    let omega = i ^ (i >> 1);
                    let (w, comps) = self.weight(omega, &mut labels);
                    z.add(w);
                    if n_obs == 0 || w == 0.0 {
                        continue;
                    }
                    vals.iter_mut().for_each(|v| *v = 0.0);
                    let view = ConfigView {
                        omega,
                        labels: &labels,
                        wired: self.wired,
                        n_components: comps,
                        n: self.n,
                    };
                    obs(&view, &mut vals);
                    for (a, v) in acc.iter_mut().zip(&vals) {
                        if *v != 0.0 {
                            a.add(w * v);
                        }
                    }
                }
                (acc.iter().map(|a| a.value()).collect(), z.value())
            })
            .collect();
        let z = pairwise_sum(&partial.iter().map(|p| p.1).collect::<Vec<_>>());
        let sums = (0..n_obs)
            .map(|k| pairwise_sum(&partial.iter().map(|p| p.0[k]).collect::<Vec<_>>()))
            .collect();
        (sums, z)
    }
}

fn omega_from_bools(m: usize, omega: &[bool]) -> Result<u64, ExactError> {
    if omega.len() != m {
        return Err(ExactError::LengthMismatch { got: omega.len(), want: m });
    }
    Ok(omega.iter().enumerate().fold(0u64, |m, (i, &b)| if b { m | 1 << i } else { m }))
}

/// Π_e (e^{βJ_e}−1)^{ω_e} · q^{κ(ω)}, with `omega` over the measure's edges
/// (see [`Region::measure_edges`]).
pub fn partition_weight(region: &Region, params: &RCParams, omega: &[bool]) -> Result<f64, ExactError> {
    let ctx = Ctx::new(region, params)?;
    let bits = omega_from_bools(ctx.ends.len(), omega)?;
    let mut labels = vec![0u8; ctx.n_labelled()];
    Ok(ctx.weight(bits, &mut labels).0)
}

/// Number of clusters counted by the measure for configuration `omega`.
pub fn cluster_count(region: &Region, params: &RCParams, omega: &[bool]) -> Result<usize, ExactError> {
    let ctx = Ctx::new(region, params)?;
    let bits = omega_from_bools(ctx.ends.len(), omega)?;
    let mut labels = vec![0u8; ctx.n_labelled()];
    Ok(ctx.label(bits, &mut labels))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExactProbability {
    pub probability: f64,
    pub weight_event: f64,
    pub weights_total: f64,
}

pub fn exact_probability<E>(region: &Region, params: &RCParams, event: E) -> Result<ExactProbability, ExactError>
where
    E: Fn(&ConfigView) -> bool + Sync,
{
    let ctx = Ctx::new(region, params)?;
    let (s, z) = ctx.enumerate(1, |v, out| {
        if event(v) {
            out[0] = 1.0;
        }
    });
    Ok(ExactProbability { probability: s[0] / z, weight_event: s[0], weights_total: z })
}

/// Exact expectations of `n_obs` observables filled in by `obs`.
pub fn exact_expectations<F>(
    region: &Region,
    params: &RCParams,
    n_obs: usize,
    obs: F,
) -> Result<Vec<f64>, ExactError>
where
    F: Fn(&ConfigView, &mut [f64]) + Sync,
{
    let ctx = Ctx::new(region, params)?;
    let (s, z) = ctx.enumerate(n_obs, obs);
    Ok(s.into_iter().map(|v| v / z).collect())
}

/// Exact G(origin, v) for every vertex v, with the connection taken in the
/// full lattice (through the exterior when wired).
pub fn exact_two_point(region: &Region, params: &RCParams) -> Result<Vec<f64>, ExactError> {
    let o = region.origin;
    let n = region.n_vertices();
    exact_expectations(region, params, n, |v, out| {
        for (x, slot) in out.iter_mut().enumerate() {
            if v.connected(o, x) {
                *slot = 1.0;
            }
        }
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FiniteEnergyReport {
    pub edges: usize,
    pub patterns_checked: u64,
    pub sampled: bool,
    pub max_violation: f64,
    pub worst_edge: Option<usize>,
}

/// Checks (e^{βJ}−1)/(e^{βJ}−1+q) ≤ P(ω_e=1 | rest) ≤ 1−e^{−βJ} on every
/// conditioning pattern, computed from the two configuration weights.
pub fn finite_energy_audit(region: &Region, params: &RCParams) -> Result<FiniteEnergyReport, ExactError> {
    let ctx = Ctx::new(region, params)?;
    let edges = region.measure_edges(params.boundary);
    let m = ctx.ends.len();
    if m == 0 {
        return Ok(FiniteEnergyReport { edges: 0, patterns_checked: 0, sampled: false, max_violation: 0.0, worst_edge: None });
    }
    let per_edge: u64 = 1 << (m - 1);
    let sampled = (m as u64) * per_edge > 1 << 26;
    let per_edge_checked = if sampled { 1 << 20 } else { per_edge };
    let results: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|e| {
            let mut labels = vec![0u8; ctx.n_labelled()];
            let j = edges[e].2;
            let lo = params.p_separate(j);
            let hi = params.p_connected(j);
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + e as u64);
            let mut worst = 0.0f64;
            for k in 0..per_edge_checked {
                let rest = if sampled { rng.gen::<u64>() & (per_edge - 1) } else { k };
                // spread the m−1 free bits around position e
                let low = rest & ((1u64 << e) - 1);
                let high = (rest >> e) << (e + 1);
                let closed = low | high;
                let open = closed | 1 << e;
                let w0 = ctx.weight(closed, &mut labels).0;
                let w1 = ctx.weight(open, &mut labels).0;
                if w0 + w1 == 0.0 {
                    continue;
                }
                let p = w1 / (w0 + w1);
                worst = worst.max(lo - p).max(p - hi);
            }
            worst
        })
        .collect();
    let (worst_edge, max_violation) = results
        .iter()
        .enumerate()
        .fold((None, 0.0f64), |acc, (e, &v)| if v > acc.1 { (Some(e), v) } else { acc });
    let report = FiniteEnergyReport {
        edges: m,
        patterns_checked: per_edge_checked * m as u64,
        sampled,
        max_violation,
        worst_edge,
    };
    if max_violation > AUDIT_TOL {
        return Err(ExactError::FiniteEnergyViolation { edge: worst_edge.unwrap(), violation: max_violation });
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct DominationReport {
    pub events: usize,
    /// max over events of P_low(A) − P_high(A); nonpositive when ordered.
    pub max_violation: f64,
    pub worst_event: String,
}

/// Compares the free measure at β with the wired measure at β′ ≥ β on every
/// internal single-edge event and every connection event using internal
/// edges only.
pub fn stochastic_domination_audit(
    region: &Region,
    q: f64,
    beta: f64,
    beta_prime: f64,
) -> Result<DominationReport, ExactError> {
    if beta > beta_prime {
        return Err(ExactError::Invalid(format!("need beta <= beta', got {beta} > {beta_prime}")));
    }
    let low = RCParams::new(q, beta, Boundary::Free).map_err(|e| ExactError::Invalid(e.to_string()))?;
    let high = RCParams::new(q, beta_prime, Boundary::Wired).map_err(|e| ExactError::Invalid(e.to_string()))?;
    domination_between(region, &low, &high)
}

/// Same as [`stochastic_domination_audit`] for arbitrary parameter pairs.
pub fn domination_between(region: &Region, low: &RCParams, high: &RCParams) -> Result<DominationReport, ExactError> {
    let m = region.n_edges();
    let n = region.n_vertices();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| ((a + 1)..n).map(move |b| (a, b))).collect();
    let ends: Vec<(usize, usize)> = region.edges.iter().map(|e| (e.u as usize, e.v as usize)).collect();
    let obs = |v: &ConfigView, out: &mut [f64]| {
        let mut adj = [0u64; MAX_EXACT_VERTICES];
        for (e, slot) in out[..m].iter_mut().enumerate() {
            if v.is_open(e) {
                *slot = 1.0;
                let (a, b) = ends[e];
                adj[a] |= 1 << b;
                adj[b] |= 1 << a;
            }
        }
        let mut comp = [0u64; MAX_EXACT_VERTICES];
        for a in 0..n {
            let mut c = 1u64 << a;
            let mut frontier = c;
            while frontier != 0 {
                let mut next = 0;
                let mut f = frontier;
                while f != 0 {
                    next |= adj[f.trailing_zeros() as usize];
                    f &= f - 1;
                }
                frontier = next & !c;
                c |= next;
            }
            comp[a] = c;
        }
        for (k, &(a, b)) in pairs.iter().enumerate() {
            if comp[a] >> b & 1 == 1 {
                out[m + k] = 1.0;
            }
        }
    };
    let p_low = exact_expectations(region, low, m + pairs.len(), obs)?;
    let p_high = exact_expectations(region, high, m + pairs.len(), obs)?;
    let mut worst = f64::NEG_INFINITY;
    let mut worst_event = String::new();
    for k in 0..p_low.len() {
        let d = p_low[k] - p_high[k];
        if d > worst {
            worst = d;
            worst_event = if k < m {
                format!("edge {k} open")
            } else {
                let (a, b) = pairs[k - m];
                format!("{a} <-> {b}")
            };
        }
    }
    if worst > AUDIT_TOL {
        return Err(ExactError::DominationViolation { event: worst_event, violation: worst });
    }
    Ok(DominationReport { events: p_low.len(), max_violation: worst, worst_event })
}

#[derive(Clone, Debug, Serialize)]
pub struct RatioMixingReport {
    pub p_a: f64,
    pub p_b: f64,
    pub p_ab: f64,
    /// |Φ(A∩B)/(Φ(A)Φ(B)) − 1|
    pub deviation: f64,
    /// Σ_{x∈V_A, y∈V_B} C e^{−c‖x−y‖₂}
    pub bound: f64,
}

/// Exact ratio-mixing deviation for events A and B supported on disjoint
/// edge sets `support_a` and `support_b`.
pub fn ratio_mixing_check<A, B>(
    region: &Region,
    params: &RCParams,
    support_a: &[usize],
    event_a: A,
    support_b: &[usize],
    event_b: B,
    c_const: f64,
    c_rate: f64,
) -> Result<RatioMixingReport, ExactError>
where
    A: Fn(&ConfigView) -> bool + Sync,
    B: Fn(&ConfigView) -> bool + Sync,
{
    if let Some(&e) = support_a.iter().find(|e| support_b.contains(e)) {
        return Err(ExactError::OverlappingSupports(e));
    }
    if support_a.iter().chain(support_b).any(|&e| e >= region.n_edges()) {
        return Err(ExactError::Invalid("support edge out of range".into()));
    }
    let p = exact_expectations(region, params, 3, |v, out| {
        let a = event_a(v);
        let b = event_b(v);
        out[0] = f64::from(u8::from(a));
        out[1] = f64::from(u8::from(b));
        out[2] = f64::from(u8::from(a && b));
    })?;
    if p[0] <= 0.0 {
        return Err(ExactError::ZeroProbability("A"));
    }
    if p[1] <= 0.0 {
        return Err(ExactError::ZeroProbability("B"));
    }
    let verts = |s: &[usize]| {
        let mut v: Vec<usize> = s
            .iter()
            .flat_map(|&e| [region.edges[e].u as usize, region.edges[e].v as usize])
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let (va, vb) = (verts(support_a), verts(support_b));
    let mut bound = 0.0;
    for &x in &va {
        for &y in &vb {
            let d2: i64 = (0..region.dim).map(|c| (region.points[x][c] - region.points[y][c]).pow(2)).sum();
            bound += c_const * (-c_rate * (d2 as f64).sqrt()).exp();
        }
    }
    Ok(RatioMixingReport {
        p_a: p[0],
        p_b: p[1],
        p_ab: p[2],
        deviation: (p[2] / (p[0] * p[1]) - 1.0).abs(),
        bound,
    })
}

/// Random configuration drawn from a fixed generator, for property tests.
pub fn random_omega(m: usize, seed: u64) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m).map(|_| rng.gen::<bool>()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::couplings::{normalize, CouplingSpec, PrefactorSpec};
    use crate::geometry::NormSpec;
    use crate::region::Cutoff;

    fn spec() -> CouplingSpec {
        normalize(NormSpec::l1(1), PrefactorSpec::polynomial(2.0, true), None).unwrap()
    }

    fn pair_region() -> Region {
        Region::interval(&spec(), 2, Cutoff::None).unwrap()
    }

    /// Independent oracle: brute-force union-find over explicit edge lists.
    fn oracle_kappa(n: usize, edges: &[(usize, usize)], omega: &[bool]) -> usize {
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut Vec<usize>, x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            r
        }
        for (k, &(a, b)) in edges.iter().enumerate() {
            if omega[k] {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra] = rb;
            }
        }
        (0..n).filter(|&x| find(&mut parent, x) == x).count()
    }

    #[test]
    fn single_edge_weights() {
        let r = pair_region();
        let p = RCParams::free(2.0, 0.7);
        let j = r.edges[0].j;
        assert_eq!(partition_weight(&r, &p, &[false]).unwrap(), 4.0);
        let w = partition_weight(&r, &p, &[true]).unwrap();
        assert!((w - 2.0 * (0.7 * j).exp_m1()).abs() < 1e-15);
        let prob = exact_probability(&r, &p, |v| v.is_open(0)).unwrap().probability;
        assert!((prob - p.p_separate(j)).abs() < 1e-15);
        assert_eq!(exact_probability(&r, &p, |_| true).unwrap().probability, 1.0);
    }

    #[test]
    fn all_closed_counts_singletons() {
        let r = Region::interval(&spec(), 5, Cutoff::None).unwrap();
        let p = RCParams::free(1.5, 0.3);
        let w = partition_weight(&r, &p, &vec![false; r.n_edges()]).unwrap();
        assert!((w - 1.5f64.powi(5)).abs() < 1e-12);
    }

    #[test]
    fn q_one_is_bernoulli_product() {
        let r = Region::interval(&spec(), 3, Cutoff::None).unwrap();
        let p = RCParams::free(1.0, 0.9);
        let pe: Vec<f64> = r.edges.iter().map(|e| p.p_connected(e.j)).collect();
        // edges: (0,1), (0,2), (1,2)
        let (a, b, c) = (pe[0], pe[1], pe[2]);
        let want = b + (1.0 - b) * a * c;
        let got = exact_probability(&r, &p, |v| v.connected(0, 2)).unwrap().probability;
        assert!((got - want).abs() < 1e-15, "{got} vs {want}");
    }

    #[test]
    fn kappa_matches_union_find_oracle() {
        let r = Region::interval(&spec(), 6, Cutoff::Radius(3.0)).unwrap();
        let p = RCParams::free(2.0, 1.0);
        let edges: Vec<(usize, usize)> = r.edges.iter().map(|e| (e.u as usize, e.v as usize)).collect();
        let pw = RCParams::wired(2.0, 1.0);
        let wired_edges: Vec<(usize, usize)> =
            r.measure_edges(Boundary::Wired).iter().map(|&(u, v, _)| (u as usize, v as usize)).collect();
        assert_eq!(wired_edges.len(), r.n_edges() + 6);
        for seed in 0..200 {
            let om = random_omega(r.n_edges(), seed);
            assert_eq!(cluster_count(&r, &p, &om).unwrap(), oracle_kappa(6, &edges, &om));
            let om = random_omega(wired_edges.len(), seed);
            assert_eq!(cluster_count(&r, &pw, &om).unwrap(), oracle_kappa(7, &wired_edges, &om));
        }
    }

    #[test]
    fn wired_boundary_edges_are_random() {
        let s = spec();
        let r = Region::from_points(&s, &[vec![0]], &[0], Cutoff::None).unwrap();
        let p = RCParams::wired(2.0, 0.8);
        assert_eq!(r.ghost.len(), 1);
        assert!((r.ghost[0].j - 1.0).abs() < 1e-15);
        // one edge into the exterior: open with probability w/(w+q)
        let got = exact_probability(&r, &p, |v| v.reaches_boundary(0)).unwrap().probability;
        assert!((got - p.p_separate(1.0)).abs() < 1e-15);
        assert_eq!(exact_probability(&r, &RCParams::wired(2.0, 0.0), |v| v.reaches_boundary(0)).unwrap().probability, 0.0);
        // q = 1: connection through the exterior needs both boundary edges
        let r = Region::interval(&s, 2, Cutoff::None).unwrap();
        let p = RCParams::wired(1.0, 0.8);
        let (p01, a, b) = (p.p_connected(r.edges[0].j), p.p_connected(r.ghost[0].j), p.p_connected(r.ghost[1].j));
        let want = p01 + (1.0 - p01) * a * b;
        let got = exact_two_point(&r, &p).unwrap()[1];
        assert!((got - want).abs() < 1e-15);
        let free = exact_two_point(&r, &RCParams::free(1.0, 0.8)).unwrap()[1];
        assert!(got > free);
    }

    #[test]
    fn finite_energy_examples() {
        let r = pair_region();
        let rep = finite_energy_audit(&r, &RCParams::free(2.0, 0.5)).unwrap();
        assert!(rep.max_violation <= 0.0 + 1e-16);
        let tri = Region::interval(&spec(), 3, Cutoff::None).unwrap();
        finite_energy_audit(&tri, &RCParams::free(2.0, 0.5)).unwrap();
        let rep = finite_energy_audit(&tri, &RCParams::free(1.0, 0.5)).unwrap();
        assert!(rep.max_violation.abs() < 1e-15);
    }

    #[test]
    fn domination_examples() {
        let r = Region::interval(&spec(), 5, Cutoff::Radius(2.0)).unwrap();
        stochastic_domination_audit(&r, 2.0, 0.3, 0.6).unwrap();
        stochastic_domination_audit(&r, 2.0, 0.5, 0.5).unwrap();
        let rep = stochastic_domination_audit(&r, 1.0, 0.5, 0.5).unwrap();
        assert!(rep.max_violation.abs() < 1e-14);
        assert!(stochastic_domination_audit(&r, 2.0, 0.6, 0.3).is_err());
    }

    #[test]
    fn budget_is_enforced() {
        let r = Region::interval(&spec(), 9, Cutoff::None).unwrap();
        assert_eq!(r.n_edges(), 36);
        assert!(matches!(
            exact_probability(&r, &RCParams::free(1.0, 0.1), |_| true),
            Err(ExactError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn ratio_mixing_independence_and_decay() {
        let r = Region::interval(&spec(), 8, Cutoff::Radius(1.0)).unwrap();
        // q=1: independent edges
        let rep = ratio_mixing_check(&r, &RCParams::free(1.0, 0.4), &[0], |v| v.is_open(0), &[6], |v| v.is_open(6), 1.0, 1.0)
            .unwrap();
        assert!(rep.deviation < 1e-14);
        assert!(ratio_mixing_check(&r, &RCParams::free(1.0, 0.4), &[0], |v| v.is_open(0), &[0], |v| v.is_open(0), 1.0, 1.0)
            .is_err());
    }

    #[test]
    fn exact_two_point_origin_is_one() {
        let r = Region::interval(&spec(), 5, Cutoff::None).unwrap();
        let g = exact_two_point(&r, &RCParams::free(2.0, 0.5)).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-15);
        assert!(g[1..].iter().all(|&x| x > 0.0 && x < 1.0));
    }
}

//! Two-sided exploration estimator of Φ(0 ↔ x) for independent edges.
//!
//! Clusters are grown from both endpoints. An explored vertex reveals its
//! edges to vertices not yet placed on either side, and open ones pull the
//! neighbour onto the explorer's side. When every placed vertex has been
//! explored, the two sides can only meet through cross pairs nobody revealed,
//! so 1 − exp(−β Σ J) over those pairs is the connection probability given
//! everything revealed, and hence an unbiased estimate of Φ(0 ↔ x).
//!
//! Edges are split at K = ρ(x)/2. Both sides first grow through short edges,
//! then reveal long edges (re-growing short edges around every newcomer), the
//! origin side first. The local clusters at both ends are therefore placed
//! before any long edge is revealed, and long bridges between them stay
//! unrevealed. A pair (a, b) is unrevealed when each endpoint was placed
//! before the other explored edges of that pair's class.
//!
//! The estimate never needs an open long edge to be sampled, which makes
//! connection probabilities of order J_x ≈ e^{−ρ(x)} accessible.

use serde::Serialize;

use crate::couplings::CouplingSpec;
use crate::geometry::MAX_DIM;
use crate::region::{Boundary, RCParams, Region};

use super::McError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExplorationOutcome {
    /// Conditional connection probability given the exploration.
    pub phi: f64,
    /// Vertices reached from both sides; equals |C(0)| on {0 ↔ x}.
    pub size: usize,
}

#[derive(Clone, Debug)]
enum PairCoupling {
    /// d = 1: coupling by coordinate distance; ρ is `unit`·distance.
    Line { coord: Vec<i64>, table: Vec<f64>, unit: f64 },
    General { points: Vec<[i64; MAX_DIM]>, dim: usize, spec: CouplingSpec, cutoff: Option<f64> },
}

impl PairCoupling {
    fn new(region: &Region) -> Self {
        if region.dim == 1 {
            let coord: Vec<i64> = region.points.iter().map(|p| p[0]).collect();
            let span = (coord.iter().max().unwrap() - coord.iter().min().unwrap()) as usize;
            let table = (0..=span)
                .map(|k| {
                    if k == 0 {
                        return 0.0;
                    }
                    let rho = region.coupling.norm.rho_i(&[k as i64]);
                    if region.cutoff_radius.is_some_and(|r| rho > r) {
                        0.0
                    } else {
                        region.coupling.eval_rho(rho)
                    }
                })
                .collect();
            Self::Line { coord, table, unit: region.coupling.norm.rho_i(&[1]) }
        } else {
            Self::General {
                points: region.points.clone(),
                dim: region.dim,
                spec: region.coupling.clone(),
                cutoff: region.cutoff_radius,
            }
        }
    }

    #[inline]
    fn rho(&self, a: u32, b: u32) -> f64 {
        match self {
            Self::Line { coord, unit, .. } => *unit * (coord[a as usize] - coord[b as usize]).unsigned_abs() as f64,
            Self::General { points, dim, spec, .. } => {
                let mut diff = [0i64; MAX_DIM];
                for c in 0..*dim {
                    diff[c] = points[b as usize][c] - points[a as usize][c];
                }
                spec.norm.rho_i(&diff[..*dim])
            }
        }
    }

    /// (ρ, J) of the pair.
    #[inline]
    fn pair(&self, a: u32, b: u32) -> (f64, f64) {
        match self {
            Self::Line { coord, table, unit } => {
                let k = (coord[a as usize] - coord[b as usize]).unsigned_abs() as usize;
                (*unit * k as f64, table[k])
            }
            Self::General { spec, cutoff, .. } => {
                let rho = self.rho(a, b);
                if cutoff.is_some_and(|r| rho > r) {
                    (rho, 0.0)
                } else {
                    (rho, spec.eval_rho(rho))
                }
            }
        }
    }
}

const NONE: u8 = 0;
const SIDE_A: u8 = 1;
const SIDE_B: u8 = 2;

/// Reusable per-chain state for the two-sided estimator.
#[derive(Clone, Debug)]
pub struct Exploration {
    origin: u32,
    beta: f64,
    coupling: PairCoupling,
    adj: Vec<Vec<u32>>,
    touched: Vec<u32>,
    seen: Vec<u32>,
    stamp: u32,
    side: Vec<u8>,
    /// Step at which each vertex was placed (−1 for the two roots).
    disc: Vec<i64>,
    /// Steps at which each vertex explored its short and long edges.
    t_short: Vec<i64>,
    t_long: Vec<i64>,
    members: [Vec<u32>; 2],
}

impl Exploration {
    /// Requires independent edges (q = 1) and the free boundary condition.
    pub fn new(region: &Region, params: &RCParams) -> Result<Self, McError> {
        if params.q != 1.0 {
            return Err(McError::NotBernoulli(params.q));
        }
        if params.boundary != Boundary::Free {
            return Err(McError::NeedsFreeBoundary);
        }
        let n = region.n_vertices();
        Ok(Self {
            origin: region.origin as u32,
            beta: params.beta,
            coupling: PairCoupling::new(region),
            adj: vec![Vec::new(); n],
            touched: Vec::new(),
            seen: vec![0; n],
            stamp: 0,
            side: vec![NONE; n],
            disc: vec![0; n],
            t_short: vec![0; n],
            t_long: vec![0; n],
            members: [Vec::new(), Vec::new()],
        })
    }

    fn next_stamp(&mut self) -> u32 {
        self.stamp = self.stamp.wrapping_add(1);
        if self.stamp == 0 {
            self.seen.iter_mut().for_each(|s| *s = 0);
            self.stamp = 1;
        }
        self.stamp
    }

    /// Loads a configuration given by its open edges.
    pub fn load<I: IntoIterator<Item = (u32, u32)>>(&mut self, open: I) {
        for &v in &self.touched {
            self.adj[v as usize].clear();
        }
        self.touched.clear();
        for (u, v) in open {
            for (a, b) in [(u, v), (v, u)] {
                let list = &mut self.adj[a as usize];
                if list.is_empty() {
                    self.touched.push(a);
                }
                list.push(b);
            }
        }
        // neighbours are visited by index
        for &v in &self.touched {
            self.adj[v as usize].sort_unstable();
        }
    }

    /// |C(0)| in the loaded configuration.
    pub fn origin_cluster_size(&mut self) -> usize {
        let s = self.next_stamp();
        let mut stack = vec![self.origin];
        self.seen[self.origin as usize] = s;
        let mut size = 0;
        while let Some(v) = stack.pop() {
            size += 1;
            for k in 0..self.adj[v as usize].len() {
                let w = self.adj[v as usize][k];
                if self.seen[w as usize] != s {
                    self.seen[w as usize] = s;
                    stack.push(w);
                }
            }
        }
        size
    }

    /// Estimator value for target vertex `x` on the loaded configuration.
    pub fn outcome(&mut self, x: u32) -> ExplorationOutcome {
        if x != self.origin && self.adj[self.origin as usize].is_empty() && self.adj[x as usize].is_empty() {
            // both ends isolated: only the direct pair is unrevealed
            let j = self.coupling.pair(self.origin, x).1;
            return ExplorationOutcome { phi: -(-self.beta * j).exp_m1(), size: 2 };
        }
        self.outcome_explicit(x)
    }

    fn place(&mut self, v: u32, side: u8, step: i64, stamp: u32) {
        self.seen[v as usize] = stamp;
        self.side[v as usize] = side;
        self.disc[v as usize] = step;
        self.members[usize::from(side - 1)].push(v);
    }

    /// Explores, for side `side`, the short edges of every placed vertex that
    /// has not done so yet.
    fn grow_short(&mut self, side: u8, cursor: &mut usize, k: f64, step: &mut i64, stamp: u32) {
        let si = usize::from(side - 1);
        while *cursor < self.members[si].len() {
            let v = self.members[si][*cursor];
            *cursor += 1;
            self.t_short[v as usize] = *step;
            for i in 0..self.adj[v as usize].len() {
                let w = self.adj[v as usize][i];
                if self.seen[w as usize] != stamp && self.coupling.rho(v, w) <= k {
                    self.place(w, side, *step, stamp);
                }
            }
            *step += 1;
        }
    }

    /// The full exploration, without the isolated-endpoint shortcut.
    pub fn outcome_explicit(&mut self, x: u32) -> ExplorationOutcome {
        if x == self.origin {
            return ExplorationOutcome { phi: 1.0, size: self.origin_cluster_size() };
        }
        let k = 0.5 * self.coupling.rho(self.origin, x);
        let s = self.next_stamp();
        self.members[0].clear();
        self.members[1].clear();
        self.place(self.origin, SIDE_A, -1, s);
        self.place(x, SIDE_B, -1, s);
        let mut step = 0i64;
        let mut short_cursor = [0usize; 2];
        let mut long_cursor = [0usize; 2];
        for side in [SIDE_A, SIDE_B] {
            let si = usize::from(side - 1);
            self.grow_short(side, &mut short_cursor[si], k, &mut step, s);
        }
        for side in [SIDE_A, SIDE_B] {
            let si = usize::from(side - 1);
            while long_cursor[si] < self.members[si].len() {
                let v = self.members[si][long_cursor[si]];
                long_cursor[si] += 1;
                self.t_long[v as usize] = step;
                for i in 0..self.adj[v as usize].len() {
                    let w = self.adj[v as usize][i];
                    if self.seen[w as usize] != s && self.coupling.rho(v, w) > k {
                        self.place(w, side, step, s);
                    }
                }
                step += 1;
                self.grow_short(side, &mut short_cursor[si], k, &mut step, s);
            }
        }
        let mut hazard = 0.0;
        for &a in &self.members[0] {
            let (da, sa, la) = (self.disc[a as usize], self.t_short[a as usize], self.t_long[a as usize]);
            for &b in &self.members[1] {
                let (rho, j) = self.coupling.pair(a, b);
                let db = self.disc[b as usize];
                let unrevealed = if rho <= k {
                    db < sa && da < self.t_short[b as usize]
                } else {
                    db < la && da < self.t_long[b as usize]
                };
                if unrevealed {
                    hazard += j;
                }
            }
        }
        let size = self.members[0].len() + self.members[1].len();
        ExplorationOutcome { phi: -(-self.beta * hazard).exp_m1(), size }
    }
}

/// One-shot evaluation on a configuration given by its open edges, always
/// through the step-by-step exploration.
pub fn joint_exploration_reference(
    region: &Region,
    params: &RCParams,
    open: &[(u32, u32)],
    x: usize,
) -> Result<ExplorationOutcome, McError> {
    let mut e = Exploration::new(region, params)?;
    e.load(open.iter().copied());
    Ok(e.outcome_explicit(x as u32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::couplings::{normalize, PrefactorSpec};
    use crate::exact::{exact_expectations, random_omega};
    use crate::geometry::NormSpec;
    use crate::region::Cutoff;

    fn region(n: usize, alpha: f64) -> Region {
        let spec = normalize(NormSpec::l1(1), PrefactorSpec::polynomial(alpha, true), None).unwrap();
        Region::segment(&spec, -1, n as i64 - 2, Cutoff::None).unwrap()
    }

    fn open_pairs(r: &Region, om: &[bool]) -> Vec<(u32, u32)> {
        r.edges.iter().zip(om).filter(|(_, &o)| o).map(|(e, _)| (e.u, e.v)).collect()
    }

    #[test]
    fn fast_path_matches_step_by_step() {
        let r = region(7, 1.0);
        let p = RCParams::free(1.0, 0.7);
        let mut e = Exploration::new(&r, &p).unwrap();
        for seed in 0..400 {
            let om = random_omega(r.n_edges(), seed);
            e.load(open_pairs(&r, &om));
            for x in 0..7u32 {
                let fast = e.outcome(x);
                let slow = e.outcome_explicit(x);
                assert_eq!(fast.size, slow.size, "seed {seed} x {x}");
                assert!((fast.phi - slow.phi).abs() < 1e-15, "seed {seed} x {x}: {fast:?} {slow:?}");
            }
        }
    }

    /// Σ_ω P(ω) φ(ω) must equal Φ(0 ↔ x) exactly.
    #[test]
    fn unbiased_against_enumeration() {
        let r = region(6, 2.0);
        let p = RCParams::free(1.0, 1.5);
        let n = r.n_vertices();
        let o = r.origin;
        let exact = exact_expectations(&r, &p, n, |v, out| {
            for (x, s) in out.iter_mut().enumerate() {
                if v.connected(o, x) {
                    *s = 1.0;
                }
            }
        })
        .unwrap();
        let m = r.n_edges();
        let pe: Vec<f64> = r.edges.iter().map(|e| p.p_connected(e.j)).collect();
        let mut e = Exploration::new(&r, &p).unwrap();
        let mut mean = vec![0.0; n];
        for bits in 0u64..1 << m {
            let om: Vec<bool> = (0..m).map(|k| bits >> k & 1 == 1).collect();
            let w: f64 = (0..m).map(|k| if om[k] { pe[k] } else { 1.0 - pe[k] }).product();
            e.load(open_pairs(&r, &om));
            for (x, acc) in mean.iter_mut().enumerate() {
                *acc += w * e.outcome(x as u32).phi;
            }
        }
        for x in 0..n {
            assert!((mean[x] - exact[x]).abs() < 1e-13, "x={x}: {} vs {}", mean[x], exact[x]);
        }
    }

    #[test]
    fn requires_independent_free_edges() {
        let r = region(4, 2.0);
        assert!(Exploration::new(&r, &RCParams::free(2.0, 0.5)).is_err());
        assert!(Exploration::new(&r, &RCParams::wired(1.0, 0.5)).is_err());
    }
}

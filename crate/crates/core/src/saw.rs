//! Self-avoiding walks with weight Π λJ_{step}: exact enumeration of the
//! two-point partial sums, the tilted step cone and the divergence
//! certificate for its walk generating function.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::couplings::CouplingSpec;
use crate::exact::{exact_two_point, ExactError};
use crate::geometry::{dot, euclid, for_each_lattice_in_shell, sphere_directions, MAX_DIM};
use crate::region::{RCParams, Region};

/// Walks visited by one enumeration at most.
pub const WALK_BUDGET: u64 = 10_000_000;
/// Finest cone slack tried, as a power of 1/2.
pub const DELTA_MAX_EXPONENT: u32 = 30;
/// Directions sampled when searching for a half-space witness.
pub const WITNESS_DIRECTIONS: usize = 720;
/// Partial sums are followed past this value by the divergence check.
pub const DIVERGENCE_TARGET: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SawError {
    #[error("walk revisits vertex {0:?}")]
    SelfIntersection(Vec<i64>),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("enumeration budget of {0} walks exceeded")]
    BudgetExceeded(u64),
    #[error("no cone slack 2^-k, k <= {DELTA_MAX_EXPONENT}, gives a valid step cone")]
    NoCone,
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Exact(#[from] ExactError),
}

/// Default step truncation radius per dimension.
pub fn default_step_radius(dim: usize) -> f64 {
    if dim == 1 {
        64.0
    } else {
        16.0
    }
}

type Point = [i64; MAX_DIM];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Walk {
    pub dim: usize,
    pub vertices: Vec<Point>,
}

impl Walk {
    pub fn new(dim: usize, vertices: &[Vec<i64>]) -> Result<Self, SawError> {
        let mut out = Vec::with_capacity(vertices.len());
        for v in vertices {
            if v.len() != dim {
                return Err(SawError::Dimension { expected: dim, got: v.len() });
            }
            let mut p = [0; MAX_DIM];
            p[..dim].copy_from_slice(v);
            out.push(p);
        }
        Ok(Self { dim, vertices: out })
    }

    /// Number of steps.
    pub fn len(&self) -> usize {
        self.vertices.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The first repeated vertex, if any.
    pub fn first_repeat(&self) -> Option<Vec<i64>> {
        let mut seen = std::collections::HashSet::with_capacity(self.vertices.len());
        self.vertices.iter().find(|p| !seen.insert(**p)).map(|p| p[..self.dim].to_vec())
    }
}

/// w_λ(γ) = Π_i λ J_{γ_i − γ_{i−1}}.
pub fn walk_weight(spec: &CouplingSpec, lambda: f64, walk: &Walk) -> Result<f64, SawError> {
    if walk.dim != spec.dim() {
        return Err(SawError::Dimension { expected: spec.dim(), got: walk.dim });
    }
    if let Some(p) = walk.first_repeat() {
        return Err(SawError::SelfIntersection(p));
    }
    let d = walk.dim;
    let mut w = 1.0;
    for pair in walk.vertices.windows(2) {
        let mut step = [0i64; MAX_DIM];
        for c in 0..d {
            step[c] = pair[1][c] - pair[0][c];
        }
        w *= lambda * spec.eval(&step[..d]);
    }
    Ok(w)
}

/// Partial sums of G_λ(0, x) over enumerated walks.
#[derive(Clone, Debug, Serialize)]
pub struct SawTwoPoint {
    /// Entry L−1 holds the sum over walks of length ≤ L.
    pub partial_sums: Vec<f64>,
    pub walks_visited: u64,
    pub step_radius: f64,
}

struct Dfs<'a> {
    steps: &'a [(Point, f64)],
    dim: usize,
    target: Point,
    max_len: usize,
    path: Vec<Point>,
    by_len: Vec<f64>,
    visited: u64,
    counter: &'a AtomicU64,
    abort: &'a AtomicBool,
}

impl Dfs<'_> {
    const FLUSH: u64 = 4096;

    fn tick(&mut self) -> bool {
        self.visited += 1;
        if self.visited % Self::FLUSH == 0 {
            let total = self.counter.fetch_add(Self::FLUSH, Ordering::Relaxed) + Self::FLUSH;
            if total > WALK_BUDGET {
                self.abort.store(true, Ordering::Relaxed);
            }
        }
        !self.abort.load(Ordering::Relaxed)
    }

    fn add(&self, a: &Point, b: &Point) -> Point {
        let mut p = *a;
        for c in 0..self.dim {
            p[c] += b[c];
        }
        p
    }

    /// Extends the current path (length `len`, weight `w`).
    fn extend(&mut self, w: f64) {
        let len = self.path.len() - 1;
        let here = *self.path.last().unwrap();
        if len + 1 == self.max_len {
            // last step: only the direct jump to the target can finish
            let mut diff = [0i64; MAX_DIM];
            for c in 0..self.dim {
                diff[c] = self.target[c] - here[c];
            }
            if let Some(&(_, wj)) = self.steps.iter().find(|(s, _)| *s == diff) {
                self.by_len[len] += w * wj;
            }
            return;
        }
        for k in 0..self.steps.len() {
            let (s, wj) = self.steps[k];
            let next = self.add(&here, &s);
            if self.path.contains(&next) {
                continue;
            }
            if !self.tick() {
                return;
            }
            if next == self.target {
                // walks through the target never end there
                self.by_len[len] += w * wj;
                continue;
            }
            self.path.push(next);
            self.extend(w * wj);
            self.path.pop();
        }
    }
}

/// Steps y ≠ 0 with ρ(y) ≤ `step_radius`, each with weight λJ_y.
fn weighted_steps(spec: &CouplingSpec, lambda: f64, step_radius: f64) -> Vec<(Point, f64)> {
    let mut steps = Vec::new();
    for_each_lattice_in_shell(&spec.norm, 0.0, step_radius, |x, r| {
        let mut p = [0; MAX_DIM];
        p[..x.len()].copy_from_slice(x);
        steps.push((p, lambda * spec.eval_rho(r)));
    });
    steps
}

/// Σ over SAWs 0 → x of length ≤ `max_len` with steps of norm ≤ `step_radius`.
/// Parallel over the first step; sums are combined in step order.
pub fn saw_two_point(
    spec: &CouplingSpec,
    lambda: f64,
    x: &[i64],
    max_len: usize,
    step_radius: f64,
) -> Result<SawTwoPoint, SawError> {
    let d = spec.dim();
    if x.len() != d {
        return Err(SawError::Dimension { expected: d, got: x.len() });
    }
    if max_len == 0 || !(lambda >= 0.0) {
        return Err(SawError::Invalid("need max_len >= 1 and lambda >= 0".into()));
    }
    let mut target = [0; MAX_DIM];
    target[..d].copy_from_slice(x);
    let steps = weighted_steps(spec, lambda, step_radius);
    let counter = AtomicU64::new(0);
    let abort = AtomicBool::new(false);
    let per_first: Vec<(Vec<f64>, u64)> = steps
        .par_iter()
        .map(|&(s, wj)| {
            let mut by_len = vec![0.0; max_len];
            let origin = [0; MAX_DIM];
            let mut dfs = Dfs {
                steps: &steps,
                dim: d,
                target,
                max_len,
                path: vec![origin, s],
                by_len: Vec::new(),
                visited: 1,
                counter: &counter,
                abort: &abort,
            };
            if s == target {
                by_len[0] += wj;
            } else if max_len > 1 {
                dfs.by_len = std::mem::take(&mut by_len);
                dfs.extend(wj);
                by_len = std::mem::take(&mut dfs.by_len);
            }
            (by_len, dfs.visited)
        })
        .collect();
    if abort.load(Ordering::Relaxed) {
        return Err(SawError::BudgetExceeded(WALK_BUDGET));
    }
    let visited: u64 = per_first.iter().map(|(_, v)| v).sum();
    if visited > WALK_BUDGET {
        return Err(SawError::BudgetExceeded(WALK_BUDGET));
    }
    let mut by_len = vec![0.0; max_len];
    for (b, _) in &per_first {
        for (acc, v) in by_len.iter_mut().zip(b) {
            *acc += v;
        }
    }
    let mut partial_sums = Vec::with_capacity(max_len);
    let mut acc = 0.0;
    for v in by_len {
        acc += v;
        partial_sums.push(acc);
    }
    Ok(SawTwoPoint { partial_sums, walks_visited: visited, step_radius })
}

/// Steps with small surcharge relative to their Euclidean length.
#[derive(Clone, Debug, Serialize)]
pub struct ConeSpec {
    pub t: Vec<f64>,
    pub delta: f64,
    pub radius: f64,
    /// Y_R = {x ≠ 0 : ρ(x) − t·x ≤ δ‖x‖, ‖x‖ ≤ R} with J_x.
    pub steps: Vec<(Vec<i64>, f64)>,
    /// Unit u with x·u > 0 on every step.
    pub witness: Vec<f64>,
    /// min over steps of x·u/‖x‖.
    pub witness_margin: f64,
}

/// The best sampled half-space witness for `pts`: (u, min x·u/‖x‖).
fn half_space_witness(dim: usize, pts: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let mut best = (vec![0.0; dim], f64::NEG_INFINITY);
    let dirs = sphere_directions(dim, WITNESS_DIRECTIONS);
    for u in dirs {
        let m = pts.iter().map(|x| dot(x, &u) / euclid(x)).fold(f64::INFINITY, f64::min);
        if m > best.1 {
            best = (u, m);
        }
    }
    best
}

fn has_two_independent(pts: &[Vec<f64>]) -> bool {
    let Some(a) = pts.first() else { return false };
    pts.iter().any(|b| {
        let ab = dot(a, b);
        ab * ab < (1.0 - 1e-12) * dot(a, a) * dot(b, b)
    })
}

/// Builds the step cone for `t` with the smallest δ = 2^{−k} such that Y_R
/// spans more than a line (d ≥ 2; nonempty in d = 1) and a half-space
/// witness exists. ‖·‖ is Euclidean.
pub fn cone_spec(spec: &CouplingSpec, t: &[f64], radius: f64) -> Result<ConeSpec, SawError> {
    let d = spec.dim();
    if t.len() != d {
        return Err(SawError::Dimension { expected: d, got: t.len() });
    }
    let r = radius.floor() as i64;
    let side = (2 * r + 1) as usize;
    // (x, ‖x‖, surcharge)
    let mut cand: Vec<(Vec<i64>, f64, f64)> = Vec::new();
    for idx in 0..side.pow(d as u32) {
        let mut k = idx;
        let x: Vec<i64> = (0..d)
            .map(|_| {
                let v = (k % side) as i64 - r;
                k /= side;
                v
            })
            .collect();
        let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        let norm = euclid(&xf);
        if norm == 0.0 || norm > radius {
            continue;
        }
        let s = spec.norm.rho(&xf) - dot(t, &xf);
        cand.push((x, norm, s));
    }
    for k in (0..=DELTA_MAX_EXPONENT).rev() {
        let delta = 0.5f64.powi(k as i32);
        let chosen: Vec<&(Vec<i64>, f64, f64)> = cand.iter().filter(|(_, n, s)| *s <= delta * n).collect();
        let pts: Vec<Vec<f64>> = chosen.iter().map(|(x, _, _)| x.iter().map(|&v| v as f64).collect()).collect();
        let spans = if d == 1 { !pts.is_empty() } else { has_two_independent(&pts) };
        if !spans {
            continue;
        }
        let (witness, margin) = half_space_witness(d, &pts);
        if margin <= 0.0 {
            continue;
        }
        let steps = chosen.iter().map(|(x, _, _)| (x.clone(), spec.eval(x))).collect();
        return Ok(ConeSpec { t: t.to_vec(), delta, radius, steps, witness, witness_margin: margin });
    }
    Err(SawError::NoCone)
}

impl ConeSpec {
    /// Walk obtained by concatenating the listed steps from the origin.
    pub fn concatenate(&self, idx: &[usize]) -> Walk {
        let d = self.t.len();
        let mut p = [0i64; MAX_DIM];
        let mut vertices = vec![p];
        for &i in idx {
            for c in 0..d {
                p[c] += self.steps[i].0[c];
            }
            vertices.push(p);
        }
        Walk { dim: d, vertices }
    }

    /// Whether the u-projection strictly increases along the walk.
    pub fn projection_increases(&self, w: &Walk) -> bool {
        let d = w.dim;
        w.vertices.windows(2).all(|p| {
            let a: f64 = (0..d).map(|c| p[0][c] as f64 * self.witness[c]).sum();
            let b: f64 = (0..d).map(|c| p[1][c] as f64 * self.witness[c]).sum();
            b > a
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConeSeries {
    pub epsilon: f64,
    /// 𝕁_R((1−ε)t) = Σ_{x∈Y_R} J_x e^{(1−ε)t·x}.
    pub j_r: f64,
    /// λ 𝕁_R((1−ε)t) ≥ 1.
    pub certificate: bool,
    /// (threshold, smallest walk length N with Σ_{n≤N} (λ𝕁_R)^n above it).
    pub crossings: Vec<(f64, u64)>,
    /// Last partial sum of the cone-walk series followed.
    pub partial_sum: f64,
}

/// Cone-restricted generating function at (1−ε)t. Concatenations of cone
/// steps are distinct self-avoiding walks, so walks of length n contribute
/// (λ𝕁_R)^n exactly; partial sums are followed through the doubling
/// thresholds 2, 4, … until they pass [`DIVERGENCE_TARGET`].
pub fn cone_series(cone: &ConeSpec, lambda: f64, epsilon: f64) -> ConeSeries {
    let j_r: f64 = cone
        .steps
        .iter()
        .map(|(x, j)| {
            let tx: f64 = x.iter().zip(&cone.t).map(|(&a, b)| a as f64 * b).sum();
            j * ((1.0 - epsilon) * tx).exp()
        })
        .sum();
    let ratio = lambda * j_r;
    let certificate = ratio >= 1.0;
    let mut crossings = Vec::new();
    let mut sum = 0.0;
    if certificate {
        let mut term = 1.0;
        let mut threshold = 2.0;
        let mut n = 0u64;
        while sum <= DIVERGENCE_TARGET {
            n += 1;
            term *= ratio;
            sum += term;
            while sum > threshold {
                crossings.push((threshold, n));
                threshold *= 2.0;
            }
        }
    } else if ratio > 0.0 {
        sum = ratio / (1.0 - ratio);
    }
    ConeSeries { epsilon, j_r, certificate, crossings, partial_sum: sum }
}

/// One row of the random-cluster versus walk comparison.
#[derive(Clone, Debug, Serialize)]
pub struct BridgeRow {
    pub x: Vec<i64>,
    pub rc_exact: f64,
    pub saw: f64,
    pub saw_below: bool,
}

/// Exact random-cluster two-point function on `region` beside the full SAW
/// sum inside the region (all vertex pairs joined with weight λJ). The map
/// λ(β) is not available here, so λ is an independent input; the rows only
/// exhibit the inequality direction for small λ.
pub fn saw_rc_bridge(region: &Region, params: &RCParams, lambda: f64) -> Result<Vec<BridgeRow>, SawError> {
    let rc = exact_two_point(region, params)?;
    let n = region.n_vertices();
    let d = region.dim;
    let j = |a: usize, b: usize| {
        let mut diff = [0i64; MAX_DIM];
        for c in 0..d {
            diff[c] = region.points[b][c] - region.points[a][c];
        }
        region.coupling.eval(&diff[..d])
    };
    let mut saw = vec![0.0; n];
    saw[region.origin] = 1.0;
    let mut on_path = vec![false; n];
    fn go(v: usize, w: f64, on_path: &mut [bool], saw: &mut [f64], lambda: f64, j: &dyn Fn(usize, usize) -> f64) {
        for u in 0..on_path.len() {
            if on_path[u] {
                continue;
            }
            let wu = w * lambda * j(v, u);
            saw[u] += wu;
            on_path[u] = true;
            go(u, wu, on_path, saw, lambda, j);
            on_path[u] = false;
        }
    }
    on_path[region.origin] = true;
    go(region.origin, 1.0, &mut on_path, &mut saw, lambda, &j);
    Ok((0..n)
        .map(|v| {
            let x: Vec<i64> = (0..d).map(|c| region.points[v][c] - region.points[region.origin][c]).collect();
            BridgeRow { x, rc_exact: rc[v], saw: saw[v], saw_below: saw[v] <= rc[v] }
        })
        .collect())
}

//! Norms on R^d, Wulff-shape duality, surcharge functions and the directional
//! surcharge limit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for dual-vector identities.
pub const TOL_DUAL: f64 = 1e-9;
/// Cap of the doubling schedule used by [`g_limit`].
pub const G_LIMIT_NMAX: u64 = 1 << 20;

pub const MAX_DIM: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: norm has d={expected}, vector has {got} components")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unsupported dimension {0}; supported dimensions are 1, 2 and 3")]
    UnsupportedDimension(usize),
    #[error("invalid norm: {0}")]
    InvalidNorm(String),
    #[error("direction must be nonzero")]
    ZeroDirection,
    #[error("monotonicity violated at n={n}: {value} > previous {previous}")]
    MonotonicityViolation { n: u64, value: f64, previous: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum NormFamily {
    L1,
    L2,
    Linf,
    WeightedLp { weights: Vec<f64>, p: f64 },
    /// ρ(x) = max over generators g of g·x; the generators are points of the
    /// Wulff shape and must form a symmetric spanning set.
    Polyhedral { generators: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    family: NormFamily,
    dim: usize,
}

impl NormSpec {
    pub fn new(family: NormFamily, dim: usize) -> Result<Self, GeometryError> {
        if dim == 0 || dim > MAX_DIM {
            return Err(GeometryError::UnsupportedDimension(dim));
        }
        match &family {
            NormFamily::WeightedLp { weights, p } => {
                if weights.len() != dim {
                    return Err(GeometryError::InvalidNorm(format!(
                        "expected {dim} weights, got {}",
                        weights.len()
                    )));
                }
                if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                    return Err(GeometryError::InvalidNorm("weights must be positive".into()));
                }
                if !(p.is_finite() && *p >= 1.0) {
                    return Err(GeometryError::InvalidNorm(format!("p must be >= 1, got {p}")));
                }
            }
            NormFamily::Polyhedral { generators } => validate_generators(generators, dim)?,
            _ => {}
        }
        Ok(Self { family, dim })
    }

    pub fn l1(dim: usize) -> Self {
        Self::new(NormFamily::L1, dim).expect("supported dimension")
    }

    pub fn l2(dim: usize) -> Self {
        Self::new(NormFamily::L2, dim).expect("supported dimension")
    }

    pub fn linf(dim: usize) -> Self {
        Self::new(NormFamily::Linf, dim).expect("supported dimension")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn family(&self) -> &NormFamily {
        &self.family
    }

    /// True when the norm is continuously differentiable away from the origin.
    pub fn is_c1(&self) -> bool {
        match &self.family {
            NormFamily::L2 => true,
            NormFamily::WeightedLp { p, .. } => *p > 1.0,
            _ => self.dim == 1,
        }
    }

    /// Checked evaluation (`norm_eval`).
    pub fn eval(&self, x: &[f64]) -> Result<f64, GeometryError> {
        self.check_dim(x.len())?;
        Ok(self.rho(x))
    }

    pub(crate) fn check_dim(&self, got: usize) -> Result<(), GeometryError> {
        if got != self.dim {
            return Err(GeometryError::DimensionMismatch { expected: self.dim, got });
        }
        Ok(())
    }

    /// Unchecked evaluation; `x.len()` must equal the dimension.
    #[inline]
    pub fn rho(&self, x: &[f64]) -> f64 {
        match &self.family {
            NormFamily::L1 => x.iter().map(|v| v.abs()).sum(),
            NormFamily::L2 => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            NormFamily::Linf => x.iter().fold(0.0, |m, v| m.max(v.abs())),
            NormFamily::WeightedLp { weights, p } => {
                if *p == 1.0 {
                    x.iter().zip(weights).map(|(v, w)| w * v.abs()).sum()
                } else if *p == 2.0 {
                    x.iter().zip(weights).map(|(v, w)| w * v * v).sum::<f64>().sqrt()
                } else {
                    let s: f64 = x.iter().zip(weights).map(|(v, w)| w * v.abs().powf(*p)).sum();
                    s.powf(1.0 / p)
                }
            }
            NormFamily::Polyhedral { generators } => generators
                .iter()
                .map(|g| dot(g, x))
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    #[inline]
    pub fn rho_i(&self, x: &[i64]) -> f64 {
        let mut buf = [0.0; MAX_DIM];
        for (b, v) in buf.iter_mut().zip(x) {
            *b = *v as f64;
        }
        self.rho(&buf[..x.len()])
    }

    /// Lipschitz constant of ρ with respect to the Euclidean norm.
    fn lipschitz(&self) -> f64 {
        let d = self.dim as f64;
        match &self.family {
            NormFamily::L1 => d.sqrt(),
            NormFamily::L2 | NormFamily::Linf => 1.0,
            NormFamily::WeightedLp { weights, p } => {
                let wmax = weights.iter().cloned().fold(0.0, f64::max);
                // ‖x‖_p ≤ d^{max(0, 1/p - 1/2)} ‖x‖_2
                let expo = (1.0 / p - 0.5).max(0.0);
                wmax.powf(1.0 / p) * d.powf(expo)
            }
            NormFamily::Polyhedral { generators } => generators
                .iter()
                .map(|g| dot(g, g).sqrt())
                .fold(0.0, f64::max),
        }
    }

    /// Lower bound for min ρ(u) over Euclidean unit vectors u, so that
    /// ‖x‖₂ ≤ ρ(x) / lower_constant().
    pub fn lower_constant(&self) -> f64 {
        let d = self.dim as f64;
        match &self.family {
            NormFamily::L1 | NormFamily::L2 => 1.0,
            NormFamily::Linf => 1.0 / d.sqrt(),
            NormFamily::WeightedLp { weights, p } => {
                let wmin = weights.iter().cloned().fold(f64::INFINITY, f64::min);
                // ‖x‖_p ≥ d^{min(0, 1/p - 1/2)} ‖x‖_2
                let expo = (1.0 / p - 0.5).min(0.0);
                wmin.powf(1.0 / p) * d.powf(expo)
            }
            NormFamily::Polyhedral { .. } => {
                let dirs = sphere_directions(self.dim, 4096);
                let mesh = sphere_mesh_radius(self.dim, 4096);
                let m = dirs.iter().map(|u| self.rho(u)).fold(f64::INFINITY, f64::min);
                let bound = m - self.lipschitz() * mesh;
                if bound > 0.0 {
                    bound
                } else {
                    m / 2.0
                }
            }
        }
    }
}

fn validate_generators(generators: &[Vec<f64>], dim: usize) -> Result<(), GeometryError> {
    if generators.is_empty() {
        return Err(GeometryError::InvalidNorm("empty generator set".into()));
    }
    for g in generators {
        if g.len() != dim {
            return Err(GeometryError::InvalidNorm(format!(
                "generator {g:?} has {} components, expected {dim}",
                g.len()
            )));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidNorm("non-finite generator".into()));
        }
        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
        let has_mirror = generators
            .iter()
            .any(|h| h.iter().zip(&neg).all(|(a, b)| (a - b).abs() <= 1e-12));
        if !has_mirror {
            return Err(GeometryError::InvalidNorm(format!(
                "generator set is not symmetric: missing -{g:?}"
            )));
        }
    }
    if rank(generators, dim) < dim {
        return Err(GeometryError::InvalidNorm("generators do not span R^d".into()));
    }
    Ok(())
}

fn rank(rows: &[Vec<f64>], dim: usize) -> usize {
    let mut m: Vec<Vec<f64>> = rows.to_vec();
    let mut r = 0;
    for col in 0..dim {
        let piv = (r..m.len()).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()));
        let Some(piv) = piv else { break };
        if m[piv][col].abs() < 1e-12 {
            continue;
        }
        m.swap(r, piv);
        for i in 0..m.len() {
            if i != r {
                let f = m[i][col] / m[r][col];
                for c in 0..dim {
                    m[i][c] -= f * m[r][c];
                }
            }
        }
        r += 1;
    }
    r
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn euclid(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Deterministic quasi-uniform unit directions.
pub fn sphere_directions(dim: usize, n: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..n)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = golden * k as f64;
                    vec![r * a.cos(), r * a.sin(), z]
                })
                .collect()
        }
    }
}

fn sphere_mesh_radius(dim: usize, n: usize) -> f64 {
    match dim {
        1 => 0.0,
        2 => std::f64::consts::PI / n as f64,
        // generous covering radius for the Fibonacci lattice
        _ => 2.0 * (4.0 * std::f64::consts::PI / n as f64).sqrt(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualFace {
    pub extreme_points: Vec<Vec<f64>>,
}

impl DualFace {
    /// Deterministic sample of `k` points of the face: extreme points first,
    /// then the centroid, then points along the edges between extreme points.
    pub fn sample(&self, k: usize) -> Vec<Vec<f64>> {
        let e = &self.extreme_points;
        if e.len() == 1 || k <= 1 {
            return vec![e[0].clone()];
        }
        let dim = e[0].len();
        let mut out: Vec<Vec<f64>> = Vec::new();
        let push = |out: &mut Vec<Vec<f64>>, p: Vec<f64>| {
            if !out.iter().any(|q| q.iter().zip(&p).all(|(a, b)| (a - b).abs() < 1e-12)) {
                out.push(p);
            }
        };
        if e.len() == 2 {
            for i in 0..k {
                let l = i as f64 / (k - 1) as f64;
                let p = (0..dim).map(|c| (1.0 - l) * e[0][c] + l * e[1][c]).collect();
                push(&mut out, p);
            }
            return out;
        }
        for p in e {
            push(&mut out, p.clone());
        }
        let centroid = (0..dim)
            .map(|c| e.iter().map(|p| p[c]).sum::<f64>() / e.len() as f64)
            .collect();
        push(&mut out, centroid);
        let mut level = 2;
        while out.len() < k && level < 64 {
            for i in 0..e.len() {
                for j in (i + 1)..e.len() {
                    for step in 1..level {
                        let l = step as f64 / level as f64;
                        let p = (0..dim).map(|c| (1.0 - l) * e[i][c] + l * e[j][c]).collect();
                        push(&mut out, p);
                    }
                }
            }
            level *= 2;
        }
        out.truncate(k.max(e.len() + 1));
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualVector {
    pub t: Vec<f64>,
    /// Euclidean unit direction.
    pub s: Vec<f64>,
    pub unique: bool,
    pub facial_extent: Option<DualFace>,
}

impl DualVector {
    /// Checks t·s = ρ(s) and Wulff membership on the supplied points.
    pub fn check(&self, spec: &NormSpec, samples: &[Vec<f64>]) -> bool {
        if (dot(&self.t, &self.s) - spec.rho(&self.s)).abs() > TOL_DUAL {
            return false;
        }
        samples
            .iter()
            .all(|x| dot(&self.t, x) <= spec.rho(x) + TOL_DUAL * (1.0 + euclid(x)))
    }
}

pub fn unit_direction(s: &[f64]) -> Result<Vec<f64>, GeometryError> {
    let n = euclid(s);
    if !(n > 0.0) || !n.is_finite() {
        return Err(GeometryError::ZeroDirection);
    }
    Ok(s.iter().map(|v| v / n).collect())
}

/// Dual face of `s` as a list of extreme points (single point when unique).
fn dual_face_points(spec: &NormSpec, s: &[f64]) -> Vec<Vec<f64>> {
    let d = spec.dim;
    let tol = 1e-12;
    match &spec.family {
        NormFamily::L2 => vec![s.to_vec()],
        NormFamily::L1 => box_face(s, &vec![1.0; d], tol),
        NormFamily::WeightedLp { weights, p } if *p == 1.0 => box_face(s, weights, tol),
        NormFamily::WeightedLp { weights, p } => {
            let r = spec.rho(s);
            vec![s
                .iter()
                .zip(weights)
                .map(|(v, w)| w * v.signum() * v.abs().powf(p - 1.0) / r.powf(p - 1.0))
                .collect()]
        }
        NormFamily::Linf => {
            let m = s.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
            (0..d)
                .filter(|&i| s[i].abs() >= m - tol)
                .map(|i| {
                    let mut t = vec![0.0; d];
                    t[i] = s[i].signum();
                    t
                })
                .collect()
        }
        NormFamily::Polyhedral { generators } => {
            let m = spec.rho(s);
            let mut pts: Vec<Vec<f64>> = Vec::new();
            for g in generators {
                if dot(g, s) >= m - 1e-10 * (1.0 + m.abs())
                    && !pts.iter().any(|q| q.iter().zip(g).all(|(a, b)| (a - b).abs() < 1e-12))
                {
                    pts.push(g.clone());
                }
            }
            pts
        }
    }
}

/// Extreme points of the face of a weighted ℓ1 dual: coordinates with s_i≠0
/// are pinned to w_i·sign(s_i), zero coordinates range over [-w_i, w_i].
fn box_face(s: &[f64], w: &[f64], tol: f64) -> Vec<Vec<f64>> {
    let free: Vec<usize> = (0..s.len()).filter(|&i| s[i].abs() <= tol).collect();
    let base: Vec<f64> = s
        .iter()
        .zip(w)
        .map(|(v, wi)| if v.abs() <= tol { 0.0 } else { wi * v.signum() })
        .collect();
    let mut out = Vec::with_capacity(1 << free.len());
    for mask in 0..(1usize << free.len()) {
        let mut t = base.clone();
        for (b, &i) in free.iter().enumerate() {
            t[i] = if mask >> b & 1 == 1 { w[i] } else { -w[i] };
        }
        out.push(t);
    }
    out
}

/// Subdifferential of ρ at `s`, returned as its extreme points.
pub fn dual_vectors(spec: &NormSpec, s: &[f64]) -> Result<Vec<DualVector>, GeometryError> {
    spec.check_dim(s.len())?;
    let s = unit_direction(s)?;
    let pts = dual_face_points(spec, &s);
    if pts.len() == 1 {
        return Ok(vec![DualVector { t: pts[0].clone(), s, unique: true, facial_extent: None }]);
    }
    let face = DualFace { extreme_points: pts.clone() };
    Ok(pts
        .into_iter()
        .map(|t| DualVector { t, s: s.clone(), unique: false, facial_extent: Some(face.clone()) })
        .collect())
}

/// `k` dual vectors spread over the dual face of `s`.
pub fn sample_dual_face(
    spec: &NormSpec,
    s: &[f64],
    k: usize,
) -> Result<Vec<DualVector>, GeometryError> {
    let duals = dual_vectors(spec, s)?;
    if duals[0].unique {
        return Ok(duals);
    }
    let face = duals[0].facial_extent.clone().expect("non-unique face");
    let s = duals[0].s.clone();
    Ok(face
        .sample(k)
        .into_iter()
        .map(|t| DualVector { t, s: s.clone(), unique: false, facial_extent: Some(face.clone()) })
        .collect())
}

/// The canonical dual vector: the unique one, or the centroid of the face.
pub fn canonical_dual(spec: &NormSpec, s: &[f64]) -> Result<DualVector, GeometryError> {
    let duals = dual_vectors(spec, s)?;
    if duals.len() == 1 {
        return Ok(duals.into_iter().next().unwrap());
    }
    let face = duals[0].facial_extent.clone().unwrap();
    let e = &face.extreme_points;
    let t = (0..spec.dim)
        .map(|c| e.iter().map(|p| p[c]).sum::<f64>() / e.len() as f64)
        .collect();
    Ok(DualVector { t, s: duals[0].s.clone(), unique: false, facial_extent: Some(face) })
}

/// 𝔰_t(x) = ρ(x) − t·x, clamped at zero against rounding.
pub fn surcharge(spec: &NormSpec, t: &DualVector, x: &[f64]) -> Result<f64, GeometryError> {
    spec.check_dim(x.len())?;
    spec.check_dim(t.t.len())?;
    Ok(surcharge_raw(spec, &t.t, x))
}

#[inline]
pub fn surcharge_raw(spec: &NormSpec, t: &[f64], x: &[f64]) -> f64 {
    (spec.rho(x) - dot(t, x)).max(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GLimit {
    pub value: f64,
    pub converged: bool,
    pub steps: usize,
}

/// Evaluates 𝔰_t(ns − y) along n = 1, 2, 4, …, n_max and returns the last value.
pub fn g_limit(
    spec: &NormSpec,
    t: &DualVector,
    s: &[f64],
    y: &[f64],
    n_max: u64,
    tol: f64,
) -> Result<GLimit, GeometryError> {
    spec.check_dim(s.len())?;
    spec.check_dim(y.len())?;
    let s = unit_direction(s)?;
    let d = spec.dim;
    let mut buf = [0.0; MAX_DIM];
    let mut prev: Option<f64> = None;
    let mut converged = false;
    let mut steps = 0;
    let mut n: u64 = 1;
    while n <= n_max.max(1) {
        for c in 0..d {
            buf[c] = n as f64 * s[c] - y[c];
        }
        let v = surcharge_raw(spec, &t.t, &buf[..d]);
        steps += 1;
        if let Some(p) = prev {
            let slack = 1e-12 * (1.0 + n as f64 + euclid(y));
            if v > p + slack {
                return Err(GeometryError::MonotonicityViolation { n, value: v, previous: p });
            }
            converged = (p - v).abs() < tol;
        }
        prev = Some(v);
        n = n.saturating_mul(2);
    }
    Ok(GLimit { value: prev.unwrap_or(0.0), converged, steps })
}

/// Visits every lattice point x with `r_lo < ρ(x) ≤ r_hi` in a fixed order
/// (outer coordinates lexicographic, first coordinate ascending). A negative
/// `r_lo` includes the origin.
pub fn for_each_lattice_in_shell(
    spec: &NormSpec,
    r_lo: f64,
    r_hi: f64,
    mut visit: impl FnMut(&[i64], f64),
) {
    if r_hi < 0.0 {
        return;
    }
    let d = spec.dim;
    let bound = (r_hi / spec.lower_constant()).floor() as i64 + 1;
    let mut x = [0i64; MAX_DIM];
    let mut outer = vec![-bound; d - 1];
    loop {
        let o2: f64 = outer.iter().map(|&v| (v * v) as f64).sum();
        if o2.sqrt() <= bound as f64 {
            x[1..d].copy_from_slice(&outer);
            let eval = |x1: i64| {
                let mut y = x;
                y[0] = x1;
                spec.rho_i(&y[..d])
            };
            if let Some((a, b)) = sublevel_interval(&eval, bound, r_hi) {
                let inner = if r_lo >= 0.0 { sublevel_interval(&eval, bound, r_lo) } else { None };
                let mut run = |lo: i64, hi: i64| {
                    for x1 in lo..=hi {
                        x[0] = x1;
                        let r = spec.rho_i(&x[..d]);
                        visit(&x[..d], r);
                    }
                };
                match inner {
                    None => run(a, b),
                    Some((a2, b2)) => {
                        run(a, a2 - 1);
                        run(b2 + 1, b);
                    }
                }
            }
        }
        // advance the outer odometer
        let mut i = 0;
        loop {
            if i == d - 1 {
                return;
            }
            if outer[i] < bound {
                outer[i] += 1;
                break;
            }
            outer[i] = -bound;
            i += 1;
        }
    }
}

/// Integer interval {x1 ∈ [-bound, bound] : f(x1) ≤ r} for a convex `f`.
fn sublevel_interval(f: &impl Fn(i64) -> f64, bound: i64, r: f64) -> Option<(i64, i64)> {
    let (mut lo, mut hi) = (-bound, bound);
    while hi - lo > 2 {
        let m1 = lo + (hi - lo) / 3;
        let m2 = hi - (hi - lo) / 3;
        if f(m1) < f(m2) {
            hi = m2 - 1;
        } else if f(m1) > f(m2) {
            lo = m1 + 1;
        } else {
            lo = m1;
            hi = m2;
        }
    }
    let m = (lo..=hi).min_by(|&a, &b| f(a).total_cmp(&f(b)))?;
    if f(m) > r {
        return None;
    }
    // largest x ≥ m with f(x) ≤ r
    let (mut a, mut b) = (m, bound);
    if f(b) <= r {
        a = b;
    } else {
        while b - a > 1 {
            let mid = a + (b - a) / 2;
            if f(mid) <= r {
                a = mid;
            } else {
                b = mid;
            }
        }
    }
    let right = a;
    let (mut a, mut b) = (-bound, m);
    if f(a) <= r {
        b = a;
    } else {
        while b - a > 1 {
            let mid = a + (b - a) / 2;
            if f(mid) <= r {
                b = mid;
            } else {
                a = mid;
            }
        }
    }
    Some((b, right))
}

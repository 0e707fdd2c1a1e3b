//! Coupling constants J_x = ψ(x)e^{−ρ(x)}/Z (or ψ(x)/Z without the exponential
//! envelope), their normalization, tilted generating series, the saturation
//! classifier and the ℓ∞ tail function.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    dot, for_each_lattice_in_shell, sample_dual_face, DualVector, GeometryError, NormSpec,
};
use crate::stats::{linear_fit, KahanSum};

/// Allowed deviation of Σ J_x from one.
pub const EPS_NORM: f64 = 1e-8;
/// Margin around slope −1 separating the numeric verdicts.
pub const DELTA_FIT: f64 = 0.15;
/// Shell points with larger surcharge are dropped from the cached profile
/// (each contributes less than e^{−50}).
pub const SURCHARGE_CUTOFF: f64 = 50.0;
/// Fitted shell exponents this close to a multiple of 1/2 are snapped to it.
pub const SIGMA_SNAP: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CouplingError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid prefactor: {0}")]
    InvalidPrefactor(String),
    #[error("couplings are not summable: alpha={alpha} <= d={dim} without exponential envelope")]
    NonSummable { alpha: f64, dim: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("truncation radius {radius} too small: tail bound {tail:e}")]
    TruncationTooSmall { radius: f64, tail: f64 },
    #[error("verdict conflict: fitted shell exponent {slope:.3} says {numeric:?}, closed form says {closed:?}")]
    VerdictConflict { slope: f64, numeric: Verdict, closed: Verdict },
    #[error("no saturation flip found on the alpha grid")]
    NoFlip,
    #[error("saturation verdict is not monotone in alpha at alpha={0}")]
    NonMonotone(f64),
    #[error("flip bracket [{lo}, {hi}] does not meet [1, {dim}]")]
    BracketOutside { lo: f64, hi: f64, dim: usize },
    #[error("argument out of range: {0}")]
    OutOfRange(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Prefactor {
    /// ψ = ρ^{−α}
    Polynomial { alpha: f64 },
    /// ψ = exp(−c̃ ρ^η)
    StretchedExp { ctilde: f64, eta: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrefactorSpec {
    pub family: Prefactor,
    pub envelope: bool,
}

impl PrefactorSpec {
    pub fn polynomial(alpha: f64, envelope: bool) -> Self {
        Self { family: Prefactor::Polynomial { alpha }, envelope }
    }

    pub fn stretched(ctilde: f64, eta: f64, envelope: bool) -> Self {
        Self { family: Prefactor::StretchedExp { ctilde, eta }, envelope }
    }

    fn validate(&self) -> Result<(), CouplingError> {
        match self.family {
            Prefactor::Polynomial { alpha } if !(alpha > 0.0 && alpha.is_finite()) => Err(
                CouplingError::InvalidPrefactor(format!("alpha must be positive, got {alpha}")),
            ),
            Prefactor::StretchedExp { ctilde, eta }
                if !(ctilde > 0.0 && ctilde.is_finite() && eta > 0.0 && eta < 1.0) =>
            {
                Err(CouplingError::InvalidPrefactor(format!(
                    "need ctilde > 0 and 0 < eta < 1, got ctilde={ctilde}, eta={eta}"
                )))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn log_psi(&self, r: f64) -> f64 {
        match self.family {
            Prefactor::Polynomial { alpha } => -alpha * r.ln(),
            Prefactor::StretchedExp { ctilde, eta } => -ctilde * r.powf(eta),
        }
    }

    #[inline]
    pub fn psi(&self, r: f64) -> f64 {
        self.log_psi(r).exp()
    }

    /// Unnormalized coupling as a function of ρ(x) > 0.
    #[inline]
    pub fn profile(&self, r: f64) -> f64 {
        if self.envelope {
            (self.log_psi(r) - r).exp()
        } else {
            self.psi(r)
        }
    }

    /// The (a, b) constants of the multiplicative regularity property
    /// ψ(x)ψ(y) ≤ b·ψ(x+y)^a-type bounds, for the built-in families. `z` is
    /// the normalizer. Documented values only; nothing downstream consumes them.
    pub fn regularity_constants(&self, z: f64) -> (f64, f64) {
        match self.family {
            Prefactor::Polynomial { alpha } => (1.0, 2f64.powf(alpha)),
            Prefactor::StretchedExp { eta, .. } => {
                let c = 1.0 / z;
                (2.0 - 2f64.powf(eta), c.powf(2f64.powf(eta) - 1.0))
            }
        }
    }
}

pub fn default_trunc_radius(dim: usize) -> f64 {
    match dim {
        1 => 16384.0,
        2 => 1024.0,
        _ => 128.0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    pub norm: NormSpec,
    pub prefactor: PrefactorSpec,
    /// Z with J_x = profile(ρ(x))/Z.
    pub normalizer: f64,
    /// Normalized mass of the couplings outside the summed region.
    pub tail_bound: f64,
    /// Bound on |Σ_x J_x − 1|.
    pub norm_error: f64,
    /// Radius out to which couplings were summed explicitly.
    pub summed_radius: f64,
    pub trunc_radius: f64,
}

impl CouplingSpec {
    pub fn dim(&self) -> usize {
        self.norm.dim()
    }

    /// J_x; zero at the origin.
    #[inline]
    pub fn eval(&self, x: &[i64]) -> f64 {
        if x.iter().all(|&v| v == 0) {
            return 0.0;
        }
        self.eval_rho(self.norm.rho_i(x))
    }

    /// J as a function of the norm of a nonzero displacement.
    #[inline]
    pub fn eval_rho(&self, r: f64) -> f64 {
        self.prefactor.profile(r) / self.normalizer
    }

    /// Upper bound on Σ_{ρ(x) > r} J_x.
    pub fn mass_beyond(&self, r: f64) -> f64 {
        if self.dim() == 1 {
            let c = self.norm.rho(&[1.0]);
            let n0 = (r / c).floor() as u64 + 1;
            return 2.0 * one_dim_suffix(&self.prefactor, c, n0) / self.normalizer;
        }
        envelope_tail_bound(&self.norm, &self.prefactor, r) / self.normalizer
    }
}

/// Rigorous bound on Σ_{ρ(x) > r} profile(ρ(x)) for the exponential envelope:
/// lattice points with ρ ≤ k+1 number at most (2(k+1)/c_min + 1)^d and the
/// profile is decreasing.
fn envelope_tail_bound(norm: &NormSpec, pre: &PrefactorSpec, r: f64) -> f64 {
    let cmin = norm.lower_constant();
    let d = norm.dim() as i32;
    let mut k = r.floor().max(1.0);
    let mut total = 0.0;
    loop {
        let count = (2.0 * (k + 1.0) / cmin + 1.0).powi(d);
        let term = count * pre.profile(k);
        total += term;
        if term <= 1e-40 * total || term == 0.0 {
            // remainder of a sequence decaying at least like e^{-k/2}
            return total + 3.0 * term;
        }
        k += 1.0;
    }
}

/// Σ_{n ≥ n0} h(n) with h(n) = profile(c·n), in one dimension.
fn one_dim_suffix(pre: &PrefactorSpec, c: f64, n0: u64) -> f64 {
    if !pre.envelope {
        // direct part then an Euler–Maclaurin tail
        let direct_end = n0.max(1) + 4096;
        let mut acc = KahanSum::default();
        for n in n0.max(1)..direct_end {
            acc.add(pre.profile(c * n as f64));
        }
        return acc.value() + euler_maclaurin_tail(pre, c, direct_end as f64).0
            + pre.profile(c * direct_end as f64);
    }
    let mut acc = KahanSum::default();
    let mut n = n0.max(1);
    loop {
        let h = pre.profile(c * n as f64);
        acc.add(h);
        if h == 0.0 || h < 1e-30 * acc.value() {
            return acc.value() + 2.0 * h;
        }
        n += 1;
    }
}

/// Σ_{n > n_end} h(n) for h(n) = ψ(c·n), via Euler–Maclaurin. Returns the
/// value and the magnitude of the last correction used as error estimate.
fn euler_maclaurin_tail(pre: &PrefactorSpec, c: f64, n_end: f64) -> (f64, f64) {
    let n = n_end;
    let (integral, h, d1, d3) = match pre.family {
        Prefactor::Polynomial { alpha } => {
            let k = c.powf(-alpha);
            (
                k * n.powf(1.0 - alpha) / (alpha - 1.0),
                k * n.powf(-alpha),
                -alpha * k * n.powf(-alpha - 1.0),
                -alpha * (alpha + 1.0) * (alpha + 2.0) * k * n.powf(-alpha - 3.0),
            )
        }
        Prefactor::StretchedExp { ctilde, eta } => {
            use statrs::function::gamma::{gamma, gamma_ur};
            let a = ctilde * c.powf(eta);
            let s = 1.0 / eta;
            let integral = gamma(s) * gamma_ur(s, a * n.powf(eta)) / (eta * a.powf(s));
            let h = (-a * n.powf(eta)).exp();
            let g1 = a * eta * n.powf(eta - 1.0);
            let g2 = a * eta * (eta - 1.0) * n.powf(eta - 2.0);
            let g3 = a * eta * (eta - 1.0) * (eta - 2.0) * n.powf(eta - 3.0);
            (integral, h, -g1 * h, (-g1.powi(3) + 3.0 * g1 * g2 - g3) * h)
        }
    };
    let value = integral - h / 2.0 - d1 / 12.0 + d3 / 720.0;
    (value, (d3 / 720.0).abs())
}

/// Builds a normalized coupling spec. `trunc_radius` caps the summation radius
/// (defaults per dimension).
pub fn normalize(
    norm: NormSpec,
    prefactor: PrefactorSpec,
    trunc_radius: Option<f64>,
) -> Result<CouplingSpec, CouplingError> {
    prefactor.validate()?;
    let d = norm.dim();
    let trunc = trunc_radius.unwrap_or_else(|| default_trunc_radius(d));
    if !(trunc >= 1.0) {
        return Err(CouplingError::OutOfRange(format!("trunc_radius must be >= 1, got {trunc}")));
    }
    if !prefactor.envelope {
        if let Prefactor::Polynomial { alpha } = prefactor.family {
            if alpha <= d as f64 {
                return Err(CouplingError::NonSummable { alpha, dim: d });
            }
        }
        if d != 1 {
            return Err(CouplingError::Unsupported(
                "couplings without exponential envelope are implemented in d=1 only".into(),
            ));
        }
        let c = norm.rho(&[1.0]);
        let n_end = (trunc / c).floor().max(1.0) as u64;
        let mut acc = KahanSum::default();
        for n in 1..=n_end {
            acc.add(prefactor.profile(c * n as f64));
        }
        let (tail, err) = euler_maclaurin_tail(&prefactor, c, n_end as f64);
        let z = 2.0 * (acc.value() + tail);
        return Ok(CouplingSpec {
            norm,
            prefactor,
            normalizer: z,
            tail_bound: 2.0 * tail / z,
            norm_error: 2.0 * err / z,
            summed_radius: c * n_end as f64,
            trunc_radius: trunc,
        });
    }

    // crude lower bound on Z from the unit vectors
    let z_lower: f64 = (0..d)
        .map(|i| {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            2.0 * prefactor.profile(norm.rho(&e))
        })
        .sum();
    let target = 1e-14 * z_lower;
    let mut radius = 4.0;
    let mut tail = envelope_tail_bound(&norm, &prefactor, radius);
    while tail > target && radius < trunc {
        radius = (radius + 1.0).min(trunc);
        tail = envelope_tail_bound(&norm, &prefactor, radius);
    }
    if tail > EPS_NORM * z_lower {
        return Err(CouplingError::TruncationTooSmall { radius: trunc, tail });
    }
    let mut terms = Vec::new();
    for_each_lattice_in_shell(&norm, 0.0, radius, |_, r| terms.push(prefactor.profile(r)));
    let s = crate::stats::pairwise_sum(&terms);
    let z = s + tail / 2.0;
    Ok(CouplingSpec {
        norm,
        prefactor,
        normalizer: z,
        tail_bound: tail / z,
        norm_error: tail / (2.0 * z),
        summed_radius: radius,
        trunc_radius: trunc,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Converges,
    Diverges,
    Inconclusive,
}

/// Per-shell (ρ, surcharge) data for one (norm, t) pair, on unit shells
/// k < ρ ≤ k+1 at dyadic k.
#[derive(Debug)]
pub struct ShellProfile {
    pub shells: Vec<(f64, Vec<(f64, f64)>)>,
    /// Raw log-log slope of Σ_shell e^{−𝔰} over the upper half of the shells.
    pub sigma_raw: f64,
    /// `sigma_raw`, snapped to a multiple of 1/2 when within [`SIGMA_SNAP`].
    pub sigma: f64,
}

pub fn shell_cap(dim: usize) -> u32 {
    if dim <= 2 {
        14
    } else {
        8
    }
}

fn profile_cache() -> &'static Mutex<HashMap<String, Arc<ShellProfile>>> {
    static CACHE: OnceLock<Mutex<HashMap<String, Arc<ShellProfile>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Shell profile for (norm, t); computed once and cached.
pub fn shell_profile(norm: &NormSpec, t: &[f64]) -> Arc<ShellProfile> {
    let key = format!(
        "{:?}|{:?}",
        norm,
        t.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
    if let Some(p) = profile_cache().lock().unwrap().get(&key) {
        return p.clone();
    }
    let p = Arc::new(compute_shell_profile(norm, t));
    profile_cache().lock().unwrap().insert(key, p.clone());
    p
}

fn compute_shell_profile(norm: &NormSpec, t: &[f64]) -> ShellProfile {
    let cap = shell_cap(norm.dim());
    let mut shells = Vec::new();
    for j in 3..=cap {
        let k = (1u64 << j) as f64;
        let mut pts = Vec::new();
        let mut buf = [0.0; 3];
        for_each_lattice_in_shell(norm, k, k + 1.0, |x, r| {
            for (b, v) in buf.iter_mut().zip(x) {
                *b = *v as f64;
            }
            let s = (r - dot(t, &buf[..x.len()])).max(0.0);
            if s <= SURCHARGE_CUTOFF {
                pts.push((r, s));
            }
        });
        shells.push((k, pts));
    }
    let sums: Vec<f64> = shells
        .iter()
        .map(|(_, p)| p.iter().map(|(_, s)| (-s).exp()).sum())
        .collect();
    let sigma_raw = upper_half_slope(&shells, &sums).unwrap_or(f64::NEG_INFINITY);
    let snapped = (2.0 * sigma_raw).round() / 2.0;
    let sigma = if (sigma_raw - snapped).abs() <= SIGMA_SNAP { snapped } else { sigma_raw };
    ShellProfile { shells, sigma_raw, sigma }
}

fn upper_half_slope(shells: &[(f64, Vec<(f64, f64)>)], sums: &[f64]) -> Option<f64> {
    let start = shells.len() / 2;
    if sums[start..].iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let xs: Vec<f64> = shells[start..].iter().map(|(k, _)| k.ln()).collect();
    let ys: Vec<f64> = sums[start..].iter().map(|v| v.ln()).collect();
    linear_fit(&xs, &ys).map(|(_, b)| b)
}

#[derive(Clone, Debug, Serialize)]
pub struct SeriesVerdict {
    pub radii: Vec<f64>,
    pub partial_sums: Vec<f64>,
    pub shell_sums: Vec<f64>,
    pub verdict: Verdict,
    /// Fitted log-log slope of the shell terms.
    pub diagnostic: f64,
    pub numeric_verdict: Verdict,
    pub sigma: f64,
}

fn numeric_verdict(slope: f64) -> Verdict {
    if slope < -1.0 - DELTA_FIT {
        Verdict::Converges
    } else if slope >= -1.0 + DELTA_FIT {
        Verdict::Diverges
    } else {
        Verdict::Inconclusive
    }
}

/// Verdict for convergence of Σ_x J_x e^{t·x}, numeric and closed form.
/// Returns (verdict, fitted slope, numeric verdict, σ).
pub fn classify(spec: &CouplingSpec, t: &[f64]) -> Result<(Verdict, f64, Verdict, f64), CouplingError> {
    if !spec.prefactor.envelope {
        return Err(CouplingError::Unsupported(
            "tilted series require the exponential envelope".into(),
        ));
    }
    spec.norm.check_dim(t.len())?;
    let prof = shell_profile(&spec.norm, t);
    let terms: Vec<f64> = prof
        .shells
        .iter()
        .map(|(_, p)| p.iter().map(|&(r, s)| (spec.prefactor.log_psi(r) - s).exp()).sum())
        .collect();
    let slope = upper_half_slope(&prof.shells, &terms).unwrap_or(f64::NEG_INFINITY);
    let numeric = numeric_verdict(slope);
    let closed = match spec.prefactor.family {
        Prefactor::Polynomial { alpha } => {
            if prof.sigma - alpha < -1.0 {
                Verdict::Converges
            } else {
                Verdict::Diverges
            }
        }
        Prefactor::StretchedExp { .. } => Verdict::Converges,
    };
    if numeric != Verdict::Inconclusive && numeric != closed {
        return Err(CouplingError::VerdictConflict { slope, numeric, closed });
    }
    Ok((closed, slope, numeric, prof.sigma))
}

/// Partial sums of Σ_{ρ(x) ≤ R} ψ(x)e^{−𝔰_t(x)}/Z over `radii` plus the
/// convergence verdict.
pub fn j_series(
    spec: &CouplingSpec,
    t: &DualVector,
    radii: &[f64],
) -> Result<SeriesVerdict, CouplingError> {
    let (verdict, slope, numeric, sigma) = classify(spec, &t.t)?;
    let mut radii = radii.to_vec();
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    let mut bins = vec![KahanSum::default(); radii.len()];
    if let Some(&r_max) = radii.last() {
        let mut buf = [0.0; 3];
        for_each_lattice_in_shell(&spec.norm, 0.0, r_max, |x, r| {
            for (b, v) in buf.iter_mut().zip(x) {
                *b = *v as f64;
            }
            let s = (r - dot(&t.t, &buf[..x.len()])).max(0.0);
            let idx = radii.partition_point(|&q| q < r);
            bins[idx].add((spec.prefactor.log_psi(r) - s).exp() / spec.normalizer);
        });
    }
    let shell_sums: Vec<f64> = bins.iter().map(|b| b.value()).collect();
    let mut partial_sums = Vec::with_capacity(radii.len());
    let mut acc = 0.0;
    for v in &shell_sums {
        acc += v;
        partial_sums.push(acc);
    }
    Ok(SeriesVerdict {
        radii,
        partial_sums,
        shell_sums,
        verdict,
        diagnostic: slope,
        numeric_verdict: numeric,
        sigma,
    })
}

pub fn dyadic_radii(r_max: f64) -> Vec<f64> {
    let mut v = Vec::new();
    let mut r = 1.0;
    while r <= r_max {
        v.push(r);
        r *= 2.0;
    }
    v
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Saturation {
    SaturationPositive,
    SaturationZero,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct SaturationReport {
    pub verdict: Saturation,
    /// (t, verdict, fitted slope) per sampled dual vector.
    pub samples: Vec<(Vec<f64>, Verdict, f64)>,
}

/// Decides whether some sampled t dual to `s` has a convergent tilted series.
pub fn saturation_criterion(
    spec: &CouplingSpec,
    s: &[f64],
    face_samples: usize,
) -> Result<SaturationReport, CouplingError> {
    let duals = sample_dual_face(&spec.norm, s, face_samples.max(1))?;
    let mut samples = Vec::new();
    for t in duals {
        let (v, slope, _, _) = classify(spec, &t.t)?;
        samples.push((t.t, v, slope));
    }
    let verdict = if samples.iter().any(|(_, v, _)| *v == Verdict::Converges) {
        Saturation::SaturationPositive
    } else if samples.iter().all(|(_, v, _)| *v == Verdict::Diverges) {
        Saturation::SaturationZero
    } else {
        Saturation::Inconclusive
    };
    Ok(SaturationReport { verdict, samples })
}

#[derive(Clone, Debug, Serialize)]
pub struct AlphaSat {
    /// Grid points on either side of the flip.
    pub bracket: (f64, f64),
    /// The bracket intersected with [1, d].
    pub clamped: (f64, f64),
    pub verdicts: Vec<(f64, Saturation)>,
}

/// Locates the SaturationZero → SaturationPositive flip over a grid of
/// polynomial exponents.
pub fn alpha_sat_estimate(
    norm: &NormSpec,
    s: &[f64],
    alpha_grid: &[f64],
    face_samples: usize,
) -> Result<AlphaSat, CouplingError> {
    let mut grid = alpha_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let mut verdicts = Vec::with_capacity(grid.len());
    for &alpha in &grid {
        let spec = normalize(norm.clone(), PrefactorSpec::polynomial(alpha, true), None)?;
        verdicts.push((alpha, saturation_criterion(&spec, s, face_samples)?.verdict));
    }
    let mut flip = None;
    for w in 0..verdicts.len().saturating_sub(1) {
        let (a0, v0) = verdicts[w];
        let (_, v1) = verdicts[w + 1];
        if v0 == Saturation::SaturationPositive && v1 != Saturation::SaturationPositive {
            return Err(CouplingError::NonMonotone(a0));
        }
        if v0 == Saturation::SaturationZero && v1 == Saturation::SaturationPositive {
            flip = Some((a0, verdicts[w + 1].0));
        }
    }
    let (lo, hi) = flip.ok_or(CouplingError::NoFlip)?;
    let d = norm.dim() as f64;
    if lo > d || hi < 1.0 {
        return Err(CouplingError::BracketOutside { lo, hi, dim: norm.dim() });
    }
    Ok(AlphaSat { bracket: (lo, hi), clamped: (lo.max(1.0), hi.min(d)), verdicts })
}

/// F(r) = Σ_{‖x‖∞ ≥ r} J_x and its piecewise-linear inverse.
#[derive(Clone, Debug)]
pub struct TailFunction {
    /// F(r) for r = 0..table.len()-1.
    table: Vec<f64>,
    /// One-dimensional data for evaluating past the table.
    one_dim: Option<(PrefactorSpec, f64, f64)>,
}

impl TailFunction {
    pub fn new(spec: &CouplingSpec) -> Self {
        let z = spec.normalizer;
        if spec.dim() == 1 {
            let c = spec.norm.rho(&[1.0]);
            let pre = spec.prefactor.clone();
            let n_end = if pre.envelope {
                // until the profile underflows
                let mut n = 1u64;
                while pre.profile(c * n as f64) > 0.0 && n < 1 << 22 {
                    n += 1;
                }
                n
            } else {
                (spec.summed_radius / c).round() as u64
            };
            let mut suffix = vec![0.0; n_end as usize + 2];
            let mut acc = KahanSum::default();
            if !pre.envelope {
                acc.add(euler_maclaurin_tail(&pre, c, n_end as f64).0);
            }
            for n in (1..=n_end).rev() {
                acc.add(pre.profile(c * n as f64));
                suffix[n as usize] = 2.0 * acc.value() / z;
            }
            suffix[0] = suffix[1];
            suffix.pop();
            let one_dim = if pre.envelope { None } else { Some((pre, c, z)) };
            return Self { table: suffix, one_dim };
        }
        let mut by_linf: Vec<KahanSum> = Vec::new();
        for_each_lattice_in_shell(&spec.norm, 0.0, spec.summed_radius, |x, r| {
            let m = x.iter().map(|v| v.unsigned_abs()).max().unwrap() as usize;
            if by_linf.len() <= m {
                by_linf.resize(m + 1, KahanSum::default());
            }
            by_linf[m].add(spec.prefactor.profile(r));
        });
        let mut table = vec![0.0; by_linf.len() + 1];
        let mut acc = KahanSum::default();
        for m in (1..by_linf.len()).rev() {
            acc.add(by_linf[m].value());
            table[m] = acc.value() / z;
        }
        table[0] = table[1];
        table.pop();
        Self { table, one_dim: None }
    }

    pub fn eval(&self, r: u64) -> f64 {
        if (r as usize) < self.table.len() {
            return self.table[r as usize];
        }
        match &self.one_dim {
            Some((pre, c, z)) => {
                let n = r as f64;
                2.0 * (euler_maclaurin_tail(pre, *c, n).0 + pre.profile(c * n)) / z
            }
            None => 0.0,
        }
    }

    /// F^{-1}(u) for u ∈ (0, 1], linear between integer points; F^{-1}(1) = 1.
    pub fn inverse(&self, u: f64) -> Result<f64, CouplingError> {
        if !(u > 0.0 && u <= 1.0) {
            return Err(CouplingError::OutOfRange(format!("tail inverse needs u in (0,1], got {u}")));
        }
        if u >= self.eval(1) {
            return Ok(1.0);
        }
        let mut lo = 1u64;
        let mut hi = 2u64;
        while self.eval(hi) >= u {
            lo = hi;
            hi = hi.checked_mul(2).filter(|&h| h < 1 << 50).ok_or_else(|| {
                CouplingError::OutOfRange(format!("tail inverse: F never drops below {u}"))
            })?;
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.eval(mid) >= u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (f0, f1) = (self.eval(lo), self.eval(lo + 1));
        Ok(lo as f64 + (f0 - u) / (f0 - f1))
    }
}

pub fn tail_mass(spec: &CouplingSpec, r: u64) -> f64 {
    TailFunction::new(spec).eval(r)
}

pub fn tail_inverse(spec: &CouplingSpec, u: f64) -> Result<f64, CouplingError> {
    TailFunction::new(spec).inverse(u)
}

//! The prefactor sequence χ̃_n(s) built from a two-point table, its limit, the
//! C¹ shortcut, and the two ratio experiments comparing Ĝ(0, x)/J_x against
//! χ̃_n (exponential envelope) and βχ²/q (no envelope).

use std::collections::HashMap;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::couplings::{
    saturation_criterion, tail_inverse, CouplingError, CouplingSpec, Prefactor, Saturation,
};
use crate::geometry::{canonical_dual, dot, g_limit, surcharge_raw, DualVector, GeometryError};
use crate::mc::{estimate_susceptibility, estimate_two_point, McError, SamplerConfig, TwoPointTable};
use crate::region::{Cutoff, RCParams, Region};

/// Largest accepted truncation estimate relative to χ̃_n.
pub const MAX_TRUNCATION: f64 = 0.1;
/// Tolerance of the two-sided ratio check against χ̃_n.
pub const THEOREM14_TOL: f64 = 0.25;
/// Tolerance of the ratio check against βχ²/q.
pub const THEOREM17_TOL: f64 = 0.3;
/// Dual-face samples used by the saturation gate.
pub const GATE_FACE_SAMPLES: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AsymError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error(transparent)]
    Mc(#[from] McError),
    #[error("two-point table lacks the origin")]
    NoOrigin,
    #[error("table decays too slowly to bound the truncation: outer shell {outer:e}, inner shell {inner:e}")]
    SlowDecay { outer: f64, inner: f64 },
    #[error("truncation estimate {bound:e} exceeds {MAX_TRUNCATION} of the value {value:e}")]
    TruncationTooLarge { bound: f64, value: f64 },
    #[error("chi_tilde_n decreases from {prev} to {next} at n = {n}")]
    NonMonotone { n: i64, prev: f64, next: f64 },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Provenance {
    Exact,
    MonteCarlo,
    SawBound,
    Synthetic,
}

#[derive(Clone, Debug, Serialize)]
pub struct GEntry {
    pub x: Vec<i64>,
    pub g: f64,
    pub err: f64,
}

/// Two-point values G(0, u) on a finite set of displacements.
#[derive(Clone, Debug, Serialize)]
pub struct GTable {
    pub dim: usize,
    pub entries: Vec<GEntry>,
    pub provenance: Provenance,
}

impl GTable {
    pub fn new(dim: usize, entries: Vec<GEntry>, provenance: Provenance) -> Self {
        Self { dim, entries, provenance }
    }

    /// The Monte Carlo entries accepted by `keep`.
    pub fn from_mc(table: &TwoPointTable, dim: usize, keep: impl Fn(&[i64]) -> bool) -> Self {
        let entries = table
            .entries
            .iter()
            .filter(|e| keep(&e.x))
            .map(|e| GEntry { x: e.x.clone(), g: e.estimate.mean, err: e.estimate.stderr })
            .collect();
        Self { dim, entries, provenance: Provenance::MonteCarlo }
    }

    /// Exact values on every vertex of `region`, as displacements from its origin.
    pub fn from_region_values(region: &Region, values: &[f64], provenance: Provenance) -> Self {
        let d = region.dim;
        let o = region.points[region.origin];
        let entries = (0..region.n_vertices())
            .map(|v| GEntry {
                x: (0..d).map(|c| region.points[v][c] - o[c]).collect(),
                g: values[v],
                err: 0.0,
            })
            .collect();
        Self { dim: d, entries, provenance }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ChiTildeN {
    pub n: i64,
    /// (β/q) e^{ρ(ns)} Σ G(u) e^{−ρ(ns−u−v)} G(v).
    pub direct: f64,
    /// (β/q) Σ e^{t·u}G(u) e^{−𝔰_t(ns−u−v)} e^{t·v}G(v), times e^{𝔰_t(ns)}.
    pub surcharge: f64,
    /// Estimated contribution of displacements outside the table.
    pub truncation: f64,
    /// Propagated statistical error, table entries taken independent.
    pub stat_err: f64,
}

struct Prepared {
    t: DualVector,
    xs: Vec<Vec<f64>>,
    g: Vec<f64>,
    err: Vec<f64>,
    /// e^{t·u}
    tilt: Vec<f64>,
    /// Σ e^{t·u}G(u)
    big_g: f64,
    /// Estimated Σ e^{t·u}G(u) over displacements outside the table.
    tail: f64,
}

/// Outer-shell estimate of the tilted mass beyond the table: shells by ρ at
/// (U/4, U/2] and (U/2, U]; the outer one bounds the remainder when shell
/// masses at least halve per doubling, which is required.
fn prepare(table: &GTable, spec: &CouplingSpec, s: &[i64]) -> Result<Prepared, AsymError> {
    let sf: Vec<f64> = s.iter().map(|&v| v as f64).collect();
    let t = canonical_dual(&spec.norm, &sf)?;
    if !table.entries.iter().any(|e| e.x.iter().all(|&v| v == 0)) {
        return Err(AsymError::NoOrigin);
    }
    let xs: Vec<Vec<f64>> = table.entries.iter().map(|e| e.x.iter().map(|&v| v as f64).collect()).collect();
    let g: Vec<f64> = table.entries.iter().map(|e| e.g).collect();
    let err: Vec<f64> = table.entries.iter().map(|e| e.err).collect();
    let tilt: Vec<f64> = xs.iter().map(|x| dot(&t.t, x).exp()).collect();
    let h: Vec<f64> = tilt.iter().zip(&g).map(|(a, b)| a * b).collect();
    let big_g: f64 = h.iter().sum();
    let rho: Vec<f64> = xs.iter().map(|x| spec.norm.rho(x)).collect();
    let u_max = rho.iter().cloned().fold(0.0, f64::max);
    let mut tail = 0.0;
    if u_max > 0.0 {
        let shell = |lo: f64, hi: f64| -> f64 {
            rho.iter().zip(&h).filter(|(r, _)| **r > lo && **r <= hi).map(|(_, v)| v).sum()
        };
        let outer = shell(u_max / 2.0, u_max);
        let inner = shell(u_max / 4.0, u_max / 2.0);
        if outer > 0.0 && inner < 2.0 * outer {
            return Err(AsymError::SlowDecay { outer, inner });
        }
        tail = outer;
    }
    Ok(Prepared { t, xs, g, err, tilt, big_g, tail })
}

fn evaluate(p: &Prepared, spec: &CouplingSpec, s: &[i64], n: i64, pref: f64) -> ChiTildeN {
    let d = s.len();
    let ns: Vec<f64> = s.iter().map(|&v| (n * v) as f64).collect();
    let rho_ns = spec.norm.rho(&ns);
    let surch_ns = surcharge_raw(&spec.norm, &p.t.t, &ns);
    let m = p.xs.len();
    let mut direct = 0.0;
    let mut surch = 0.0;
    let mut dsum = vec![0.0; m];
    let mut y = vec![0.0; d];
    for a in 0..m {
        if p.g[a] == 0.0 && p.err[a] == 0.0 {
            continue;
        }
        for b in 0..m {
            if p.g[b] == 0.0 {
                continue;
            }
            for c in 0..d {
                y[c] = ns[c] - p.xs[a][c] - p.xs[b][c];
            }
            let e_s = (-surcharge_raw(&spec.norm, &p.t.t, &y)).exp();
            dsum[a] += p.tilt[b] * p.g[b] * e_s;
            if p.g[a] == 0.0 {
                continue;
            }
            direct += p.g[a] * p.g[b] * (rho_ns - spec.norm.rho(&y)).exp();
            surch += p.tilt[a] * p.g[a] * p.tilt[b] * p.g[b] * e_s;
        }
    }
    let stat_err = (0..m)
        .map(|a| {
            let grad = 2.0 * pref * p.tilt[a] * dsum[a] * surch_ns.exp();
            (grad * p.err[a]).powi(2)
        })
        .sum::<f64>()
        .sqrt();
    ChiTildeN {
        n,
        direct: pref * direct,
        surcharge: pref * surch * surch_ns.exp(),
        truncation: pref * (2.0 * p.big_g * p.tail + p.tail * p.tail),
        stat_err,
    }
}

/// χ̃_n(s) from `table` in both forms, with truncation and statistical errors.
pub fn chi_tilde_n(
    table: &GTable,
    spec: &CouplingSpec,
    s: &[i64],
    n: i64,
    beta: f64,
    q: f64,
) -> Result<ChiTildeN, AsymError> {
    let p = prepare(table, spec, s)?;
    let r = evaluate(&p, spec, s, n, beta / q);
    if r.truncation > MAX_TRUNCATION * r.surcharge {
        return Err(AsymError::TruncationTooLarge { bound: r.truncation, value: r.surcharge });
    }
    Ok(r)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ChiMethod {
    DirectDoubleSum,
    SurchargeForm,
    C1Shortcut,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChiTildeResult {
    /// (n, χ̃_n) in surcharge form along the doubling schedule.
    pub sequence: Vec<(i64, f64)>,
    pub limit: f64,
    /// Twice the last step of the schedule.
    pub schedule_bound: f64,
    pub converged: bool,
    pub truncation: f64,
    /// (β/q) Σ e^{t·u}G(u) e^{−g(u+v)} e^{t·v}G(v) with g from its own limit.
    pub g_form: f64,
    /// (β/q)(Σ e^{t·u}G(u))².
    pub shortcut: f64,
    pub method: ChiMethod,
    pub provenance: Provenance,
}

#[derive(Clone, Copy, Debug)]
pub struct LimitSchedule {
    pub n0: i64,
    pub n_max: i64,
    pub tol: f64,
}

impl Default for LimitSchedule {
    fn default() -> Self {
        Self { n0: 1, n_max: 1 << 24, tol: 1e-9 }
    }
}

/// Evaluates χ̃_n on n0, 2n0, … until successive values agree to `tol`
/// (relative); the sequence must not decrease.
pub fn chi_tilde_limit(
    table: &GTable,
    spec: &CouplingSpec,
    s: &[i64],
    beta: f64,
    q: f64,
    sched: LimitSchedule,
) -> Result<ChiTildeResult, AsymError> {
    let p = prepare(table, spec, s)?;
    let pref = beta / q;
    let mut sequence: Vec<(i64, f64)> = Vec::new();
    let mut converged = false;
    let mut last_step = 0.0;
    let mut truncation = 0.0;
    let mut n = sched.n0.max(1);
    while n <= sched.n_max {
        let r = evaluate(&p, spec, s, n, pref);
        truncation = r.truncation;
        if let Some(&(_, prev)) = sequence.last() {
            if r.surcharge < prev * (1.0 - 1e-12) - 1e-300 {
                return Err(AsymError::NonMonotone { n, prev, next: r.surcharge });
            }
            last_step = r.surcharge - prev;
            sequence.push((n, r.surcharge));
            if last_step <= sched.tol * r.surcharge {
                converged = true;
                break;
            }
        } else {
            sequence.push((n, r.surcharge));
        }
        n *= 2;
    }
    let limit = sequence.last().map_or(0.0, |v| v.1);
    let sf: Vec<f64> = s.iter().map(|&v| v as f64).collect();
    let mut g_cache: HashMap<Vec<i64>, f64> = HashMap::new();
    let mut g_form = 0.0;
    let d = s.len();
    for a in 0..p.xs.len() {
        for b in 0..p.xs.len() {
            let w: Vec<i64> = (0..d).map(|c| table.entries[a].x[c] + table.entries[b].x[c]).collect();
            let g = match g_cache.get(&w) {
                Some(&v) => v,
                None => {
                    let wf: Vec<f64> = w.iter().map(|&v| v as f64).collect();
                    let v = g_limit(&spec.norm, &p.t, &sf, &wf, sched.n_max as u64, 0.0)?.value;
                    g_cache.insert(w, v);
                    v
                }
            };
            g_form += p.tilt[a] * p.g[a] * p.tilt[b] * p.g[b] * (-g).exp();
        }
    }
    let method = if spec.norm.is_c1() { ChiMethod::C1Shortcut } else { ChiMethod::SurchargeForm };
    Ok(ChiTildeResult {
        sequence,
        limit,
        schedule_bound: 2.0 * last_step,
        converged,
        truncation,
        g_form: pref * g_form,
        shortcut: pref * p.big_g * p.big_g,
        method,
        provenance: table.provenance,
    })
}

/// Sample budget for a ratio experiment.
#[derive(Clone, Copy, Debug)]
pub struct Campaign {
    pub samples: u64,
    pub seed: u64,
    pub chains: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct RatioRow {
    pub n: i64,
    pub g_hat: f64,
    pub g_err: f64,
    pub j: f64,
    /// Ĝ/J.
    pub ratio: f64,
    pub ratio_err: f64,
    /// χ̃_n, or βχ̂²/q for the envelope-free experiment.
    pub prediction: f64,
    /// Statistical and truncation error of the prediction, combined linearly.
    pub prediction_err: f64,
    /// ratio/prediction − 1.
    pub deviation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RatioExperiment {
    pub kind: String,
    pub beta: f64,
    pub q: f64,
    pub rows: Vec<RatioRow>,
    /// |χ̃ at the last n − χ̃ at the one before| / χ̃ at the last n.
    pub cauchy: Option<f64>,
    /// χ̂ for the envelope-free experiment.
    pub chi: Option<(f64, f64)>,
    pub tolerance: f64,
    pub pass: bool,
    pub samples: u64,
    pub method: String,
}

fn one_dim_positive(spec: &CouplingSpec, s: &[i64]) -> Result<i64, AsymError> {
    if spec.dim() != 1 || s.len() != 1 || s[0] <= 0 {
        return Err(AsymError::Unsupported("ratio experiments run on d = 1 segments with s > 0".into()));
    }
    Ok(s[0])
}

/// Ĝ(0, ns)/J_{0,ns} against χ̃_n from the same run on the segment
/// [−W, n_max·s + W], W = n_max·s/2. The table for χ̃_n covers |u| ≤ W.
/// PASS when the two largest n deviate by at most [`THEOREM14_TOL`].
pub fn theorem14_experiment(
    spec: &CouplingSpec,
    s: &[i64],
    beta: f64,
    q: f64,
    n_list: &[i64],
    campaign: Campaign,
) -> Result<RatioExperiment, AsymError> {
    let step = one_dim_positive(spec, s)?;
    if !spec.prefactor.envelope {
        return Err(AsymError::Precondition("exponential envelope required".into()));
    }
    let sat = saturation_criterion(spec, &[step as f64], GATE_FACE_SAMPLES)?;
    if sat.verdict != Saturation::SaturationPositive {
        return Err(AsymError::Precondition(format!("saturation criterion gives {:?}", sat.verdict)));
    }
    let mut ns: Vec<i64> = n_list.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let far = *ns.last().ok_or_else(|| AsymError::Precondition("empty n list".into()))? * step;
    let w = far / 2;
    let region = Arc::new(Region::segment(spec, -w, far + w, Cutoff::None).map_err(McError::from)?);
    let params = RCParams::new(q, beta, crate::region::Boundary::Free).map_err(McError::from)?;
    let cfg = SamplerConfig::new(region, params, campaign.samples, campaign.seed).with_chains(campaign.chains);
    let mut xs: Vec<Vec<i64>> = (-w..=w).map(|u| vec![u]).collect();
    for &n in &ns {
        if n * step > w {
            xs.push(vec![n * step]);
        }
    }
    let table = estimate_two_point(&cfg, &xs)?;
    let gt = GTable::from_mc(&table, 1, |x| x[0].abs() <= w);
    let p = prepare(&gt, spec, s)?;
    let mut rows = Vec::new();
    let mut chis = Vec::new();
    for &n in &ns {
        let x = [n * step];
        let est = table.get(&x).expect("target estimated");
        let j = spec.eval(&x);
        let chi = evaluate(&p, spec, s, n, beta / q);
        if chi.truncation > MAX_TRUNCATION * chi.surcharge {
            return Err(AsymError::TruncationTooLarge { bound: chi.truncation, value: chi.surcharge });
        }
        chis.push(chi.surcharge);
        let ratio = est.mean / j;
        rows.push(RatioRow {
            n,
            g_hat: est.mean,
            g_err: est.stderr,
            j,
            ratio,
            ratio_err: est.stderr / j,
            prediction: chi.surcharge,
            prediction_err: chi.stat_err + chi.truncation,
            deviation: ratio / chi.surcharge - 1.0,
        });
    }
    let cauchy = (chis.len() >= 2).then(|| {
        let (a, b) = (chis[chis.len() - 2], chis[chis.len() - 1]);
        (b - a).abs() / b
    });
    let pass = rows.iter().rev().take(2).all(|r| r.deviation.abs() <= THEOREM14_TOL);
    Ok(RatioExperiment {
        kind: "theorem14".into(),
        beta,
        q,
        rows,
        cauchy,
        chi: None,
        tolerance: THEOREM14_TOL,
        pass,
        samples: table.samples,
        method: table.method.clone(),
    })
}

/// Ĝ(0, x)/J_x against βχ̂²/q without the exponential envelope, on the
/// segment [−2X, 3X] with X the largest x. χ̂ is the mean origin cluster size
/// from an independent run (seed + 1). PASS when the largest x deviates by at
/// most [`THEOREM17_TOL`].
pub fn theorem17_experiment(
    spec: &CouplingSpec,
    beta: f64,
    q: f64,
    x_list: &[i64],
    campaign: Campaign,
) -> Result<RatioExperiment, AsymError> {
    one_dim_positive(spec, &[1])?;
    if spec.prefactor.envelope {
        return Err(AsymError::Precondition("couplings must not carry the exponential envelope".into()));
    }
    if let Prefactor::Polynomial { alpha } = spec.prefactor.family {
        if alpha <= spec.dim() as f64 {
            return Err(AsymError::Precondition(format!("alpha = {alpha} must exceed d = {}", spec.dim())));
        }
    }
    let mut xs: Vec<i64> = x_list.to_vec();
    xs.sort_unstable();
    xs.dedup();
    let far = *xs.last().ok_or_else(|| AsymError::Precondition("empty x list".into()))?;
    if xs[0] <= 0 {
        return Err(AsymError::Precondition("targets must be positive".into()));
    }
    let region = Arc::new(Region::segment(spec, -2 * far, 3 * far, Cutoff::None).map_err(McError::from)?);
    let params = RCParams::new(q, beta, crate::region::Boundary::Free).map_err(McError::from)?;
    let cfg = SamplerConfig::new(region.clone(), params, campaign.samples, campaign.seed).with_chains(campaign.chains);
    let targets: Vec<Vec<i64>> = xs.iter().map(|&x| vec![x]).collect();
    let table = estimate_two_point(&cfg, &targets)?;
    let chi_cfg = SamplerConfig::new(region, params, campaign.samples, campaign.seed.wrapping_add(1))
        .with_chains(campaign.chains);
    let chi = estimate_susceptibility(&chi_cfg)?.chi;
    let pred_unit = beta * chi.mean * chi.mean / q;
    let pred_unit_err = 2.0 * beta * chi.mean * chi.stderr / q;
    let rows: Vec<RatioRow> = xs
        .iter()
        .map(|&x| {
            let est = table.get(&[x]).expect("target estimated");
            let j = spec.eval(&[x]);
            let ratio = est.mean / j;
            RatioRow {
                n: x,
                g_hat: est.mean,
                g_err: est.stderr,
                j,
                ratio,
                ratio_err: est.stderr / j,
                prediction: pred_unit,
                prediction_err: pred_unit_err,
                deviation: ratio / pred_unit - 1.0,
            }
        })
        .collect();
    let pass = rows.last().is_some_and(|r| r.deviation.abs() <= THEOREM17_TOL);
    Ok(RatioExperiment {
        kind: "theorem17".into(),
        beta,
        q,
        rows,
        cauchy: None,
        chi: Some((chi.mean, chi.stderr)),
        tolerance: THEOREM17_TOL,
        pass,
        samples: table.samples,
        method: table.method.clone(),
    })
}

/// K = C·F^{−1}(1/(f log f)), F the ℓ∞ tail of the couplings.
pub fn k_threshold(spec: &CouplingSpec, f: f64, c: f64) -> Result<f64, AsymError> {
    if spec.prefactor.envelope {
        return Err(AsymError::Precondition("threshold defined without the exponential envelope".into()));
    }
    if !(f >= 2.0) {
        return Err(AsymError::Precondition(format!("f = {f} must be >= 2")));
    }
    Ok(c * tail_inverse(spec, 1.0 / (f * f.ln()))?)
}

/// Long-edge threshold 3 log f used with the exponential envelope.
pub fn k_threshold_envelope(f: f64) -> f64 {
    3.0 * f.ln()
}

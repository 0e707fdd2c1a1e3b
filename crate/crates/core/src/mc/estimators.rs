use std::collections::HashSet;
use std::sync::Arc;

use serde::Serialize;

use crate::couplings::CouplingSpec;
use crate::geometry::MAX_DIM;
use crate::region::{Boundary, Cutoff, RCParams, Region, DEFAULT_EPS_TAIL};
use crate::stats::linear_fit;
use crate::unionfind::UnionFind;

use super::explore::Exploration;
use super::{run_chains, BatchStats, Estimate, McError, SampleView, SamplerConfig, SamplerKind};

/// Fewest effective conditional hits for a cluster-tail estimate.
pub const MIN_TAIL_HITS: f64 = 200.0;
/// Boundary-touch rate above which a susceptibility estimate is flagged.
pub const TOUCH_FLAG_RATE: f64 = 1e-3;
/// Boundary-touch rate above which it is rejected.
pub const TOUCH_ERROR_RATE: f64 = 1e-2;

#[derive(Clone, Debug, Serialize)]
pub struct TwoPointEntry {
    pub x: Vec<i64>,
    pub estimate: Estimate,
}

#[derive(Clone, Debug, Serialize)]
pub struct TwoPointTable {
    pub entries: Vec<TwoPointEntry>,
    pub q: f64,
    pub beta: f64,
    pub boundary: Boundary,
    pub n_vertices: usize,
    pub samples: u64,
    /// "exploration" (q = 1 conditional estimator) or "indicator".
    pub method: String,
}

impl TwoPointTable {
    pub fn get(&self, x: &[i64]) -> Option<&Estimate> {
        self.entries.iter().find(|e| e.x == x).map(|e| &e.estimate)
    }
}

fn target_vertices(region: &Region, displacements: &[Vec<i64>]) -> Result<Vec<usize>, McError> {
    let o = region.point(region.origin).to_vec();
    displacements
        .iter()
        .map(|x| {
            if x.len() != region.dim {
                return Err(McError::OutsideRegion(x.clone()));
            }
            let p: Vec<i64> = o.iter().zip(x).map(|(a, b)| a + b).collect();
            region.index_of(&p).ok_or_else(|| McError::OutsideRegion(x.clone()))
        })
        .collect()
}

/// Request for a conditional cluster-size tail riding on a two-point run.
#[derive(Clone, Debug)]
pub struct TailRequest {
    pub x: Vec<i64>,
    pub m_list: Vec<u64>,
}

/// Two-point estimates (and optionally a conditional tail) from one run.
/// Observables: one per displacement, then for a tail request the
/// connection weight followed by one weight per M.
fn two_point_stats(
    config: &SamplerConfig,
    displacements: &[Vec<i64>],
    tail: Option<&TailRequest>,
) -> Result<(BatchStats, &'static str), McError> {
    let region = &config.region;
    let targets = target_vertices(region, displacements)?;
    let tail_target = match tail {
        Some(t) => Some(target_vertices(region, std::slice::from_ref(&t.x))?[0]),
        None => None,
    };
    let m_list: Vec<u64> = tail.map(|t| t.m_list.clone()).unwrap_or_default();
    let n_obs = targets.len() + if tail.is_some() { 1 + m_list.len() } else { 0 };
    let origin = region.origin as u32;
    let k0 = targets.len();
    match config.kind {
        SamplerKind::Bernoulli if config.params.boundary == Boundary::Free => {
            // validates q = 1 up front
            Exploration::new(region, &config.params)?;
            let stats = run_chains(config, n_obs, || {
                let mut ex = Exploration::new(region, &config.params).expect("validated");
                let targets = targets.clone();
                let m_list = m_list.clone();
                move |s: &SampleView, out: &mut [f64]| {
                    ex.load(s.open_pairs());
                    for (slot, &x) in out.iter_mut().zip(&targets) {
                        *slot = ex.outcome(x as u32).phi;
                    }
                    if let Some(x) = tail_target {
                        let o = ex.outcome(x as u32);
                        out[k0] = o.phi;
                        for (k, &m) in m_list.iter().enumerate() {
                            if o.size as u64 > m {
                                out[k0 + 1 + k] = o.phi;
                            }
                        }
                    }
                }
            })?;
            Ok((stats, "exploration"))
        }
        _ => {
            let n_sites = config.n_sites();
            let ghost = (config.params.boundary == Boundary::Wired).then_some(region.n_vertices() as u32);
            let stats = run_chains(config, n_obs, || {
                let mut uf = UnionFind::new(n_sites);
                let targets = targets.clone();
                let m_list = m_list.clone();
                move |s: &SampleView, out: &mut [f64]| {
                    uf.reset();
                    for (u, v) in s.open_pairs() {
                        uf.union(u, v);
                    }
                    for (slot, &x) in out.iter_mut().zip(&targets) {
                        if uf.same(origin, x as u32) {
                            *slot = 1.0;
                        }
                    }
                    if let Some(x) = tail_target {
                        if uf.same(origin, x as u32) {
                            out[k0] = 1.0;
                            let size = origin_cluster_size(&mut uf, origin, ghost);
                            for (k, &m) in m_list.iter().enumerate() {
                                if size as u64 > m {
                                    out[k0 + 1 + k] = 1.0;
                                }
                            }
                        }
                    }
                }
            })?;
            Ok((stats, "indicator"))
        }
    }
}

/// |C(0)| counted over region vertices (the wired exterior excluded).
fn origin_cluster_size(uf: &mut UnionFind, origin: u32, ghost: Option<u32>) -> usize {
    uf.set_size(origin) - usize::from(ghost.is_some_and(|g| uf.same(origin, g)))
}

/// G(0, x) for each displacement x. With q = 1 and the free boundary the
/// two-sided exploration estimator is used; otherwise connection indicators.
pub fn estimate_two_point(config: &SamplerConfig, displacements: &[Vec<i64>]) -> Result<TwoPointTable, McError> {
    let (stats, method) = two_point_stats(config, displacements, None)?;
    table_from_stats(config, displacements, &stats, method)
}

fn table_from_stats(
    config: &SamplerConfig,
    displacements: &[Vec<i64>],
    stats: &BatchStats,
    method: &str,
) -> Result<TwoPointTable, McError> {
    let mut entries = Vec::with_capacity(displacements.len());
    for (k, x) in displacements.iter().enumerate() {
        let estimate = if x.iter().all(|&c| c == 0) {
            Estimate::exact(1.0, stats.samples())
        } else {
            stats.estimate(k)?
        };
        entries.push(TwoPointEntry { x: x.clone(), estimate });
    }
    Ok(TwoPointTable {
        entries,
        q: config.params.q,
        beta: config.params.beta,
        boundary: config.params.boundary,
        n_vertices: config.region.n_vertices(),
        samples: stats.samples(),
        method: method.to_string(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ClusterTail {
    pub x: Vec<i64>,
    pub m_list: Vec<u64>,
    /// P̂(|C(0)| > M | 0 ↔ x) per M.
    pub tail: Vec<Estimate>,
    /// Effective number of conditional hits, (Σw)²/Σw².
    pub hits: f64,
    /// Slope of log P̂ against M over the positive entries.
    pub slope: Option<f64>,
    pub connection: Estimate,
}

/// Two-point table and conditional tail from the same samples.
pub fn two_point_with_tail(
    config: &SamplerConfig,
    displacements: &[Vec<i64>],
    tail: &TailRequest,
) -> Result<(TwoPointTable, ClusterTail), McError> {
    let (stats, method) = two_point_stats(config, displacements, Some(tail))?;
    let table = table_from_stats(config, displacements, &stats, method)?;
    let k0 = displacements.len();
    let w = stats.total(k0);
    let w2 = stats.total_sq(k0);
    let hits = if w2 > 0.0 { w * w / w2 } else { 0.0 };
    if hits < MIN_TAIL_HITS {
        return Err(McError::InsufficientHits { hits, required: MIN_TAIL_HITS });
    }
    let tail_est: Vec<Estimate> =
        (0..tail.m_list.len()).map(|k| stats.ratio(k0 + 1 + k, k0)).collect::<Result<_, _>>()?;
    let pts: Vec<(f64, f64)> = tail
        .m_list
        .iter()
        .zip(&tail_est)
        .filter(|(_, e)| e.mean > 0.0)
        .map(|(&m, e)| (m as f64, e.mean.ln()))
        .collect();
    let slope = if pts.len() >= 2 {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        linear_fit(&xs, &ys).map(|f| f.1)
    } else {
        None
    };
    Ok((
        table,
        ClusterTail {
            x: tail.x.clone(),
            m_list: tail.m_list.clone(),
            tail: tail_est,
            hits,
            slope,
            connection: stats.estimate(k0)?,
        },
    ))
}

/// P̂(|C(0)| > M | 0 ↔ x) for M in `m_list`.
pub fn conditional_cluster_tail(config: &SamplerConfig, x: &[i64], m_list: &[u64]) -> Result<ClusterTail, McError> {
    if x.iter().all(|&c| c == 0) {
        return Err(McError::Config("conditioning target must differ from the origin".into()));
    }
    let req = TailRequest { x: x.to_vec(), m_list: m_list.to_vec() };
    Ok(two_point_with_tail(config, &[], &req)?.1)
}

#[derive(Clone, Debug, Serialize)]
pub struct Susceptibility {
    pub chi: Estimate,
    pub touch_rate: f64,
    /// Set when the origin cluster met the outer layer in more than
    /// [`TOUCH_FLAG_RATE`] of the samples.
    pub finite_size_flag: bool,
}

/// Vertices with a lattice neighbour (sup-norm distance 1) outside the region.
fn outer_layer(region: &Region) -> Vec<bool> {
    let set: HashSet<[i64; MAX_DIM]> = region.points.iter().copied().collect();
    let d = region.dim;
    let offsets: Vec<[i64; MAX_DIM]> = (0..3usize.pow(d as u32))
        .filter_map(|k| {
            let mut z = [0i64; MAX_DIM];
            let mut r = k;
            for c in z.iter_mut().take(d) {
                *c = (r % 3) as i64 - 1;
                r /= 3;
            }
            (z != [0; MAX_DIM]).then_some(z)
        })
        .collect();
    region
        .points
        .iter()
        .map(|p| {
            offsets.iter().any(|z| {
                let mut y = *p;
                for c in 0..d {
                    y[c] += z[c];
                }
                !set.contains(&y)
            })
        })
        .collect()
}

/// χ = E|C(0)| on the region.
pub fn estimate_susceptibility(config: &SamplerConfig) -> Result<Susceptibility, McError> {
    let region = &config.region;
    let outer = Arc::new(outer_layer(region));
    let n = region.n_vertices();
    let n_sites = config.n_sites();
    let origin = region.origin as u32;
    let stats = run_chains(config, 2, || {
        let mut uf = UnionFind::new(n_sites);
        let outer = outer.clone();
        move |s: &SampleView, out: &mut [f64]| {
            uf.reset();
            for (u, v) in s.open_pairs() {
                uf.union(u, v);
            }
            let root = uf.find(origin);
            let mut size = 0usize;
            let mut touch = false;
            if uf.set_size(origin) == 1 {
                size = 1;
                touch = outer[origin as usize];
            } else {
                for v in 0..n as u32 {
                    if uf.find(v) == root {
                        size += 1;
                        touch |= outer[v as usize];
                    }
                }
            }
            out[0] = size as f64;
            out[1] = f64::from(u8::from(touch));
        }
    })?;
    let touch_rate = stats.total(1) / stats.samples() as f64;
    if touch_rate > TOUCH_ERROR_RATE {
        return Err(McError::BoundaryTouch { rate: touch_rate, limit: TOUCH_ERROR_RATE });
    }
    Ok(Susceptibility { chi: stats.estimate(0)?, touch_rate, finite_size_flag: touch_rate > TOUCH_FLAG_RATE })
}

/// Settings for a finite-size run: f_N(β) = Φ^1_{Λ_2N}(0 ↔ Λ_N^c).
#[derive(Clone, Debug)]
pub struct FnRun {
    pub sweeps: u64,
    pub seed: u64,
    pub chains: usize,
    pub kind: Option<SamplerKind>,
}

/// The wired box Λ_2N with an automatic edge cutoff; the event is that the
/// origin cluster holds a vertex with sup-norm > N or reaches the exterior.
pub fn estimate_fn(coupling: &CouplingSpec, q: f64, beta: f64, n: i64, run: &FnRun) -> Result<Estimate, McError> {
    if n < 1 {
        return Err(McError::Config(format!("N must be >= 1, got {n}")));
    }
    let region = Arc::new(Region::boxed(coupling, 2 * n, Cutoff::Auto(DEFAULT_EPS_TAIL))?);
    let params = RCParams::new(q, beta, Boundary::Wired)?;
    let mut config = SamplerConfig::new(region.clone(), params, run.sweeps, run.seed).with_chains(run.chains);
    if let Some(k) = run.kind {
        config = config.with_kind(k);
    }
    let far: Arc<Vec<bool>> = Arc::new(
        (0..region.n_vertices())
            .map(|v| region.point(v).iter().any(|c| c.abs() > n))
            .chain(std::iter::once(true))
            .collect(),
    );
    let n_sites = config.n_sites();
    let origin = region.origin as u32;
    let stats = run_chains(&config, 1, || {
        let mut uf = UnionFind::new(n_sites);
        let far = far.clone();
        move |s: &SampleView, out: &mut [f64]| {
            uf.reset();
            for (u, v) in s.open_pairs() {
                uf.union(u, v);
            }
            if uf.set_size(origin) == 1 {
                return;
            }
            let root = uf.find(origin);
            if (0..n_sites as u32).any(|v| far[v as usize] && uf.find(v) == root) {
                out[0] = 1.0;
            }
        }
    })?;
    stats.estimate(0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SaturationDiagnostic {
    /// r_n stays within a factor 2 across the list.
    Consistent,
    /// r_n grows (within errors) by more than a factor 2 end to end.
    Broken,
    Undetermined,
}

#[derive(Clone, Debug, Serialize)]
pub struct IclRow {
    pub n: i64,
    pub g: Estimate,
    /// −log Ĝ(0, ns)/n
    pub nu_hat: f64,
    /// e^{ρ(ns)} Ĝ(0, ns)/ψ(ns)
    pub r: f64,
    pub r_err: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct IclReport {
    pub rows: Vec<IclRow>,
    pub verdict: SaturationDiagnostic,
}

/// Effective inverse correlation lengths along the lattice direction `s`,
/// read from a two-point table holding every n·s.
pub fn effective_icl(
    table: &TwoPointTable,
    spec: &CouplingSpec,
    s: &[i64],
    n_list: &[i64],
) -> Result<IclReport, McError> {
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let x: Vec<i64> = s.iter().map(|c| c * n).collect();
        let g = *table.get(&x).ok_or_else(|| McError::OutsideRegion(x.clone()))?;
        if !(g.mean > 0.0) {
            return Err(McError::NonPositive(n));
        }
        let rho = spec.norm.rho_i(&x);
        let scale = rho.exp() / spec.prefactor.psi(rho);
        rows.push(IclRow { n, g, nu_hat: -g.mean.ln() / n as f64, r: scale * g.mean, r_err: scale * g.stderr });
    }
    let verdict = saturation_diagnostic(&rows);
    Ok(IclReport { rows, verdict })
}

fn saturation_diagnostic(rows: &[IclRow]) -> SaturationDiagnostic {
    if rows.len() < 2 {
        return SaturationDiagnostic::Undetermined;
    }
    let first = &rows[0];
    let last = &rows[rows.len() - 1];
    let rising = rows.windows(2).all(|w| w[1].r + 2.0 * w[1].r_err >= w[0].r - 2.0 * w[0].r_err);
    if last.r / first.r > 2.0 && rising {
        return SaturationDiagnostic::Broken;
    }
    let max = rows.iter().map(|r| r.r).fold(f64::MIN, f64::max);
    let min = rows.iter().map(|r| r.r).fold(f64::MAX, f64::min);
    if max <= 2.0 * min {
        SaturationDiagnostic::Consistent
    } else {
        SaturationDiagnostic::Undetermined
    }
}

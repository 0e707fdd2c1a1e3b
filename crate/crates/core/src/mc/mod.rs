//! Monte Carlo sampling: independent-edge draws for q = 1, single-edge
//! heat-bath dynamics for q ≥ 1, batch-means error bars, and the estimators
//! built on them.

mod bernoulli;
mod dump;
mod estimators;
mod explore;
mod heatbath;

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::region::{Boundary, RCParams, Region, RegionError};

pub use bernoulli::BernoulliSampler;
pub use dump::{read_dump, DumpHeader, DumpWriter, DUMP_MAGIC};
pub use estimators::*;
pub use explore::{joint_exploration_reference, Exploration, ExplorationOutcome};
pub use heatbath::HeatBath;

/// Batches per chain for error bars.
pub const BATCHES: usize = 32;
/// Fewest batches accepted for a reported error.
pub const MIN_BATCHES: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McError {
    #[error("invalid sampler configuration: {0}")]
    Config(String),
    #[error("{got} recorded samples give fewer than {MIN_BATCHES} batches")]
    InsufficientSamples { got: u64 },
    #[error("direct edge sampling needs q = 1, got q = {0}")]
    NotBernoulli(f64),
    #[error("estimator needs the free boundary condition")]
    NeedsFreeBoundary,
    #[error("origin cluster touched the region boundary in {rate:.4} of samples (limit {limit})")]
    BoundaryTouch { rate: f64, limit: f64 },
    #[error("nonpositive two-point estimate at n = {0}")]
    NonPositive(i64),
    #[error("only {hits:.1} effective hits, need {required}")]
    InsufficientHits { hits: f64, required: f64 },
    #[error("displacement {0:?} is not in the region")]
    OutsideRegion(Vec<i64>),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error("I/O: {0}")]
    Io(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SamplerKind {
    /// Independent edges, q = 1 only.
    Bernoulli,
    HeatBath,
}

#[derive(Clone, Debug)]
pub struct SamplerConfig {
    pub region: Arc<Region>,
    pub params: RCParams,
    /// Total sweeps (heat-bath) or draws (Bernoulli) per chain.
    pub sweeps: u64,
    pub burn_in: u64,
    pub thinning: u64,
    pub seed: u64,
    pub chains: usize,
    pub kind: SamplerKind,
}

impl SamplerConfig {
    /// Defaults: Bernoulli when q = 1, heat-bath otherwise with a 10% burn-in
    /// (at most 10^4 sweeps); one chain; no thinning.
    pub fn new(region: Arc<Region>, params: RCParams, sweeps: u64, seed: u64) -> Self {
        let kind = if params.q == 1.0 { SamplerKind::Bernoulli } else { SamplerKind::HeatBath };
        let burn_in = match kind {
            SamplerKind::Bernoulli => 0,
            SamplerKind::HeatBath => (sweeps / 10).min(10_000),
        };
        Self { region, params, sweeps, burn_in, thinning: 1, seed, chains: 1, kind }
    }

    pub fn with_kind(mut self, kind: SamplerKind) -> Self {
        if kind == SamplerKind::HeatBath && self.burn_in == 0 {
            self.burn_in = (self.sweeps / 10).min(10_000);
        }
        self.kind = kind;
        self
    }

    pub fn with_chains(mut self, chains: usize) -> Self {
        self.chains = chains;
        self
    }

    pub fn validate(&self) -> Result<(), McError> {
        if self.sweeps <= self.burn_in {
            return Err(McError::Config(format!("sweeps ({}) must exceed burn_in ({})", self.sweeps, self.burn_in)));
        }
        if self.chains == 0 {
            return Err(McError::Config("chains must be >= 1".into()));
        }
        if self.thinning == 0 {
            return Err(McError::Config("thinning must be >= 1".into()));
        }
        if self.kind == SamplerKind::Bernoulli && self.params.q != 1.0 {
            return Err(McError::NotBernoulli(self.params.q));
        }
        Ok(())
    }

    pub fn recorded_per_chain(&self) -> u64 {
        (self.sweeps - self.burn_in) / self.thinning
    }

    /// Vertices seen by samplers: the region, plus the exterior when wired.
    pub fn n_sites(&self) -> usize {
        self.region.n_vertices() + usize::from(self.params.boundary == Boundary::Wired)
    }
}

/// Mean with batch-means standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
    /// Integrated autocorrelation time from batch variance (1/2 for
    /// independent samples).
    pub tau: f64,
}

impl Estimate {
    pub fn exact(v: f64, n: u64) -> Self {
        Self { mean: v, stderr: 0.0, n, tau: 0.5 }
    }

    /// |mean − x| in units of the standard error (∞ when the error is zero
    /// and the values differ).
    pub fn z_score(&self, x: f64) -> f64 {
        let d = (self.mean - x).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.stderr
        }
    }
}

#[derive(Clone, Debug)]
struct Batch {
    count: u64,
    sums: Vec<f64>,
}

/// Running sums of several observables over one or more chains, split into
/// contiguous batches.
#[derive(Clone, Debug)]
pub struct BatchStats {
    n_obs: usize,
    planned: u64,
    pushed: u64,
    batches: Vec<Batch>,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl BatchStats {
    /// Accumulator for `planned` samples of `n_obs` observables.
    pub fn new(n_obs: usize, planned: u64) -> Self {
        let nb = (planned as usize).clamp(1, BATCHES);
        Self {
            n_obs,
            planned,
            pushed: 0,
            batches: (0..nb).map(|_| Batch { count: 0, sums: vec![0.0; n_obs] }).collect(),
            sum: vec![0.0; n_obs],
            sum_sq: vec![0.0; n_obs],
        }
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn samples(&self) -> u64 {
        self.batches.iter().map(|b| b.count).sum()
    }

    pub fn push(&mut self, vals: &[f64]) {
        debug_assert_eq!(vals.len(), self.n_obs);
        let nb = self.batches.len() as u128;
        let idx = ((self.pushed.min(self.planned.saturating_sub(1)) as u128 * nb) / self.planned.max(1) as u128) as usize;
        self.pushed += 1;
        let last = self.batches.len() - 1;
        let b = &mut self.batches[idx.min(last)];
        b.count += 1;
        for k in 0..self.n_obs {
            let v = vals[k];
            b.sums[k] += v;
            self.sum[k] += v;
            self.sum_sq[k] += v * v;
        }
    }

    /// Appends the batches of another accumulator (chains are reduced in a
    /// fixed order).
    pub fn merge(&mut self, other: BatchStats) {
        assert_eq!(self.n_obs, other.n_obs);
        self.planned += other.planned;
        self.pushed += other.pushed;
        for k in 0..self.n_obs {
            self.sum[k] += other.sum[k];
            self.sum_sq[k] += other.sum_sq[k];
        }
        self.batches.extend(other.batches);
    }

    fn filled(&self) -> Vec<&Batch> {
        self.batches.iter().filter(|b| b.count > 0).collect()
    }

    pub fn estimate(&self, k: usize) -> Result<Estimate, McError> {
        let batches = self.filled();
        let n = self.samples();
        if batches.len() < MIN_BATCHES {
            return Err(McError::InsufficientSamples { got: n });
        }
        let mean = self.sum[k] / n as f64;
        let nb = batches.len() as f64;
        let var_b = batches.iter().map(|b| (b.sums[k] / b.count as f64 - mean).powi(2)).sum::<f64>() / (nb - 1.0);
        let var = (self.sum_sq[k] / n as f64 - mean * mean).max(0.0);
        let tau = if var > 0.0 { (n as f64 / nb) * var_b / (2.0 * var) } else { 0.5 };
        Ok(Estimate { mean, stderr: (var_b / nb).sqrt(), n, tau })
    }

    pub fn estimates(&self) -> Result<Vec<Estimate>, McError> {
        (0..self.n_obs).map(|k| self.estimate(k)).collect()
    }

    /// Σ obs_num / Σ obs_den with a linearized batch error.
    pub fn ratio(&self, num: usize, den: usize) -> Result<Estimate, McError> {
        let batches = self.filled();
        let n = self.samples();
        if batches.len() < MIN_BATCHES {
            return Err(McError::InsufficientSamples { got: n });
        }
        let r = if self.sum[den] > 0.0 { self.sum[num] / self.sum[den] } else { 0.0 };
        let ybar = self.sum[den] / n as f64;
        if ybar <= 0.0 {
            return Ok(Estimate { mean: r, stderr: f64::INFINITY, n, tau: 0.5 });
        }
        let z: Vec<f64> = batches
            .iter()
            .map(|b| (b.sums[num] - r * b.sums[den]) / (b.count as f64 * ybar))
            .collect();
        let nb = z.len() as f64;
        let zbar = z.iter().sum::<f64>() / nb;
        let var = z.iter().map(|v| (v - zbar).powi(2)).sum::<f64>() / (nb - 1.0);
        Ok(Estimate { mean: r, stderr: (var / nb).sqrt(), n, tau: 0.5 })
    }

    /// Raw total of observable k.
    pub fn total(&self, k: usize) -> f64 {
        self.sum[k]
    }

    pub fn total_sq(&self, k: usize) -> f64 {
        self.sum_sq[k]
    }
}

/// One recorded configuration. `edges` lists the measure's edges (see
/// [`Region::measure_edges`]); under the wired boundary the exterior is
/// vertex `n_sites − 1`.
pub struct SampleView<'a> {
    pub n_sites: usize,
    pub edges: &'a [(u32, u32)],
    /// Indices of open edges, ascending.
    pub open: &'a [u32],
}

impl SampleView<'_> {
    pub fn open_pairs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.open.iter().map(|&e| self.edges[e as usize])
    }
}

fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(chain as u64))
}

/// Runs every chain (in parallel, reduced in chain order) and feeds each
/// recorded configuration to an observer built by `make`.
pub fn run_chains<M, F>(config: &SamplerConfig, n_obs: usize, make: M) -> Result<BatchStats, McError>
where
    M: Fn() -> F + Sync,
    F: FnMut(&SampleView, &mut [f64]),
{
    config.validate()?;
    let recorded = config.recorded_per_chain();
    if (recorded as usize).saturating_mul(config.chains) < MIN_BATCHES {
        return Err(McError::InsufficientSamples { got: recorded * config.chains as u64 });
    }
    let edges: Vec<(u32, u32)> =
        config.region.measure_edges(config.params.boundary).iter().map(|&(u, v, _)| (u, v)).collect();
    let bernoulli = match config.kind {
        SamplerKind::Bernoulli => Some(BernoulliSampler::new(&config.region, &config.params)),
        SamplerKind::HeatBath => None,
    };
    let per_chain: Vec<BatchStats> = (0..config.chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = chain_rng(config.seed, c);
            let mut stats = BatchStats::new(n_obs, recorded);
            let mut obs = make();
            let mut vals = vec![0.0; n_obs];
            let mut open = Vec::new();
            let n_sites = config.n_sites();
            match &bernoulli {
                Some(s) => {
                    for _ in 0..recorded {
                        s.sample(&mut rng, &mut open);
                        vals.iter_mut().for_each(|v| *v = 0.0);
                        obs(&SampleView { n_sites, edges: &edges, open: &open }, &mut vals);
                        stats.push(&vals);
                    }
                }
                None => {
                    let mut hb = HeatBath::new(&config.region, &config.params);
                    for _ in 0..config.burn_in {
                        hb.sweep(&mut rng);
                    }
                    for _ in 0..recorded {
                        for _ in 0..config.thinning {
                            hb.sweep(&mut rng);
                        }
                        hb.open_edges(&mut open);
                        vals.iter_mut().for_each(|v| *v = 0.0);
                        obs(&SampleView { n_sites, edges: &edges, open: &open }, &mut vals);
                        stats.push(&vals);
                    }
                }
            }
            stats
        })
        .collect();
    let mut it = per_chain.into_iter();
    let mut total = it.next().expect("at least one chain");
    for s in it {
        total.merge(s);
    }
    Ok(total)
}

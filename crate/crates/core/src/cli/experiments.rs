//! One runner per experiment kind. Each returns its output files as bytes;
//! the caller writes them and builds the manifest.

use std::sync::Arc;

use serde::Serialize;

use super::config::{ConfigError, ExperimentConfig, Kind};
use crate::asymptotics::{theorem14_experiment, theorem17_experiment, AsymError, Campaign, RatioExperiment};
use crate::couplings::{alpha_sat_estimate, saturation_criterion, CouplingError, Saturation};
use crate::exact::{exact_two_point, finite_energy_audit, stochastic_domination_audit, ExactError};
use crate::geometry::{canonical_dual, sample_dual_face, GeometryError};
use crate::mc::{conditional_cluster_tail, effective_icl, estimate_fn, estimate_two_point, FnRun};
use crate::mc::{McError, SamplerConfig};
use crate::saw::{cone_series, cone_spec, saw_two_point, SawError};
use crate::seqlab::{check_and_extract_b, check_hyp_a, extract_bound_a, Seq, SeqError, SeqHypA, SeqHypB};

/// A failure classified by exit code.
#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    /// Numeric or verdict conflict.
    Conflict(String),
    Budget(String),
    Other(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Conflict(_) => 3,
            RunError::Budget(_) => 4,
            RunError::Other(_) => 1,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "config error: {e}"),
            RunError::Conflict(m) => write!(f, "numeric conflict: {m}"),
            RunError::Budget(m) => write!(f, "budget exceeded: {m}"),
            RunError::Other(m) => write!(f, "{m}"),
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<GeometryError> for RunError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::MonotonicityViolation { .. } => RunError::Conflict(e.to_string()),
            _ => RunError::Other(e.to_string()),
        }
    }
}

impl From<CouplingError> for RunError {
    fn from(e: CouplingError) -> Self {
        match e {
            CouplingError::Geometry(g) => g.into(),
            CouplingError::VerdictConflict { .. } | CouplingError::NonMonotone(_) => RunError::Conflict(e.to_string()),
            _ => RunError::Other(e.to_string()),
        }
    }
}

impl From<ExactError> for RunError {
    fn from(e: ExactError) -> Self {
        match e {
            ExactError::BudgetExceeded { .. } | ExactError::TooManyVertices(_) => RunError::Budget(e.to_string()),
            ExactError::FiniteEnergyViolation { .. } | ExactError::DominationViolation { .. } => {
                RunError::Conflict(e.to_string())
            }
            _ => RunError::Other(e.to_string()),
        }
    }
}

impl From<McError> for RunError {
    fn from(e: McError) -> Self {
        match e {
            McError::BoundaryTouch { .. } | McError::NonPositive(_) => RunError::Conflict(e.to_string()),
            _ => RunError::Other(e.to_string()),
        }
    }
}

impl From<AsymError> for RunError {
    fn from(e: AsymError) -> Self {
        match e {
            AsymError::Geometry(g) => g.into(),
            AsymError::Coupling(c) => c.into(),
            AsymError::Mc(m) => m.into(),
            AsymError::NonMonotone { .. } | AsymError::TruncationTooLarge { .. } | AsymError::SlowDecay { .. } => {
                RunError::Conflict(e.to_string())
            }
            AsymError::Precondition(m) | AsymError::Unsupported(m) => {
                RunError::Config(ConfigError { field: "experiment".into(), message: m })
            }
            _ => RunError::Other(e.to_string()),
        }
    }
}

impl From<SawError> for RunError {
    fn from(e: SawError) -> Self {
        match e {
            SawError::BudgetExceeded(_) => RunError::Budget(e.to_string()),
            SawError::Exact(x) => x.into(),
            _ => RunError::Other(e.to_string()),
        }
    }
}

impl From<SeqError> for RunError {
    fn from(e: SeqError) -> Self {
        match e {
            SeqError::BoundFailed(_) | SeqError::ReplayFailed(_) => RunError::Conflict(e.to_string()),
            _ => RunError::Other(e.to_string()),
        }
    }
}

/// A named output file.
#[derive(Clone, Debug, PartialEq)]
pub struct Output {
    pub name: String,
    pub bytes: Vec<u8>,
}

fn csv_file<T: Serialize>(name: &str, rows: &[T]) -> Result<Output, RunError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| RunError::Other(format!("{name}: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| RunError::Other(format!("{name}: {e}")))?;
    Ok(Output { name: name.into(), bytes })
}

fn json_file<T: Serialize>(name: &str, value: &T) -> Result<Output, RunError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| RunError::Other(format!("{name}: {e}")))?;
    bytes.push(b'\n');
    Ok(Output { name: name.into(), bytes })
}

/// Vectors in CSV cells, components joined by ';'.
fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(";")
}

fn as_f64(v: &[i64]) -> Vec<f64> {
    v.iter().map(|&c| c as f64).collect()
}

/// Seed for the i-th β of a grid.
fn grid_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_add((i as u64) << 32)
}

pub fn run(kind: Kind, cfg: &ExperimentConfig, seed: u64) -> Result<Vec<Output>, RunError> {
    cfg.validate(kind)?;
    match kind {
        Kind::Wulff => wulff(cfg),
        Kind::Criterion => criterion(cfg),
        Kind::AlphaSat => alpha_sat(cfg),
        Kind::Exact => exact(cfg),
        Kind::Mc => mc(cfg, seed),
        Kind::Theorem14 | Kind::Theorem17 => ratio(kind, cfg, seed),
        Kind::Tail => tail(cfg, seed),
        Kind::FnScan => fn_scan(cfg, seed),
        Kind::Saw => saw(cfg),
        Kind::Seq => seq(cfg),
    }
}

#[derive(Serialize)]
struct WulffRow {
    s: String,
    t: String,
    unique: bool,
    rho_s: f64,
}

fn wulff(cfg: &ExperimentConfig) -> Result<Vec<Output>, RunError> {
    let norm = cfg.norm()?;
    let mut rows = Vec::new();
    for s in &cfg.experiment.directions {
        let sf = as_f64(s);
        for t in sample_dual_face(&norm, &sf, cfg.experiment.face_samples)? {
            rows.push(WulffRow { s: join(s), t: join(&t.t), unique: t.unique, rho_s: norm.rho(&t.s) });
        }
    }
    Ok(vec![csv_file("wulff.csv", &rows)?])
}

#[derive(Serialize)]
struct CriterionRow {
    alpha: f64,
    s: String,
    t: String,
    verdict: String,
    slope: f64,
    saturation: String,
}

fn criterion(cfg: &ExperimentConfig) -> Result<Vec<Output>, RunError> {
    let alphas = if cfg.experiment.alpha_grid.is_empty() {
        vec![cfg.coupling.alpha]
    } else {
        cfg.experiment.alpha_grid.clone()
    };
    let mut rows = Vec::new();
    for &alpha in &alphas {
        let mut c = cfg.clone();
        c.coupling.alpha = alpha;
        let spec = c.coupling_spec()?;
        for s in &cfg.experiment.directions {
            let rep = saturation_criterion(&spec, &as_f64(s), cfg.experiment.face_samples)?;
            for (t, v, slope) in &rep.samples {
                rows.push(CriterionRow {
                    alpha,
                    s: join(s),
                    t: join(t),
                    verdict: format!("{v:?}"),
                    slope: *slope,
                    saturation: format!("{:?}", rep.verdict),
                });
            }
        }
    }
    Ok(vec![csv_file("criterion.csv", &rows)?])
}

#[derive(Serialize)]
struct AlphaSatRow {
    s: String,
    lo: f64,
    hi: f64,
    clamped_lo: f64,
    clamped_hi: f64,
}

#[derive(Serialize)]
struct AlphaVerdictRow {
    s: String,
    alpha: f64,
    saturation: Saturation,
}

fn alpha_sat(cfg: &ExperimentConfig) -> Result<Vec<Output>, RunError> {
    let norm = cfg.norm()?;
    let mut rows = Vec::new();
    let mut verdicts = Vec::new();
    for s in &cfg.experiment.directions {
        let a = alpha_sat_estimate(&norm, &as_f64(s), &cfg.experiment.alpha_grid, cfg.experiment.face_samples)?;
        rows.push(AlphaSatRow {
            s: join(s),
            lo: a.bracket.0,
            hi: a.bracket.1,
            clamped_lo: a.clamped.0,
            clamped_hi: a.clamped.1,
        });
        verdicts.extend(a.verdicts.iter().map(|&(alpha, saturation)| AlphaVerdictRow { s: join(s), alpha, saturation }));
    }
    Ok(vec![csv_file("alpha_sat.csv", &rows)?, csv_file("alpha_verdicts.csv", &verdicts)?])
}

#[derive(Serialize)]
struct ExactRow {
    beta: f64,
    x: String,
    g: f64,
}

#[derive(Serialize)]
struct AuditRow {
    beta: f64,
    finite_energy_max_violation: f64,
    finite_energy_patterns: u64,
    domination_max_violation: f64,
    domination_events: usize,
}

fn exact(cfg: &ExperimentConfig) -> Result<Vec<Output>, RunError> {
    let spec = cfg.coupling_spec()?;
    let region = cfg.region_of(&spec)?;
    let o = region.point(region.origin).to_vec();
    let mut rows = Vec::new();
    let mut audits = Vec::new();
    for &beta in &cfg.params.beta {
        let params = cfg.rc_params(beta)?;
        let g = exact_two_point(&region, &params)?;
        for (v, &gv) in g.iter().enumerate() {
            let x: Vec<i64> = region.point(v).iter().zip(&o).map(|(a, b)| a - b).collect();
            rows.push(ExactRow { beta, x: join(&x), g: gv });
        }
        let fe = finite_energy_audit(&region, &params)?;
        let dom = stochastic_domination_audit(&region, cfg.params.q, beta, beta)?;
        audits.push(AuditRow {
            beta,
            finite_energy_max_violation: fe.max_violation,
            finite_energy_patterns: fe.patterns_checked,
            domination_max_violation: dom.max_violation,
            domination_events: dom.events,
        });
    }
    Ok(vec![csv_file("exact.csv", &rows)?, csv_file("audits.csv", &audits)?])
}

fn sampler(cfg: &ExperimentConfig, region: Arc<crate::region::Region>, beta: f64, seed: u64) -> Result<SamplerConfig, RunError> {
    let mut s = SamplerConfig::new(region, cfg.rc_params(beta)?, cfg.sampler.samples, seed).with_chains(cfg.sampler.chains);
    if let Some(k) = cfg.sampler_kind()? {
        s = s.with_kind(k);
    }
    Ok(s)
}

#[derive(Serialize)]
struct McRow {
    beta: f64,
    x: String,
    n: i64,
    mean: f64,
    stderr: f64,
    nsamples: u64,
}

#[derive(Serialize)]
struct IclCsvRow {
    beta: f64,
    s: String,
    n: i64,
    mean: f64,
    stderr: f64,
    nsamples: u64,
    nu_hat: f64,
    r: f64,
    r_err: f64,
    verdict: String,
}

fn mc(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<Output>, RunError> {
    let spec = cfg.coupling_spec()?;
    let region = Arc::new(cfg.region_of(&spec)?);
    let e = &cfg.experiment;
    let mut xs: Vec<(i64, Vec<i64>)> = Vec::new();
    for s in &e.directions {
        for &n in &e.n_list {
            xs.push((n, s.iter().map(|c| c * n).collect()));
        }
    }
    let displacements: Vec<Vec<i64>> = xs.iter().map(|(_, x)| x.clone()).collect();
    let mut rows = Vec::new();
    let mut icl = Vec::new();
    for (i, &beta) in cfg.params.beta.iter().enumerate() {
        let sc = sampler(cfg, region.clone(), beta, grid_seed(seed, i))?;
        let table = estimate_two_point(&sc, &displacements)?;
        for ((n, x), entry) in xs.iter().zip(&table.entries) {
            let est = entry.estimate;
            rows.push(McRow { beta, x: join(x), n: *n, mean: est.mean, stderr: est.stderr, nsamples: est.n });
        }
        for s in &e.directions {
            let rep = match effective_icl(&table, &spec, s, &e.n_list) {
                Ok(r) => r,
                Err(McError::NonPositive(_)) => continue,
                Err(err) => return Err(err.into()),
            };
            for r in &rep.rows {
                icl.push(IclCsvRow {
                    beta,
                    s: join(s),
                    n: r.n,
                    mean: r.g.mean,
                    stderr: r.g.stderr,
                    nsamples: r.g.n,
                    nu_hat: r.nu_hat,
                    r: r.r,
                    r_err: r.r_err,
                    verdict: format!("{:?}", rep.verdict),
                });
            }
        }
    }
    Ok(vec![csv_file("mc.csv", &rows)?, csv_file("icl.csv", &icl)?])
}

#[derive(Serialize)]
struct RatioCsvRow {
    beta: f64,
    n: i64,
    g_hat: f64,
    g_err: f64,
    j: f64,
    ratio: f64,
    ratio_err: f64,
    prediction: f64,
    prediction_err: f64,
    deviation: f64,
    nsamples: u64,
}

fn ratio(kind: Kind, cfg: &ExperimentConfig, seed: u64) -> Result<Vec<Output>, RunError> {
    let spec = cfg.coupling_spec()?;
    let e = &cfg.experiment;
    let mut experiments: Vec<RatioExperiment> = Vec::new();
    for (i, &beta) in cfg.params.beta.iter().enumerate() {
        let campaign = Campaign { samples: cfg.sampler.samples, seed: grid_seed(seed, i), chains: cfg.sampler.chains };
        let exp = if kind == Kind::Theorem14 {
            theorem14_experiment(&spec, &e.directions[0], beta, cfg.params.q, &e.n_list, campaign)?
        } else {
            theorem17_experiment(&spec, beta, cfg.params.q, &e.x_list, campaign)?
        };
        experiments.push(exp);
    }
    let rows: Vec<RatioCsvRow> = experiments
        .iter()
        .flat_map(|x| {
            x.rows.iter().map(|r| RatioCsvRow {
                beta: x.beta,
                n: r.n,
                g_hat: r.g_hat,
                g_err: r.g_err,
                j: r.j,
                ratio: r.ratio,
                ratio_err: r.ratio_err,
                prediction: r.prediction,
                prediction_err: r.prediction_err,
                deviation: r.deviation,
                nsamples: x.samples,
            })
        })
        .collect();
    let name = kind.name();
    Ok(vec![csv_file(&format!("{name}.csv"), &rows)?, json_file(&format!("{name}.json"), &experiments)?])
}

#[derive(Serialize)]
struct TailRow {
    beta: f64,
    m: u64,
    mean: f64,
    stderr: f64,
    nsamples: u64,
}

#[derive(Serialize)]
struct TailSummary {
    beta: f64,
    x: Vec<i64>,
    hits: f64,
    slope: Option<f64>,
    connection: f64,
    connection_err: f64,
}

fn tail(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<Output>, RunError> {
    let spec = cfg.coupling_spec()?;
    let region = Arc::new(cfg.region_of(&spec)?);
    let e = &cfg.experiment;
    let x: Vec<i64> = e.directions[0].iter().map(|c| c * e.n_list[0]).collect();
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (i, &beta) in cfg.params.beta.iter().enumerate() {
        let sc = sampler(cfg, region.clone(), beta, grid_seed(seed, i))?;
        let t = conditional_cluster_tail(&sc, &x, &e.m_list)?;
        for (&m, est) in t.m_list.iter().zip(&t.tail) {
            rows.push(TailRow { beta, m, mean: est.mean, stderr: est.stderr, nsamples: est.n });
        }
        summary.push(TailSummary {
            beta,
            x: x.clone(),
            hits: t.hits,
            slope: t.slope,
            connection: t.connection.mean,
            connection_err: t.connection.stderr,
        });
    }
    Ok(vec![csv_file("tail.csv", &rows)?, json_file("tail.json", &summary)?])
}

#[derive(Serialize)]
struct FnRow {
    beta: f64,
    n: i64,
    mean: f64,
    stderr: f64,
    nsamples: u64,
}

fn fn_scan(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<Output>, RunError> {
    let spec = cfg.coupling_spec()?;
    let kind = cfg.sampler_kind()?;
    let mut rows = Vec::new();
    for (i, &beta) in cfg.params.beta.iter().enumerate() {
        for (k, &n) in cfg.experiment.n_list.iter().enumerate() {
            let run = FnRun {
                sweeps: cfg.sampler.samples,
                seed: grid_seed(seed, i).wrapping_add(k as u64),
                chains: cfg.sampler.chains,
                kind,
            };
            let est = estimate_fn(&spec, cfg.params.q, beta, n, &run)?;
            rows.push(FnRow { beta, n, mean: est.mean, stderr: est.stderr, nsamples: est.n });
        }
    }
    Ok(vec![csv_file("fn.csv", &rows)?])
}

#[derive(Serialize)]
struct SawRow {
    x: String,
    len: usize,
    partial_sum: f64,
    walks_visited: u64,
}

#[derive(Serialize)]
struct ConeRow {
    s: String,
    t: String,
    delta: f64,
    steps: usize,
    witness_margin: f64,
    epsilon: f64,
    j_r: f64,
    certificate: bool,
    partial_sum: f64,
    crossings: usize,
    last_crossing_n: Option<u64>,
}

fn saw(cfg: &ExperimentConfig) -> Result<Vec<Output>, RunError> {
    let spec = cfg.coupling_spec()?;
    let e = &cfg.experiment;
    let mut rows = Vec::new();
    let mut cones = Vec::new();
    for s in &e.directions {
        for &k in &e.x_list {
            let x: Vec<i64> = s.iter().map(|c| c * k).collect();
            let w = saw_two_point(&spec, e.lambda, &x, e.max_len, e.step_radius)?;
            for (l, &p) in w.partial_sums.iter().enumerate() {
                rows.push(SawRow { x: join(&x), len: l + 1, partial_sum: p, walks_visited: w.walks_visited });
            }
        }
        let t = canonical_dual(&spec.norm, &as_f64(s))?;
        let cone = cone_spec(&spec, &t.t, e.step_radius)?;
        for &eps in &e.epsilon {
            let c = cone_series(&cone, e.lambda, eps);
            cones.push(ConeRow {
                s: join(s),
                t: join(&cone.t),
                delta: cone.delta,
                steps: cone.steps.len(),
                witness_margin: cone.witness_margin,
                epsilon: eps,
                j_r: c.j_r,
                certificate: c.certificate,
                partial_sum: c.partial_sum,
                crossings: c.crossings.len(),
                last_crossing_n: c.crossings.last().map(|x| x.1),
            });
        }
    }
    Ok(vec![csv_file("saw.csv", &rows)?, csv_file("cone.csv", &cones)?])
}

#[derive(Serialize)]
struct SeqRow {
    n: usize,
    log_a: f64,
    log_bound: Option<f64>,
}

#[derive(Serialize)]
struct SeqSummary<'a> {
    family: &'a str,
    lemma: &'a str,
    len: usize,
    status: String,
    report: Option<crate::seqlab::SeqReport>,
    bound_a: Option<crate::seqlab::BoundA>,
    bound_b: Option<crate::seqlab::BoundB>,
}

fn seq(cfg: &ExperimentConfig) -> Result<Vec<Output>, RunError> {
    let e = &cfg.experiment;
    let f: fn(usize) -> f64 = match e.seq_family.as_str() {
        "exp" => |n| -(n as f64),
        "sqrt-exp" => |n| -(n as f64).sqrt(),
        "inverse" => |n| -(n as f64).ln(),
        _ => |n| -2.0 * (n as f64).ln(),
    };
    let a = Seq::from_log_fn(e.seq_len, f)?;
    let mut summary = SeqSummary {
        family: &e.seq_family,
        lemma: &e.seq_lemma,
        len: e.seq_len,
        status: String::new(),
        report: None,
        bound_a: None,
        bound_b: None,
    };
    let mut bound: Option<Box<dyn Fn(usize) -> f64>> = None;
    if e.seq_lemma == "a" {
        let witnesses: Vec<usize> = (7..usize::BITS).map(|k| 1usize << k).take_while(|&n| n <= e.seq_len).collect();
        let hyp = SeqHypA {
            m: e.seq_m,
            alpha: e.seq_alpha,
            c1_big: e.seq_c1_big,
            c2_big: e.seq_c2_big,
            c1: e.seq_c1,
            eps: e.seq_eps,
            witnesses,
        };
        let report = check_hyp_a(&a, &hyp)?;
        if report.clean {
            let b = extract_bound_a(&a, &hyp)?;
            let (lc, c, nu) = (b.big_c.ln(), b.c, b.nu);
            bound = Some(Box::new(move |n| lc - c * (n as f64).powf(nu)));
            summary.bound_a = Some(b);
            summary.status = "bound".into();
        } else {
            summary.status = "hypotheses violated".into();
        }
        summary.report = Some(report);
    } else {
        let hyp = SeqHypB { c1: e.seq_c1, alpha: e.seq_alpha, eps: e.seq_eps, n_tilde: e.seq_n_tilde };
        match check_and_extract_b(&a, &hyp) {
            Ok(b) => {
                let (lc, c) = (b.big_c.ln(), b.c);
                bound = Some(Box::new(move |n| lc - c * n as f64));
                summary.bound_b = Some(b);
                summary.status = "bound".into();
            }
            Err(SeqError::Hypothesis(r)) => {
                summary.report = Some(r);
                summary.status = "hypotheses violated".into();
            }
            Err(SeqError::NoAdmissibleN0) => summary.status = "no admissible N0".into(),
            Err(err) => return Err(err.into()),
        }
    }
    let rows: Vec<SeqRow> =
        (1..=a.len()).map(|n| SeqRow { n, log_a: a.log_a(n), log_bound: bound.as_ref().map(|b| b(n)) }).collect();
    Ok(vec![csv_file("seq.csv", &rows)?, json_file("seq.json", &summary)?])
}

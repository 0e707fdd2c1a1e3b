//! Experiment configuration. One TOML document with the tables `norm`,
//! `coupling`, `params`, `region`, `sampler` and `experiment`; every field has
//! an explicit default, and `--print-config` dumps the effective document.

use serde::{Deserialize, Serialize};

use crate::couplings::{normalize, CouplingSpec, PrefactorSpec};
use crate::geometry::{NormFamily, NormSpec};
use crate::mc::SamplerKind;
use crate::region::{Boundary, Cutoff, RCParams, Region};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Wulff,
    Criterion,
    AlphaSat,
    #[serde(alias = "exact-audit")]
    Exact,
    #[serde(alias = "mc-twopoint")]
    Mc,
    Theorem14,
    Theorem17,
    #[serde(alias = "cluster-tail")]
    Tail,
    #[serde(alias = "fN-scan")]
    FnScan,
    #[serde(alias = "saw-cone")]
    Saw,
    #[serde(alias = "seqlab")]
    Seq,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Wulff => "wulff",
            Kind::Criterion => "criterion",
            Kind::AlphaSat => "alpha-sat",
            Kind::Exact => "exact",
            Kind::Mc => "mc",
            Kind::Theorem14 => "theorem14",
            Kind::Theorem17 => "theorem17",
            Kind::Tail => "tail",
            Kind::FnScan => "fn-scan",
            Kind::Saw => "saw",
            Kind::Seq => "seq",
        }
    }

    pub fn stochastic(self) -> bool {
        matches!(self, Kind::Mc | Kind::Theorem14 | Kind::Theorem17 | Kind::Tail | Kind::FnScan)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormConfig {
    /// L1 | L2 | Linf | wlp | poly (case-insensitive)
    pub family: String,
    pub d: usize,
    /// wlp only.
    pub weights: Vec<f64>,
    /// wlp only.
    pub p: f64,
    /// poly only: a symmetric spanning set of Wulff-shape points.
    pub generators: Vec<Vec<f64>>,
}

impl Default for NormConfig {
    fn default() -> Self {
        Self { family: "L1".into(), d: 1, weights: vec![], p: 2.0, generators: vec![] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CouplingConfig {
    /// polynomial | stretched
    pub prefactor: String,
    pub alpha: f64,
    pub ctilde: f64,
    pub eta: f64,
    pub envelope: bool,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        Self { prefactor: "polynomial".into(), alpha: 3.0, ctilde: 1.0, eta: 0.5, envelope: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsConfig {
    pub q: f64,
    pub beta: Vec<f64>,
    /// free | wired
    pub boundary: String,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        Self { q: 1.0, beta: vec![0.2], boundary: "free".into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegionConfig {
    /// segment (d = 1, [a, b]) | box ([−n, n]^d)
    pub shape: String,
    pub a: i64,
    pub b: i64,
    pub n: i64,
    /// none | auto | radius
    pub cutoff: String,
    pub cutoff_value: f64,
}

impl Default for RegionConfig {
    fn default() -> Self {
        Self { shape: "segment".into(), a: -2, b: 2, n: 1, cutoff: "none".into(), cutoff_value: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSection {
    /// Draws (independent sampler) or sweeps (heat-bath) per chain.
    pub samples: u64,
    pub chains: usize,
    /// auto | bernoulli | heatbath
    pub kind: String,
}

impl Default for SamplerSection {
    fn default() -> Self {
        Self { samples: 100_000, chains: 1, kind: "auto".into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    /// Lattice directions (integer vectors).
    pub directions: Vec<Vec<i64>>,
    pub n_list: Vec<i64>,
    pub x_list: Vec<i64>,
    pub alpha_grid: Vec<f64>,
    pub m_list: Vec<u64>,
    pub face_samples: usize,
    pub max_len: usize,
    pub step_radius: f64,
    pub lambda: f64,
    pub epsilon: Vec<f64>,
    /// exp | sqrt-exp | inverse | inverse-square
    pub seq_family: String,
    /// a | b
    pub seq_lemma: String,
    pub seq_len: usize,
    pub seq_m: usize,
    pub seq_alpha: f64,
    pub seq_c1_big: f64,
    pub seq_c2_big: f64,
    pub seq_c1: f64,
    pub seq_eps: f64,
    pub seq_n_tilde: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            directions: vec![vec![1]],
            n_list: vec![1, 2],
            x_list: vec![1, 2],
            alpha_grid: vec![],
            m_list: vec![2, 4, 8, 16],
            face_samples: 5,
            max_len: 3,
            step_radius: 16.0,
            lambda: 0.5,
            epsilon: vec![1e-2, 1e-3, 1e-4],
            seq_family: "exp".into(),
            seq_lemma: "a".into(),
            seq_len: 1000,
            seq_m: 2,
            seq_alpha: 1.0,
            seq_c1_big: 1.0,
            seq_c2_big: 1.0,
            seq_c1: 1.0,
            seq_eps: 0.5,
            seq_n_tilde: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Must match the subcommand when given.
    pub kind: Option<Kind>,
    pub seed: Option<u64>,
    /// Parent of the run directories; `--out` overrides.
    pub output: String,
    pub norm: NormConfig,
    pub coupling: CouplingConfig,
    pub params: ParamsConfig,
    pub region: RegionConfig,
    pub sampler: SamplerSection,
    pub experiment: ExperimentSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: None,
            seed: None,
            output: "results".into(),
            norm: NormConfig::default(),
            coupling: CouplingConfig::default(),
            params: ParamsConfig::default(),
            region: RegionConfig::default(),
            sampler: SamplerSection::default(),
            experiment: ExperimentSection::default(),
        }
    }
}

/// A validation failure with the offending field path.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn err(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { field: field.into(), message: message.into() }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| {
            let span = e.span().map(|s| format!(" (bytes {}..{})", s.start, s.end)).unwrap_or_default();
            err("<document>", format!("{}{span}", e.message()))
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks everything `kind` reads; returns the first failure.
    pub fn validate(&self, kind: Kind) -> Result<(), ConfigError> {
        if let Some(k) = self.kind {
            if k != kind {
                return Err(err("kind", format!("config is for {}, subcommand is {}", k.name(), kind.name())));
            }
        }
        if kind.stochastic() && self.seed.is_none() {
            return Err(err("seed", "required for stochastic experiments"));
        }
        self.norm()?;
        if kind != Kind::Seq {
            self.coupling_spec()?;
        }
        if self.params.beta.is_empty() {
            return Err(err("params.beta", "grid must be non-empty"));
        }
        if self.params.beta.iter().any(|b| !(*b >= 0.0 && b.is_finite())) {
            return Err(err("params.beta", "entries must be finite and >= 0"));
        }
        if !(self.params.q > 0.0) {
            return Err(err("params.q", "must be positive"));
        }
        self.boundary()?;
        let e = &self.experiment;
        let d = self.norm.d;
        if e.directions.is_empty() || e.directions.iter().any(|s| s.len() != d || s.iter().all(|&v| v == 0)) {
            return Err(err("experiment.directions", format!("need nonzero vectors of length {d}")));
        }
        match kind {
            Kind::AlphaSat if e.alpha_grid.len() < 2 => {
                return Err(err("experiment.alpha_grid", "need at least two exponents"));
            }
            Kind::Mc | Kind::Theorem14 | Kind::FnScan if e.n_list.is_empty() || e.n_list.iter().any(|&n| n < 1) => {
                return Err(err("experiment.n_list", "need positive entries"));
            }
            Kind::Theorem17 if e.x_list.is_empty() || e.x_list.iter().any(|&n| n < 1) => {
                return Err(err("experiment.x_list", "need positive entries"));
            }
            Kind::Tail if e.m_list.is_empty() || e.n_list.is_empty() => {
                return Err(err("experiment.m_list", "need M values and a target in n_list"));
            }
            Kind::Saw if e.max_len == 0 || !(e.step_radius >= 1.0) || e.epsilon.is_empty() => {
                return Err(err("experiment", "saw needs max_len >= 1, step_radius >= 1, epsilon non-empty"));
            }
            Kind::Seq => {
                if !matches!(e.seq_family.as_str(), "exp" | "sqrt-exp" | "inverse" | "inverse-square") {
                    return Err(err("experiment.seq_family", "exp | sqrt-exp | inverse | inverse-square"));
                }
                if !matches!(e.seq_lemma.as_str(), "a" | "b") {
                    return Err(err("experiment.seq_lemma", "a | b"));
                }
            }
            _ => {}
        }
        if matches!(kind, Kind::Exact | Kind::Mc | Kind::Tail) {
            let region = self.region_of(&self.coupling_spec()?)?;
            let o = region.point(region.origin).to_vec();
            let n_list = if kind == Kind::Tail { &e.n_list[..1] } else { &e.n_list[..] };
            if kind != Kind::Exact {
                for s in &e.directions {
                    for &n in n_list {
                        let p: Vec<i64> = o.iter().zip(s).map(|(a, c)| a + c * n).collect();
                        if region.index_of(&p).is_none() {
                            return Err(err("experiment.n_list", format!("n = {n} along {s:?} leaves the region")));
                        }
                    }
                }
            }
        }
        if kind.stochastic() {
            if self.sampler.chains == 0 {
                return Err(err("sampler.chains", "must be >= 1"));
            }
            self.sampler_kind()?;
        }
        Ok(())
    }

    pub fn norm(&self) -> Result<NormSpec, ConfigError> {
        let n = &self.norm;
        let fam = match n.family.to_ascii_lowercase().as_str() {
            "l1" => NormFamily::L1,
            "l2" => NormFamily::L2,
            "linf" => NormFamily::Linf,
            "wlp" => NormFamily::WeightedLp { weights: n.weights.clone(), p: n.p },
            "poly" => NormFamily::Polyhedral { generators: n.generators.clone() },
            _ => return Err(err("norm.family", format!("unknown family {:?}", n.family))),
        };
        NormSpec::new(fam, n.d).map_err(|e| err("norm", e.to_string()))
    }

    pub fn prefactor(&self) -> Result<PrefactorSpec, ConfigError> {
        let c = &self.coupling;
        match c.prefactor.as_str() {
            "polynomial" => Ok(PrefactorSpec::polynomial(c.alpha, c.envelope)),
            "stretched" => Ok(PrefactorSpec::stretched(c.ctilde, c.eta, c.envelope)),
            other => Err(err("coupling.prefactor", format!("unknown prefactor {other:?}"))),
        }
    }

    pub fn coupling_spec(&self) -> Result<CouplingSpec, ConfigError> {
        normalize(self.norm()?, self.prefactor()?, None).map_err(|e| err("coupling", e.to_string()))
    }

    pub fn boundary(&self) -> Result<Boundary, ConfigError> {
        match self.params.boundary.as_str() {
            "free" => Ok(Boundary::Free),
            "wired" => Ok(Boundary::Wired),
            other => Err(err("params.boundary", format!("unknown boundary {other:?}"))),
        }
    }

    pub fn rc_params(&self, beta: f64) -> Result<RCParams, ConfigError> {
        RCParams::new(self.params.q, beta, self.boundary()?).map_err(|e| err("params", e.to_string()))
    }

    pub fn cutoff(&self) -> Result<Cutoff, ConfigError> {
        match self.region.cutoff.as_str() {
            "none" => Ok(Cutoff::None),
            "auto" => Ok(Cutoff::Auto(self.region.cutoff_value)),
            "radius" => Ok(Cutoff::Radius(self.region.cutoff_value)),
            other => Err(err("region.cutoff", format!("unknown cutoff {other:?}"))),
        }
    }

    pub fn region_of(&self, spec: &CouplingSpec) -> Result<Region, ConfigError> {
        let r = &self.region;
        let cut = self.cutoff()?;
        match r.shape.as_str() {
            "segment" => Region::segment(spec, r.a, r.b, cut).map_err(|e| err("region", e.to_string())),
            "box" => Region::boxed(spec, r.n, cut).map_err(|e| err("region", e.to_string())),
            other => Err(err("region.shape", format!("unknown shape {other:?}"))),
        }
    }

    pub fn sampler_kind(&self) -> Result<Option<SamplerKind>, ConfigError> {
        match self.sampler.kind.as_str() {
            "auto" => Ok(None),
            "bernoulli" => Ok(Some(SamplerKind::Bernoulli)),
            "heatbath" => Ok(Some(SamplerKind::HeatBath)),
            other => Err(err("sampler.kind", format!("unknown sampler {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = ExperimentConfig::default();
        let back = ExperimentConfig::parse(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_fields_and_values_are_rejected_with_paths() {
        assert!(ExperimentConfig::parse("[norm]\nfamilly = \"l1\"").is_err());
        let c = ExperimentConfig::parse("[norm]\nfamily = \"L7\"").unwrap();
        assert_eq!(c.validate(Kind::Wulff).unwrap_err().field, "norm.family");
        let c = ExperimentConfig::parse("[params]\nbeta = []").unwrap();
        assert_eq!(c.validate(Kind::Exact).unwrap_err().field, "params.beta");
        let c = ExperimentConfig::default();
        assert_eq!(c.validate(Kind::Mc).unwrap_err().field, "seed");
    }
}

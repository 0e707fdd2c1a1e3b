//! Finite-range checkers and constant extractors for two recursive sequence
//! bounds: a squaring recursion a_{mN} ≤ C1 N^α a_N² + C2 e^{−c1 N} that
//! upgrades a sparse stretched-log bound to a_N ≤ C e^{−cN^ν}, and a
//! convolution recursion that upgrades a_N ≤ e^{−N^ε} to a_N ≤ C e^{−cN}.
//!
//! Sequences are held as log a_N for N = 1..=len so that values far below the
//! smallest double stay exact. Every certificate is range-certified: it is
//! asserted for each N in the supplied range and nothing beyond it.

use serde::Serialize;
use thiserror::Error;

/// Slack for comparisons in log space.
pub const LOG_SLACK: f64 = 1e-9;

/// log a_N for N = 1..=len; −∞ encodes a_N = 0.
#[derive(Clone, Debug, PartialEq)]
pub struct Seq {
    logs: Vec<f64>,
}

impl Seq {
    pub fn from_values(a: &[f64]) -> Result<Self, SeqError> {
        if let Some(k) = a.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(SeqError::InvalidValue(k + 1));
        }
        Ok(Self { logs: a.iter().map(|v| v.ln()).collect() })
    }

    pub fn from_logs(logs: Vec<f64>) -> Result<Self, SeqError> {
        if let Some(k) = logs.iter().position(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(SeqError::InvalidValue(k + 1));
        }
        Ok(Self { logs })
    }

    /// Builds log a_N = f(N) for N = 1..=len.
    pub fn from_log_fn(len: usize, f: impl Fn(usize) -> f64) -> Result<Self, SeqError> {
        Self::from_logs((1..=len).map(f).collect())
    }

    pub fn len(&self) -> usize {
        self.logs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logs.is_empty()
    }

    /// log a_N, 1-based.
    #[inline]
    pub fn log_a(&self, n: usize) -> f64 {
        self.logs[n - 1]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum Violation {
    /// a_{n+1} > a_n.
    NotNonIncreasing { n: usize },
    /// The squaring recursion fails at N = n.
    SquaringRecursion { n: usize },
    /// Witness N_k = n violates a_N ≤ e^{−(log N)^{1+ε}}.
    StretchWitness { n: usize },
    /// The convolution recursion fails at N = n.
    ConvolutionRecursion { n: usize },
    /// a_n > e^{−n^ε} for n past the threshold.
    StretchedDecay { n: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeqReport {
    pub clean: bool,
    pub violations: Vec<Violation>,
    /// Largest N the report speaks for.
    pub range: usize,
}

impl SeqReport {
    fn new(violations: Vec<Violation>, range: usize) -> Self {
        Self { clean: violations.is_empty(), violations, range }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeqError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("sequence value at N = {0} is negative or not finite")]
    InvalidValue(usize),
    #[error("sequence too short: {got} < {need}")]
    TooShort { got: usize, need: usize },
    #[error("hypotheses violated ({} violations, first {:?})", .0.violations.len(), .0.violations.first())]
    Hypothesis(SeqReport),
    #[error("no admissible N0 within the range")]
    NoAdmissibleN0,
    #[error("derived bound fails at N = {0}")]
    BoundFailed(usize),
    #[error("replayed induction fails at N = {0}")]
    ReplayFailed(usize),
}

/// log(e^x + e^y) without overflow.
fn log_add(x: f64, y: f64) -> f64 {
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Hypotheses of the squaring recursion.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeqHypA {
    pub m: usize,
    pub alpha: f64,
    pub c1_big: f64,
    pub c2_big: f64,
    pub c1: f64,
    pub eps: f64,
    /// Finite witness list standing in for the increasing subsequence.
    pub witnesses: Vec<usize>,
}

impl SeqHypA {
    fn validate(&self) -> Result<(), SeqError> {
        if self.m < 2 {
            return Err(SeqError::Parameter(format!("m = {} must be >= 2", self.m)));
        }
        if !self.alpha.is_finite() || self.c1_big < 0.0 || self.c2_big < 0.0 || self.c1 <= 0.0 || self.eps <= 0.0 {
            return Err(SeqError::Parameter("need finite alpha, C1, C2 >= 0, c1 > 0, eps > 0".into()));
        }
        if self.witnesses.is_empty() || self.witnesses.windows(2).any(|w| w[0] >= w[1]) || self.witnesses[0] == 0 {
            return Err(SeqError::Parameter("witnesses must be a nonempty increasing list of N >= 1".into()));
        }
        Ok(())
    }
}

/// Checks monotonicity, the squaring recursion at every N with mN in range and
/// the stretched-log bound at every witness in range.
pub fn check_hyp_a(a: &Seq, hyp: &SeqHypA) -> Result<SeqReport, SeqError> {
    hyp.validate()?;
    let len = a.len();
    if len < 10 * hyp.m {
        return Err(SeqError::TooShort { got: len, need: 10 * hyp.m });
    }
    let mut v = Vec::new();
    for n in 1..len {
        if a.log_a(n + 1) > a.log_a(n) + LOG_SLACK {
            v.push(Violation::NotNonIncreasing { n });
        }
    }
    let (lc1, lc2) = (hyp.c1_big.ln(), hyp.c2_big.ln());
    for n in 1..=len / hyp.m {
        let nf = n as f64;
        let rhs = log_add(lc1 + hyp.alpha * nf.ln() + 2.0 * a.log_a(n), lc2 - hyp.c1 * nf);
        if a.log_a(hyp.m * n) > rhs + LOG_SLACK {
            v.push(Violation::SquaringRecursion { n });
        }
    }
    for &n in hyp.witnesses.iter().filter(|&&n| n <= len) {
        let bound = -(n as f64).ln().powf(1.0 + hyp.eps);
        if a.log_a(n) > bound + LOG_SLACK {
            v.push(Violation::StretchWitness { n });
        }
    }
    Ok(SeqReport::new(v, len))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundA {
    pub big_c: f64,
    pub c: f64,
    pub nu: f64,
    pub n0: usize,
    /// Constant with C1 N^α x + C2 e^{−c1 N} ≤ (C3 N)^α' x for x ≥ e^{−c1 N}.
    pub c3: f64,
    pub alpha_used: f64,
    pub range_certified: usize,
}

/// Builds (C, c, ν) with a_N ≤ C e^{−cN^ν}, ν = log 2/log m, by the squaring
/// argument: with ã_N = max(a_N, e^{−c1 N/2}) and b = −log ã, pick the first
/// N0 with b_{N0} ≥ α log(C3 N0 m) + 1 and set c = (m N0)^{−ν}. The doubling
/// b_{m^k N0} ≥ 2^k is replayed and the final bound asserted for every N.
pub fn extract_bound_a(a: &Seq, hyp: &SeqHypA) -> Result<BoundA, SeqError> {
    let report = check_hyp_a(a, hyp)?;
    if !report.clean {
        return Err(SeqError::Hypothesis(report));
    }
    let len = a.len();
    let m = hyp.m;
    // a larger exponent keeps the recursion valid and makes C3 ≥ 1 suffice
    let alpha = hyp.alpha.max(1.0);
    let c3 = (hyp.c1_big + hyp.c2_big).powf(1.0 / alpha).max(1.0);
    let b = |n: usize| -(a.log_a(n).max(-hyp.c1 * n as f64 / 2.0));
    let mf = m as f64;
    let n0 = (1..=len / m)
        .find(|&n| b(n) >= alpha * (c3 * n as f64 * mf).ln() + 1.0)
        .ok_or(SeqError::NoAdmissibleN0)?;
    let mut k = 1u32;
    let mut nk = n0 * m;
    while nk <= len {
        if b(nk) < 2f64.powi(k as i32) - LOG_SLACK {
            return Err(SeqError::ReplayFailed(nk));
        }
        k += 1;
        nk = match nk.checked_mul(m) {
            Some(v) => v,
            None => break,
        };
    }
    let nu = 2f64.ln() / mf.ln();
    let c = (mf * n0 as f64).powf(-nu);
    let log_c = (1..n0).map(|n| a.log_a(n) + c * (n as f64).powf(nu)).fold(0.0, f64::max);
    for n in 1..=len {
        if a.log_a(n) > log_c - c * (n as f64).powf(nu) + LOG_SLACK {
            return Err(SeqError::BoundFailed(n));
        }
    }
    Ok(BoundA { big_c: log_c.exp(), c, nu, n0, c3, alpha_used: alpha, range_certified: len })
}

/// Hypotheses of the convolution recursion.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeqHypB {
    pub c1: f64,
    pub alpha: f64,
    pub eps: f64,
    /// Threshold from which both hypotheses are required.
    pub n_tilde: usize,
}

impl SeqHypB {
    fn validate(&self) -> Result<(), SeqError> {
        if self.c1 <= 0.0 || !self.alpha.is_finite() || self.eps <= 0.0 {
            return Err(SeqError::Parameter("need c1 > 0, finite alpha, eps > 0".into()));
        }
        Ok(())
    }
}

/// ⌈N/3⌉..=⌈2N/3⌉ restricted to N − k ≥ 1.
fn split_range(n: usize) -> std::ops::RangeInclusive<usize> {
    n.div_ceil(3)..=(2 * n).div_ceil(3).min(n - 1)
}

/// Checks a_N ≤ e^{−c1 N} + N^α Σ_k a_k a_{N−k} and a_N ≤ e^{−N^ε} for every
/// N ≥ max(Ñ, 2) in range.
pub fn check_hyp_b(a: &Seq, hyp: &SeqHypB) -> Result<SeqReport, SeqError> {
    hyp.validate()?;
    let len = a.len();
    let mut v = Vec::new();
    for n in hyp.n_tilde.max(2)..=len {
        let nf = n as f64;
        let lhs = a.log_a(n);
        let base = -hyp.c1 * nf;
        if lhs > base + LOG_SLACK {
            // largest products sit at the ends of the split range; stop once covered
            let range = split_range(n);
            let (lo, hi) = (*range.start(), *range.end());
            let mut acc = base;
            let mut ok = false;
            let (mut i, mut j) = (lo, hi);
            while i <= j {
                for k in if i == j { vec![i] } else { vec![i, j] } {
                    acc = log_add(acc, hyp.alpha * nf.ln() + a.log_a(k) + a.log_a(n - k));
                }
                if lhs <= acc + LOG_SLACK {
                    ok = true;
                    break;
                }
                i += 1;
                j -= 1;
            }
            if !ok {
                v.push(Violation::ConvolutionRecursion { n });
            }
        }
        if lhs > -nf.powf(hyp.eps) + LOG_SLACK {
            v.push(Violation::StretchedDecay { n });
        }
    }
    Ok(SeqReport::new(v, len))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundB {
    pub big_c: f64,
    pub c: f64,
    pub n0: usize,
    pub alpha_used: f64,
    pub range_certified: usize,
}

/// Builds (C, c) with a_N ≤ C e^{−cN} by the induction: find N0 ≥ max(2, Ñ)
/// with max_{N0≤k≤3N0} (16k)^{α+1} a_k ≤ e^{−3}/2 and
/// 2(16N)^{α+1} e^{−c1 N} ≤ e^{−N/N0}/2 for all N ≥ N0; then
/// 2(16N)^{α+1} a_N ≤ e^{−N/N0} is replayed for every N ≥ N0 in range and
/// c = 1/N0.
pub fn check_and_extract_b(a: &Seq, hyp: &SeqHypB) -> Result<BoundB, SeqError> {
    let report = check_hyp_b(a, hyp)?;
    if !report.clean {
        return Err(SeqError::Hypothesis(report));
    }
    let len = a.len();
    let alpha = hyp.alpha.max(0.0);
    let ln2 = 2f64.ln();
    let w = |k: usize| (alpha + 1.0) * (16.0 * k as f64).ln() + a.log_a(k);
    let window_cap = -3.0 - ln2;
    // 2(16N)^{α+1}e^{−c1N} ≤ e^{−N/N0}/2 on [N0, ∞): concave in N, so check at
    // the maximiser
    let energy_ok = |n0: usize| {
        let slope = hyp.c1 - 1.0 / n0 as f64;
        if slope <= 0.0 {
            return false;
        }
        let g = |n: f64| 2.0 * ln2 + (alpha + 1.0) * (16.0 * n).ln() - slope * n;
        let star = ((alpha + 1.0) / slope).max(n0 as f64);
        g(star.floor().max(n0 as f64)) <= 0.0 && g(star.ceil()) <= 0.0
    };
    // sliding maximum of w over [N0, 3N0]
    let start = hyp.n_tilde.max(2);
    let mut deque: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
    let mut right = start - 1;
    let mut n0 = None;
    for cand in start..=len / 3 {
        while right < 3 * cand {
            right += 1;
            let wr = w(right);
            while deque.back().is_some_and(|&k| w(k) <= wr) {
                deque.pop_back();
            }
            deque.push_back(right);
        }
        while deque.front().is_some_and(|&k| k < cand) {
            deque.pop_front();
        }
        let wmax = deque.front().map_or(f64::NEG_INFINITY, |&k| w(k));
        if wmax <= window_cap && energy_ok(cand) {
            n0 = Some(cand);
            break;
        }
    }
    let n0 = n0.ok_or(SeqError::NoAdmissibleN0)?;
    let c = 1.0 / n0 as f64;
    for n in n0..=len {
        if ln2 + w(n) > -(n as f64) * c + LOG_SLACK {
            return Err(SeqError::ReplayFailed(n));
        }
    }
    let log_c = (1..n0).map(|n| a.log_a(n) + c * n as f64).fold(-ln2, f64::max);
    for n in 1..=len {
        if a.log_a(n) > log_c - c * n as f64 + LOG_SLACK {
            return Err(SeqError::BoundFailed(n));
        }
    }
    Ok(BoundB { big_c: log_c.exp(), c, n0, alpha_used: alpha, range_certified: len })
}

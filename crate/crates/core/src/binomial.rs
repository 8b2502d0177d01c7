//! Exact one-sided binomial proportion bounds.
//!
//! Everything here rests on a single numerical kernel, [`binom_cdf`], which sums
//! the binomial terms directly. The Clopper-Pearson bounds are found by bisection
//! on that kernel rather than through the Beta-quantile identity, so every bound
//! can be checked against the CDF it was inverted from.

use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

/// Number of trials or observed events.
pub type Count = u64;

/// Bisection stops once the bracket is narrower than this.
pub const ROOT_TOLERANCE: f64 = 1e-12;
/// Hard cap on bisection steps for the probability root.
pub const MAX_ROOT_ITERATIONS: usize = 200;
/// Default upper limit for [`min_sample_size`].
pub const DEFAULT_SAMPLE_CAP: Count = 1_000_000_000;

// 2^600; running sums are renormalised whenever they exceed this.
const RESCALE: f64 = 4.149515568880993e180;
const LN_RESCALE: f64 = 415.888_308_335_967_2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("observed count {k} exceeds number of trials {n}")]
    CountOrder { k: Count, n: Count },
    #[error("number of trials must be at least 1")]
    ZeroTrials,
    #[error("{0} is not a probability in [0, 1]")]
    InvalidProbability(f64),
    #[error("{0} is not a confidence level in (0, 1)")]
    InvalidConfidence(f64),
    #[error("threshold must be positive")]
    NonPositiveThreshold,
}

/// A probability in `[0, 1]`. Construction rejects NaN and out-of-range values.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const ONE: Probability = Probability(1.0);

    pub fn new(value: f64) -> Result<Self, StatsError> {
        if (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(StatsError::InvalidProbability(value))
        }
    }

    /// Clamps into `[0, 1]`; NaN maps to 1 (the pessimistic end).
    pub fn saturating(value: f64) -> Self {
        if value.is_nan() {
            Probability(1.0)
        } else {
            Probability(value.clamp(0.0, 1.0))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Probability {
    type Error = StatsError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Probability::new(value)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// A confidence level strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ConfidenceLevel(f64);

impl ConfidenceLevel {
    pub fn new(value: f64) -> Result<Self, StatsError> {
        if value > 0.0 && value < 1.0 {
            Ok(ConfidenceLevel(value))
        } else {
            Err(StatsError::InvalidConfidence(value))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// Tail mass `1 - cl`.
    #[inline]
    pub fn alpha(self) -> f64 {
        1.0 - self.0
    }

    /// Splits the tail mass uniformly over `parts` simultaneous statements.
    pub fn bonferroni(self, parts: usize) -> ConfidenceLevel {
        if parts <= 1 {
            return self;
        }
        ConfidenceLevel(1.0 - self.alpha() / parts as f64)
    }
}

impl TryFrom<f64> for ConfidenceLevel {
    type Error = StatsError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        ConfidenceLevel::new(value)
    }
}

impl From<ConfidenceLevel> for f64 {
    fn from(c: ConfidenceLevel) -> f64 {
        c.0
    }
}

impl fmt::Display for ConfidenceLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

fn check_counts(k: Count, n: Count) -> Result<(), StatsError> {
    if n == 0 {
        return Err(StatsError::ZeroTrials);
    }
    if k > n {
        return Err(StatsError::CountOrder { k, n });
    }
    Ok(())
}

/// `P(X <= k)` for `X ~ Binomial(n, p)`.
///
/// Terms are accumulated through the ratio recurrence
/// `t(i+1) = t(i) * (n - i) / (i + 1) * p / (1 - p)` starting from `t(0) = 1`,
/// with `(1 - p)^n` carried as a log-domain scale so neither end underflows.
pub fn binom_cdf(k: Count, n: Count, p: Probability) -> Result<Probability, StatsError> {
    check_counts(k, n)?;
    Ok(Probability(cdf_unchecked(k, n, p.value())))
}

pub(crate) fn cdf_unchecked(k: Count, n: Count, p: f64) -> f64 {
    if k >= n || p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    let q = 1.0 - p;
    let odds = p / q;
    let nf = n as f64;
    let mut log_scale = nf * (-p).ln_1p();
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    for i in 0..k {
        let fi = i as f64;
        term *= (nf - fi) / (fi + 1.0) * odds;
        sum += term;
        if sum > RESCALE {
            sum /= RESCALE;
            term /= RESCALE;
            log_scale += LN_RESCALE;
        }
    }
    (log_scale + sum.ln()).exp().min(1.0)
}

/// Exact one-sided Clopper-Pearson upper bound: the smallest `p` with
/// `binom_cdf(k, n, p) <= 1 - cl`.
pub fn cp_upper(k: Count, n: Count, cl: ConfidenceLevel) -> Result<Probability, StatsError> {
    check_counts(k, n)?;
    Ok(Probability(upper_unchecked(k, n, cl.alpha())))
}

fn upper_unchecked(k: Count, n: Count, alpha: f64) -> f64 {
    if k == n {
        return 1.0;
    }
    // cdf(k, n, 0) = 1 > alpha and cdf(k, n, 1) = 0 <= alpha, so [0, 1] brackets.
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..MAX_ROOT_ITERATIONS {
        if hi - lo <= ROOT_TOLERANCE {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if cdf_unchecked(k, n, mid) <= alpha {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Exact one-sided Clopper-Pearson lower bound, computed through the duality
/// `cp_lower(k, n, cl) = 1 - cp_upper(n - k, n, cl)`.
pub fn cp_lower(k: Count, n: Count, cl: ConfidenceLevel) -> Result<Probability, StatsError> {
    check_counts(k, n)?;
    if k == 0 {
        return Ok(Probability::ZERO);
    }
    Ok(Probability::saturating(1.0 - upper_unchecked(n - k, n, cl.alpha())))
}

/// Largest `k` with `cp_upper(k, n, cl) <= threshold`, or `None` when even a
/// failure-free campaign of size `n` cannot demonstrate the threshold.
pub fn max_acceptable_failures(
    n: Count,
    cl: ConfidenceLevel,
    threshold: Probability,
) -> Result<Option<Count>, StatsError> {
    if n == 0 {
        return Err(StatsError::ZeroTrials);
    }
    if threshold.value() <= 0.0 {
        return Err(StatsError::NonPositiveThreshold);
    }
    let alpha = cl.alpha();
    let t = threshold.value();
    let ok = |k: Count| upper_unchecked(k, n, alpha) <= t;
    if !ok(0) {
        return Ok(None);
    }
    // Gallop from 0 to bracket the boundary, then bisect. cp_upper is strictly
    // increasing in k, so the predicate flips exactly once.
    let mut good: Count = 0;
    let mut step: Count = 1;
    let mut bad = loop {
        let cand = good.saturating_add(step).min(n);
        if ok(cand) {
            good = cand;
            if cand == n {
                return Ok(Some(n));
            }
            step = step.saturating_mul(2);
        } else {
            break cand;
        }
    };
    while bad - good > 1 {
        let mid = good + (bad - good) / 2;
        if ok(mid) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    Ok(Some(good))
}

/// Smallest campaign size `n` whose expected outcome `round(rate * n)` would
/// still demonstrate `threshold`.
///
/// The predicate is not strictly monotone in `n` because of the rounding, so
/// the result is a boundary point: it passes and `n - 1` fails.
pub fn min_sample_size(
    expected_rate: Probability,
    cl: ConfidenceLevel,
    threshold: Probability,
    cap: Count,
) -> Result<Option<Count>, StatsError> {
    if threshold.value() <= 0.0 {
        return Err(StatsError::NonPositiveThreshold);
    }
    if expected_rate.value() >= threshold.value() {
        return Ok(None);
    }
    let alpha = cl.alpha();
    let t = threshold.value();
    let rate = expected_rate.value();
    let ok = |n: Count| {
        let k = ((rate * n as f64).round() as Count).min(n);
        upper_unchecked(k, n, alpha) <= t
    };
    if ok(1) {
        return Ok(Some(1));
    }
    let mut bad = 1;
    let mut good = 2;
    while !ok(good) {
        if good >= cap {
            return Ok(None);
        }
        bad = good;
        good = good.saturating_mul(2).min(cap);
    }
    while good - bad > 1 {
        let mid = bad + (good - bad) / 2;
        if ok(mid) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    Ok(Some(good))
}

/// Interval construction used to turn counts into bounds.
///
/// Only Clopper-Pearson carries a coverage guarantee; the other two exist for
/// comparison and are flagged non-conservative wherever they are reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntervalMethod {
    #[default]
    ClopperPearson,
    Wilson,
    Normal,
}

impl IntervalMethod {
    pub fn is_conservative(self) -> bool {
        matches!(self, IntervalMethod::ClopperPearson)
    }

    pub fn upper(self, k: Count, n: Count, cl: ConfidenceLevel) -> Result<Probability, StatsError> {
        match self {
            IntervalMethod::ClopperPearson => cp_upper(k, n, cl),
            IntervalMethod::Wilson => {
                check_counts(k, n)?;
                Ok(wilson(k, n, cl, 1.0))
            }
            IntervalMethod::Normal => {
                check_counts(k, n)?;
                Ok(wald(k, n, cl, 1.0))
            }
        }
    }

    pub fn lower(self, k: Count, n: Count, cl: ConfidenceLevel) -> Result<Probability, StatsError> {
        match self {
            IntervalMethod::ClopperPearson => cp_lower(k, n, cl),
            IntervalMethod::Wilson => {
                check_counts(k, n)?;
                Ok(wilson(k, n, cl, -1.0))
            }
            IntervalMethod::Normal => {
                check_counts(k, n)?;
                Ok(wald(k, n, cl, -1.0))
            }
        }
    }
}

impl fmt::Display for IntervalMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IntervalMethod::ClopperPearson => "clopper-pearson",
            IntervalMethod::Wilson => "wilson",
            IntervalMethod::Normal => "normal",
        })
    }
}

fn one_sided_z(cl: ConfidenceLevel) -> f64 {
    Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(cl.value())
}

fn wilson(k: Count, n: Count, cl: ConfidenceLevel, sign: f64) -> Probability {
    let z = one_sided_z(cl);
    let nf = n as f64;
    let phat = k as f64 / nf;
    let z2 = z * z;
    let centre = phat + z2 / (2.0 * nf);
    let spread = z * (phat * (1.0 - phat) / nf + z2 / (4.0 * nf * nf)).sqrt();
    Probability::saturating((centre + sign * spread) / (1.0 + z2 / nf))
}

fn wald(k: Count, n: Count, cl: ConfidenceLevel, sign: f64) -> Probability {
    let z = one_sided_z(cl);
    let nf = n as f64;
    let phat = k as f64 / nf;
    Probability::saturating(phat + sign * z * (phat * (1.0 - phat) / nf).sqrt())
}

//! The bound calculus.
//!
//! Every case is evaluated through one formula,
//!
//! ```text
//! p_safe_upper = (u_test + p_lf) * (1 - p_oos - l_detect_srf) + p_oos * (1 - p_detect_oos)
//! ```
//!
//! with the terms that a case does not claim set to zero: no scope term under
//! the closed-scope assumption (case B), no detection credit without detection
//! evidence (B, C), no out-of-scope detection credit outside case E, and no
//! label penalty unless labeling faults are declared (the F flag).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::binomial::{
    self, ConfidenceLevel, Count, Probability, StatsError, DEFAULT_SAMPLE_CAP,
};
use crate::evidence::{
    self, CaseBundle, EvidenceError, ResolveOptions, ResolvedEstimates, SafetyTarget,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BaseCase {
    /// Statistical testing only, closed scope.
    B,
    /// Testing plus out-of-scope probability.
    C,
    /// Adds runtime detection of safety-related failures.
    D,
    /// Adds runtime out-of-scope detection.
    E,
}

/// Which combination of evidence a bound is argued from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct CaseId {
    pub base: BaseCase,
    /// Labeling faults are folded into the test bound.
    pub label_adjusted: bool,
}

impl CaseId {
    pub const fn new(base: BaseCase, label_adjusted: bool) -> Self {
        CaseId {
            base,
            label_adjusted,
        }
    }

    fn claims_scope(self) -> bool {
        self.base >= BaseCase::C
    }

    fn claims_srf_detection(self) -> bool {
        self.base >= BaseCase::D
    }

    fn claims_oos_detection(self) -> bool {
        self.base == BaseCase::E
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.base)?;
        if self.label_adjusted {
            f.write_str("+F")?;
        }
        Ok(())
    }
}

impl FromStr for CaseId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.trim().to_ascii_uppercase();
        let (base, label_adjusted) = match upper.strip_suffix("+F") {
            Some(rest) => (rest, true),
            None => (upper.as_str(), false),
        };
        let base = match base {
            "B" => BaseCase::B,
            "C" => BaseCase::C,
            "D" => BaseCase::D,
            "E" => BaseCase::E,
            _ => return Err(format!("unknown case `{s}` (expected B, C, D or E, optionally +F)")),
        };
        Ok(CaseId::new(base, label_adjusted))
    }
}

impl From<CaseId> for String {
    fn from(c: CaseId) -> String {
        c.to_string()
    }
}

impl TryFrom<String> for CaseId {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Classifies a valid bundle by the evidence it declares.
pub fn applicable_case(bundle: &CaseBundle) -> CaseId {
    let base = if bundle.detect_oos.is_some() {
        BaseCase::E
    } else if bundle.detect_srf.is_some() {
        BaseCase::D
    } else if bundle.scope.is_some() {
        BaseCase::C
    } else {
        BaseCase::B
    };
    CaseId::new(base, bundle.labels.is_some())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ViolationCode {
    #[serde(rename = "V_PREPOSITION")]
    Preposition,
    #[serde(rename = "V_DENOMINATOR")]
    Denominator,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::Preposition => "V_PREPOSITION",
            ViolationCode::Denominator => "V_DENOMINATOR",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub p_oos: f64,
    pub l_detect_srf: f64,
    pub message: String,
}

/// The estimates a case actually uses, after zeroing unclaimed terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseInputs {
    pub u_test: f64,
    pub l_detect_srf: f64,
    pub p_oos: f64,
    pub p_detect_oos: f64,
    pub p_lf: f64,
}

impl CaseInputs {
    pub fn select(r: &ResolvedEstimates, case: CaseId) -> Self {
        let pick = |claimed: bool, p: Probability| if claimed { p.value() } else { 0.0 };
        CaseInputs {
            u_test: r.u_test.value(),
            l_detect_srf: pick(case.claims_srf_detection(), r.l_detect_srf),
            p_oos: pick(case.claims_scope(), r.p_oos),
            p_detect_oos: pick(case.claims_oos_detection(), r.p_detect_oos),
            p_lf: pick(case.label_adjusted, r.p_lf),
        }
    }

    /// `1 - p_oos - l_detect_srf`, the share of the test bound that survives.
    pub fn denominator(&self) -> f64 {
        1.0 - self.p_oos - self.l_detect_srf
    }

    /// Residual contribution of out-of-scope operation.
    pub fn scope_floor(&self) -> f64 {
        self.p_oos * (1.0 - self.p_detect_oos)
    }

    pub fn terms(&self) -> BoundTerms {
        BoundTerms {
            test_term: self.u_test * (1.0 - self.p_oos),
            scope_term: self.p_oos,
            srf_detect_credit: self.u_test * self.l_detect_srf,
            oos_detect_credit: self.p_oos * self.p_detect_oos,
            label_penalty: self.p_lf * self.denominator(),
        }
    }

    /// The unclipped bound in its factored form.
    pub fn bound(&self) -> f64 {
        (self.u_test + self.p_lf) * self.denominator() + self.scope_floor()
    }
}

pub fn check_prepositions(r: &ResolvedEstimates, case: CaseId) -> Vec<Violation> {
    preposition_violations(&CaseInputs::select(r, case), case)
}

fn preposition_violations(x: &CaseInputs, case: CaseId) -> Vec<Violation> {
    let mut out = Vec::new();
    if case.claims_srf_detection() && !(1.0 - x.p_oos >= x.l_detect_srf) {
        out.push(Violation {
            code: ViolationCode::Preposition,
            p_oos: x.p_oos,
            l_detect_srf: x.l_detect_srf,
            message: format!(
                "1 - p_oos = {} is below the SRF detection bound {}",
                1.0 - x.p_oos,
                x.l_detect_srf
            ),
        });
    }
    let denom = x.denominator();
    if !(denom > 0.0) {
        out.push(Violation {
            code: ViolationCode::Denominator,
            p_oos: x.p_oos,
            l_detect_srf: x.l_detect_srf,
            message: format!("1 - p_oos - l_detect_srf = {denom} is not positive"),
        });
    }
    out
}

/// Additive breakdown of the bound:
/// `test_term + label_penalty - srf_detect_credit + scope_term - oos_detect_credit`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundTerms {
    pub test_term: f64,
    pub scope_term: f64,
    pub srf_detect_credit: f64,
    pub oos_detect_credit: f64,
    pub label_penalty: f64,
}

impl BoundTerms {
    pub fn total(&self) -> f64 {
        self.test_term + self.label_penalty - self.srf_detect_credit + self.scope_term
            - self.oos_detect_credit
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Satisfied,
    NotSatisfied,
    Infeasible,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Satisfied => "satisfied",
            Verdict::NotSatisfied => "not_satisfied",
            Verdict::Infeasible => "infeasible",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub case: CaseId,
    pub p_target: f64,
    /// Upper bound on the probability of a component-caused safety violation,
    /// clipped to `[0, 1]`.
    pub p_safe_upper: f64,
    pub unclipped: f64,
    pub terms: BoundTerms,
    pub preposition_status: Vec<Violation>,
    pub verdict: Verdict,
    /// `p_target - p_safe_upper`.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BudgetError {
    #[error("E_DENOMINATOR: 1 - p_oos - l_detect_srf = {denominator} (p_oos = {p_oos}, l_detect_srf = {l_detect_srf})")]
    Denominator {
        denominator: f64,
        p_oos: f64,
        l_detect_srf: f64,
    },
    #[error("E_SWEEP_DOMAIN: {0}")]
    SweepDomain(String),
    #[error(transparent)]
    Evidence(#[from] EvidenceError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

pub fn evaluate_bound(
    r: &ResolvedEstimates,
    case: CaseId,
    target: &SafetyTarget,
) -> Result<BoundReport, BudgetError> {
    let x = CaseInputs::select(r, case);
    let denominator = x.denominator();
    if denominator < 0.0 {
        return Err(BudgetError::Denominator {
            denominator,
            p_oos: x.p_oos,
            l_detect_srf: x.l_detect_srf,
        });
    }
    let violations = preposition_violations(&x, case);
    let unclipped = x.bound();
    let p_safe_upper = unclipped.clamp(0.0, 1.0);
    let p_target = target.p_target.value();
    let verdict = if !violations.is_empty() {
        Verdict::Infeasible
    } else if p_safe_upper <= p_target {
        Verdict::Satisfied
    } else {
        Verdict::NotSatisfied
    };
    Ok(BoundReport {
        case,
        p_target,
        p_safe_upper,
        unclipped,
        terms: x.terms(),
        preposition_status: violations,
        verdict,
        margin: p_target - p_safe_upper,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Infeasibility {
    /// The residual out-of-scope contribution alone reaches the target.
    ScopeFloor,
    /// The budget left after scope is used up by labeling faults.
    LabelFaults,
    /// Not even a failure-free campaign of the given size demonstrates the bound.
    NotDemonstrable,
    /// The expected failure rate is not below the required bound.
    RateAboveThreshold,
    /// No campaign below the sample cap demonstrates the bound.
    SampleCap,
    /// The detection credit and scope share leave no room for the test bound.
    Denominator,
}

impl Infeasibility {
    pub fn describe(self) -> &'static str {
        match self {
            Infeasibility::ScopeFloor => "target below scope floor",
            Infeasibility::LabelFaults => "label faults consume budget",
            Infeasibility::NotDemonstrable => "sample size too small to demonstrate the bound",
            Infeasibility::RateAboveThreshold => "expected failure rate not below the required bound",
            Infeasibility::SampleCap => "no sample size below the cap demonstrates the bound",
            Infeasibility::Denominator => "non-positive denominator",
        }
    }
}

impl fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.describe())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Solved<T> {
    Feasible { value: T },
    Infeasible { reason: Infeasibility },
}

impl<T: Copy> Solved<T> {
    pub fn value(&self) -> Option<T> {
        match self {
            Solved::Feasible { value } => Some(*value),
            Solved::Infeasible { .. } => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, Solved::Feasible { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DeriveOptions {
    /// Campaign size for which the acceptable failure count is computed.
    pub samples: Option<Count>,
    /// Expected failure rate for sample-size planning.
    pub expected_rate: Option<Probability>,
    pub sample_cap: Option<Count>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivationResult {
    pub case: CaseId,
    pub p_target: f64,
    /// Largest admissible upper bound on the test failure rate.
    pub required_u_test: Solved<f64>,
    /// The same bound before subtracting the labeling-fault rate.
    pub required_before_labels: f64,
    pub confidence: ConfidenceLevel,
    pub samples: Option<Count>,
    pub max_failures: Option<Solved<Count>>,
    pub expected_rate: Option<f64>,
    pub min_samples: Option<Solved<Count>>,
}

/// Inverts the bound: the largest test bound that still meets the target.
/// `r.u_test` is ignored.
pub fn derive_required_test_bound(
    r: &ResolvedEstimates,
    case: CaseId,
    target: &SafetyTarget,
    opts: &DeriveOptions,
) -> Result<DerivationResult, BudgetError> {
    let x = CaseInputs::select(r, case);
    let denominator = x.denominator();
    if !(denominator > 0.0) {
        return Err(BudgetError::Denominator {
            denominator,
            p_oos: x.p_oos,
            l_detect_srf: x.l_detect_srf,
        });
    }
    let p_target = target.p_target.value();
    let numerator = p_target - x.scope_floor();
    let before_labels = numerator / denominator;
    let required = before_labels - x.p_lf;
    let required_u_test = if numerator <= 0.0 {
        Solved::Infeasible {
            reason: Infeasibility::ScopeFloor,
        }
    } else if required <= 0.0 {
        Solved::Infeasible {
            reason: Infeasibility::LabelFaults,
        }
    } else {
        Solved::Feasible { value: required }
    };

    let cl = r.cl_effective.test;
    let threshold = required_u_test.value().map(Probability::saturating);

    let max_failures = match (opts.samples, threshold) {
        (Some(n), Some(t)) => Some(match binomial::max_acceptable_failures(n, cl, t)? {
            Some(k) => Solved::Feasible { value: k },
            None => Solved::Infeasible {
                reason: Infeasibility::NotDemonstrable,
            },
        }),
        (Some(_), None) => required_u_test_failure(&required_u_test),
        (None, _) => None,
    };

    let min_samples = match (opts.expected_rate, threshold) {
        (Some(rate), Some(t)) => {
            let cap = opts.sample_cap.unwrap_or(DEFAULT_SAMPLE_CAP);
            Some(if rate.value() >= t.value() {
                Solved::Infeasible {
                    reason: Infeasibility::RateAboveThreshold,
                }
            } else {
                match binomial::min_sample_size(rate, cl, t, cap)? {
                    Some(n) => Solved::Feasible { value: n },
                    None => Solved::Infeasible {
                        reason: Infeasibility::SampleCap,
                    },
                }
            })
        }
        (Some(_), None) => required_u_test_failure(&required_u_test),
        (None, _) => None,
    };

    Ok(DerivationResult {
        case,
        p_target,
        required_u_test,
        required_before_labels: before_labels,
        confidence: cl,
        samples: opts.samples,
        max_failures,
        expected_rate: opts.expected_rate.map(Probability::value),
        min_samples,
    })
}

fn required_u_test_failure(required: &Solved<f64>) -> Option<Solved<Count>> {
    match required {
        Solved::Infeasible { reason } => Some(Solved::Infeasible { reason: *reason }),
        Solved::Feasible { .. } => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    POos,
    PDetectSrf,
    PDetectOos,
    PLf,
    Samples,
    Failures,
    Cl,
}

impl SweepParam {
    pub const ALL: [SweepParam; 7] = [
        SweepParam::POos,
        SweepParam::PDetectSrf,
        SweepParam::PDetectOos,
        SweepParam::PLf,
        SweepParam::Samples,
        SweepParam::Failures,
        SweepParam::Cl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::POos => "p_oos",
            SweepParam::PDetectSrf => "p_detect_srf",
            SweepParam::PDetectOos => "p_detect_oos",
            SweepParam::PLf => "p_lf",
            SweepParam::Samples => "samples",
            SweepParam::Failures => "failures",
            SweepParam::Cl => "cl",
        }
    }

    fn is_count(self) -> bool {
        matches!(self, SweepParam::Samples | SweepParam::Failures)
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SweepParam::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = SweepParam::ALL.iter().map(|p| p.name()).collect();
                format!("unknown parameter `{s}` (expected one of {})", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: SweepParam,
    pub value: f64,
    pub p_safe_upper: Option<f64>,
    pub required_u_test: Solved<f64>,
    pub max_failures: Solved<Count>,
    pub verdict: Verdict,
    pub violation: Option<ViolationCode>,
}

impl SweepSpec {
    fn check_domain(&self, bundle: &CaseBundle) -> Result<(), BudgetError> {
        let bad = |msg: String| Err(BudgetError::SweepDomain(msg));
        if self.steps < 2 {
            return bad(format!("need at least 2 steps, got {}", self.steps));
        }
        if !(self.from.is_finite() && self.to.is_finite()) {
            return bad("sweep bounds must be finite".into());
        }
        if !(self.from < self.to) {
            return bad(format!(
                "sweep range must satisfy from < to, got [{}, {}]",
                self.from, self.to
            ));
        }
        let (lo, hi, hi_open) = match self.param {
            SweepParam::PDetectSrf | SweepParam::PDetectOos => (0.0, 1.0, false),
            SweepParam::POos | SweepParam::PLf => (0.0, 1.0, true),
            SweepParam::Cl => {
                if self.from <= 0.0 {
                    return bad("confidence level must stay above 0".into());
                }
                (0.0, 1.0, true)
            }
            SweepParam::Samples => (bundle.test.failures.max(1) as f64, f64::MAX, false),
            SweepParam::Failures => (0.0, bundle.test.samples as f64, false),
        };
        let above = if hi_open { self.to >= hi } else { self.to > hi };
        if self.from < lo || above {
            return bad(format!(
                "{} range [{}, {}] leaves its domain",
                self.param, self.from, self.to
            ));
        }
        Ok(())
    }

    /// Sweep points, in order. Count parameters are rounded to integers.
    pub fn values(&self) -> Vec<f64> {
        let span = self.to - self.from;
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                let v = if i + 1 == self.steps {
                    self.to
                } else {
                    self.from + span * i as f64 / last
                };
                if self.param.is_count() {
                    v.round()
                } else {
                    v
                }
            })
            .collect()
    }
}

/// Re-resolves and re-evaluates the bundle at each sweep point.
///
/// Probability parameters override the resolved estimate directly and lift
/// the case so the overridden term is claimed; count and confidence
/// parameters are substituted into the bundle before resolution.
pub fn sensitivity_sweep(
    bundle: &CaseBundle,
    opts: &ResolveOptions,
    spec: &SweepSpec,
) -> Result<Vec<SweepRow>, BudgetError> {
    let errs = evidence::validate_bundle(bundle);
    if !errs.is_empty() {
        return Err(EvidenceError::Invalid(errs).into());
    }
    spec.check_domain(bundle)?;
    let base_case = applicable_case(bundle);

    spec.values()
        .into_iter()
        .map(|value| sweep_row(bundle, opts, spec.param, value, base_case))
        .collect()
}

fn sweep_row(
    bundle: &CaseBundle,
    opts: &ResolveOptions,
    param: SweepParam,
    value: f64,
    base_case: CaseId,
) -> Result<SweepRow, BudgetError> {
    let mut b = bundle.clone();
    let mut case = base_case;
    match param {
        SweepParam::Samples => b.test.samples = value as Count,
        SweepParam::Failures => b.test.failures = value as Count,
        SweepParam::Cl => b.target.confidence = ConfidenceLevel::new(value)?,
        _ => {}
    }
    let mut r = evidence::resolve_with(&b, opts)?;
    let p = Probability::new(value);
    match param {
        SweepParam::POos => {
            r.p_oos = p?;
            case.base = case.base.max(BaseCase::C);
        }
        SweepParam::PDetectSrf => {
            r.l_detect_srf = p?;
            case.base = case.base.max(BaseCase::D);
        }
        SweepParam::PDetectOos => {
            r.p_detect_oos = p?;
            case.base = case.base.max(BaseCase::E);
        }
        SweepParam::PLf => {
            r.p_lf = p?;
            case.label_adjusted = true;
        }
        _ => {}
    }

    let denominator_row = || SweepRow {
        param,
        value,
        p_safe_upper: None,
        required_u_test: Solved::Infeasible {
            reason: Infeasibility::Denominator,
        },
        max_failures: Solved::Infeasible {
            reason: Infeasibility::Denominator,
        },
        verdict: Verdict::Infeasible,
        violation: Some(ViolationCode::Denominator),
    };

    let report = match evaluate_bound(&r, case, &b.target) {
        Ok(rep) => rep,
        Err(BudgetError::Denominator { .. }) => return Ok(denominator_row()),
        Err(e) => return Err(e),
    };
    let derivation = match derive_required_test_bound(
        &r,
        case,
        &b.target,
        &DeriveOptions {
            samples: Some(b.test.samples),
            ..Default::default()
        },
    ) {
        Ok(d) => d,
        Err(BudgetError::Denominator { .. }) => return Ok(denominator_row()),
        Err(e) => return Err(e),
    };
    Ok(SweepRow {
        param,
        value,
        p_safe_upper: Some(report.p_safe_upper),
        required_u_test: derivation.required_u_test,
        max_failures: derivation
            .max_failures
            .expect("samples were supplied to the derivation"),
        verdict: report.verdict,
        violation: report.preposition_status.first().map(|v| v.code),
    })
}

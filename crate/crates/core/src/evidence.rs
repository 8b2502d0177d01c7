//! Declared evidence and assumptions, their validation, and their resolution
//! into confidence-bounded estimates.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::binomial::{ConfidenceLevel, Count, IntervalMethod, Probability, StatsError};

/// Assumption token declaring that the component is never used outside its
/// target application scope.
pub const CLOSED_SCOPE: &str = "no-out-of-scope-operation";
/// Assumption token: the test data was not used during development.
pub const DATASET_UNSEEN: &str = "dataset-unseen";
/// Assumption token: the test data is representative of the application scope.
pub const DATASET_REPRESENTATIVE: &str = "dataset-representative";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyTarget {
    pub p_target: Probability,
    pub confidence: ConfidenceLevel,
}

/// Outcome of the statistical test campaign on the safety-relevant test set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestEvidence {
    pub samples: Count,
    pub failures: Count,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelQuality {
    /// Declared labeling-fault rate, taken at face value.
    Rate(Probability),
    /// Relabeling audit: `disagreements` out of `audited` labels were wrong.
    Audit { disagreements: Count, audited: Count },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Expert,
    Data,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Expert => "expert",
            Provenance::Data => "data",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Source {
    pub provenance: Provenance,
    pub justification: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub hours: f64,
    pub p_oos: Probability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScopeForm {
    Point(Probability),
    /// Out-of-scope probability as a non-decreasing step function of mission time.
    Profile(Vec<ProfilePoint>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScopeEvidence {
    pub form: ScopeForm,
    pub source: Option<Source>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectionKind {
    Srf,
    Oos,
}

impl fmt::Display for DetectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DetectionKind::Srf => "srf",
            DetectionKind::Oos => "oos",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionForm {
    Campaign { detected: Count, total: Count },
    Point(Probability),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvidence {
    pub kind: DetectionKind,
    pub form: DetectionForm,
    pub source: Option<Source>,
}

/// The full evidence set declared for one assurance case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseBundle {
    pub id: String,
    pub target: SafetyTarget,
    pub mission_time: Option<f64>,
    pub scope: Option<ScopeEvidence>,
    pub test: TestEvidence,
    pub detect_srf: Option<DetectionEvidence>,
    pub detect_oos: Option<DetectionEvidence>,
    pub labels: Option<LabelQuality>,
    pub assumptions: Vec<String>,
}

impl CaseBundle {
    /// A bundle with only a target and a test campaign, operated under the
    /// closed-scope assumption.
    pub fn minimal(id: impl Into<String>, target: SafetyTarget, test: TestEvidence) -> Self {
        CaseBundle {
            id: id.into(),
            target,
            mission_time: None,
            scope: None,
            test,
            detect_srf: None,
            detect_oos: None,
            labels: None,
            assumptions: vec![CLOSED_SCOPE.to_string()],
        }
    }

    pub fn assumes(&self, token: &str) -> bool {
        self.assumptions.iter().any(|a| a == token)
    }

    pub fn closed_scope(&self) -> bool {
        self.assumes(CLOSED_SCOPE)
    }
}

/// How the confidence level is shared among simultaneously used bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfidenceMode {
    /// Every statistical bound is taken at the target confidence level.
    #[default]
    PaperFaithful,
    /// The tail mass is split evenly across the statistical bounds in use.
    Bonferroni,
}

impl fmt::Display for ConfidenceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConfidenceMode::PaperFaithful => "paper",
            ConfidenceMode::Bonferroni => "bonferroni",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorCode {
    #[serde(rename = "E_SCOPE_REQUIRED")]
    ScopeRequired,
    #[serde(rename = "E_CLOSED_SCOPE_REQUIRED")]
    ClosedScopeRequired,
    #[serde(rename = "E_SCOPE_CONFLICT")]
    ScopeConflict,
    #[serde(rename = "E_COUNT_ORDER")]
    CountOrder,
    #[serde(rename = "E_ZERO_SAMPLES")]
    ZeroSamples,
    #[serde(rename = "E_TARGET_RANGE")]
    TargetRange,
    #[serde(rename = "E_RATE_RANGE")]
    RateRange,
    #[serde(rename = "E_SCOPE_RANGE")]
    ScopeRange,
    #[serde(rename = "E_PROFILE_EMPTY")]
    ProfileEmpty,
    #[serde(rename = "E_PROFILE_ORDER")]
    ProfileOrder,
    #[serde(rename = "E_PROFILE_MONOTONE")]
    ProfileMonotone,
    #[serde(rename = "E_MISSION_TIME_REQUIRED")]
    MissionTimeRequired,
    #[serde(rename = "E_MISSION_TIME_RANGE")]
    MissionTimeRange,
    #[serde(rename = "E_TIME_BEFORE_PROFILE")]
    TimeBeforeProfile,
    #[serde(rename = "E_OOS_CAMPAIGN")]
    OosCampaign,
    #[serde(rename = "E_KIND_MISMATCH")]
    KindMismatch,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::ScopeRequired => "E_SCOPE_REQUIRED",
            ErrorCode::ClosedScopeRequired => "E_CLOSED_SCOPE_REQUIRED",
            ErrorCode::ScopeConflict => "E_SCOPE_CONFLICT",
            ErrorCode::CountOrder => "E_COUNT_ORDER",
            ErrorCode::ZeroSamples => "E_ZERO_SAMPLES",
            ErrorCode::TargetRange => "E_TARGET_RANGE",
            ErrorCode::RateRange => "E_RATE_RANGE",
            ErrorCode::ScopeRange => "E_SCOPE_RANGE",
            ErrorCode::ProfileEmpty => "E_PROFILE_EMPTY",
            ErrorCode::ProfileOrder => "E_PROFILE_ORDER",
            ErrorCode::ProfileMonotone => "E_PROFILE_MONOTONE",
            ErrorCode::MissionTimeRequired => "E_MISSION_TIME_REQUIRED",
            ErrorCode::MissionTimeRange => "E_MISSION_TIME_RANGE",
            ErrorCode::TimeBeforeProfile => "E_TIME_BEFORE_PROFILE",
            ErrorCode::OosCampaign => "E_OOS_CAMPAIGN",
            ErrorCode::KindMismatch => "E_KIND_MISMATCH",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Names a location inside a bundle so that front ends can map a semantic
/// error back to source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Field {
    PTarget,
    Confidence,
    MissionTime,
    Scope,
    ScopePoint,
    ProfilePoint(usize),
    Samples,
    Failures,
    Detection(DetectionKind),
    DetectionPoint(DetectionKind),
    DetectionObserved(DetectionKind),
    LabelsRate,
    LabelsAudit,
    Assumption(usize),
    /// End of the case body, used for missing items.
    CaseEnd,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemanticError {
    pub code: ErrorCode,
    pub message: String,
    /// Fields involved in the violation; the error belongs to the last of them
    /// in source order.
    #[serde(skip)]
    pub fields: Vec<Field>,
}

impl SemanticError {
    fn new(code: ErrorCode, fields: &[Field], message: impl Into<String>) -> Self {
        SemanticError {
            code,
            message: message.into(),
            fields: fields.to_vec(),
        }
    }
}

impl fmt::Display for SemanticError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvidenceError {
    #[error("bundle is invalid: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<SemanticError>),
    #[error("{code}: time {t} h precedes the first profile point at {first} h")]
    TimeBeforeProfile { code: ErrorCode, t: f64, first: f64 },
    #[error("scope profile is empty")]
    EmptyProfile,
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Checks every bundle invariant and reports all violations.
pub fn validate_bundle(bundle: &CaseBundle) -> Vec<SemanticError> {
    let mut errs = Vec::new();
    let t = &bundle.target;

    let pt = t.p_target.value();
    if pt <= 0.0 || pt >= 1.0 {
        errs.push(SemanticError::new(
            ErrorCode::TargetRange,
            &[Field::PTarget],
            format!("p_target must lie strictly between 0 and 1, got {pt}"),
        ));
    }

    let test = &bundle.test;
    if test.samples == 0 {
        errs.push(SemanticError::new(
            ErrorCode::ZeroSamples,
            &[Field::Samples],
            "testing needs at least one sample",
        ));
    }
    if test.failures > test.samples {
        errs.push(SemanticError::new(
            ErrorCode::CountOrder,
            &[Field::Samples, Field::Failures],
            format!(
                "failures ({}) exceed samples ({})",
                test.failures, test.samples
            ),
        ));
    }

    match (&bundle.scope, bundle.closed_scope()) {
        (None, false) => errs.push(SemanticError::new(
            ErrorCode::ClosedScopeRequired,
            &[Field::CaseEnd],
            format!("without scope evidence the case must assume \"{CLOSED_SCOPE}\""),
        )),
        (Some(_), true) => {
            let idx = bundle
                .assumptions
                .iter()
                .position(|a| a == CLOSED_SCOPE)
                .unwrap_or(0);
            errs.push(SemanticError::new(
                ErrorCode::ScopeConflict,
                &[Field::Scope, Field::Assumption(idx)],
                format!("scope evidence contradicts the \"{CLOSED_SCOPE}\" assumption"),
            ));
        }
        _ => {}
    }
    if let Some(scope) = &bundle.scope {
        validate_scope(scope, bundle.mission_time, &mut errs);
    }
    if let Some(mt) = bundle.mission_time {
        if !mt.is_finite() || mt < 0.0 {
            errs.push(SemanticError::new(
                ErrorCode::MissionTimeRange,
                &[Field::MissionTime],
                format!("mission_time must be a non-negative number of hours, got {mt}"),
            ));
        }
    }

    if bundle.detect_oos.is_some() && bundle.scope.is_none() {
        errs.push(SemanticError::new(
            ErrorCode::ScopeRequired,
            &[Field::Detection(DetectionKind::Oos)],
            "out-of-scope detection requires scope evidence",
        ));
    }
    for (slot, expected) in [
        (&bundle.detect_srf, DetectionKind::Srf),
        (&bundle.detect_oos, DetectionKind::Oos),
    ] {
        if let Some(d) = slot {
            validate_detection(d, expected, &mut errs);
        }
    }

    match bundle.labels {
        Some(LabelQuality::Rate(r)) if r.value() >= 1.0 => errs.push(SemanticError::new(
            ErrorCode::RateRange,
            &[Field::LabelsRate],
            "labeling-fault rate must be below 1",
        )),
        Some(LabelQuality::Audit {
            disagreements,
            audited,
        }) => {
            if audited == 0 {
                errs.push(SemanticError::new(
                    ErrorCode::ZeroSamples,
                    &[Field::LabelsAudit],
                    "label audit needs at least one audited label",
                ));
            }
            if disagreements > audited {
                errs.push(SemanticError::new(
                    ErrorCode::CountOrder,
                    &[Field::LabelsAudit],
                    format!("disagreements ({disagreements}) exceed audited labels ({audited})"),
                ));
            }
        }
        _ => {}
    }

    errs
}

fn validate_scope(scope: &ScopeEvidence, mission_time: Option<f64>, errs: &mut Vec<SemanticError>) {
    match &scope.form {
        ScopeForm::Point(p) => {
            if p.value() >= 1.0 {
                errs.push(SemanticError::new(
                    ErrorCode::ScopeRange,
                    &[Field::ScopePoint],
                    "p_oos must be below 1",
                ));
            }
        }
        ScopeForm::Profile(points) => {
            if points.is_empty() {
                errs.push(SemanticError::new(
                    ErrorCode::ProfileEmpty,
                    &[Field::Scope],
                    "scope profile has no points",
                ));
                return;
            }
            for (i, pt) in points.iter().enumerate() {
                if !pt.hours.is_finite() {
                    errs.push(SemanticError::new(
                        ErrorCode::ProfileOrder,
                        &[Field::ProfilePoint(i)],
                        "profile time must be finite",
                    ));
                }
                if pt.p_oos.value() >= 1.0 {
                    errs.push(SemanticError::new(
                        ErrorCode::ScopeRange,
                        &[Field::ProfilePoint(i)],
                        format!("profile point {i} has p_oos >= 1"),
                    ));
                }
                if i > 0 {
                    let prev = points[i - 1];
                    if !(pt.hours > prev.hours) {
                        errs.push(SemanticError::new(
                            ErrorCode::ProfileOrder,
                            &[Field::ProfilePoint(i)],
                            format!(
                                "profile times must strictly increase ({} h after {} h)",
                                pt.hours, prev.hours
                            ),
                        ));
                    }
                    if pt.p_oos.value() < prev.p_oos.value() {
                        errs.push(SemanticError::new(
                            ErrorCode::ProfileMonotone,
                            &[Field::ProfilePoint(i)],
                            format!(
                                "p_oos profile must be non-decreasing ({} after {})",
                                pt.p_oos, prev.p_oos
                            ),
                        ));
                    }
                }
            }
            match mission_time {
                None => errs.push(SemanticError::new(
                    ErrorCode::MissionTimeRequired,
                    &[Field::Scope, Field::CaseEnd],
                    "a scope profile needs mission_time to select the evaluation point",
                )),
                Some(t) if t < points[0].hours => errs.push(SemanticError::new(
                    ErrorCode::TimeBeforeProfile,
                    &[Field::ProfilePoint(0), Field::MissionTime],
                    format!(
                        "mission_time {t} h precedes the first profile point at {} h",
                        points[0].hours
                    ),
                )),
                _ => {}
            }
        }
    }
}

fn validate_detection(d: &DetectionEvidence, expected: DetectionKind, errs: &mut Vec<SemanticError>) {
    if d.kind != expected {
        errs.push(SemanticError::new(
            ErrorCode::KindMismatch,
            &[Field::Detection(expected)],
            format!("{} detection evidence stored in the {expected} slot", d.kind),
        ));
    }
    if let DetectionForm::Campaign { detected, total } = d.form {
        let at = Field::DetectionObserved(expected);
        if expected == DetectionKind::Oos {
            errs.push(SemanticError::new(
                ErrorCode::OosCampaign,
                &[at],
                "out-of-scope detection admits only a justified expert point estimate",
            ));
        }
        if total == 0 {
            errs.push(SemanticError::new(
                ErrorCode::ZeroSamples,
                &[at],
                "detection campaign needs at least one failure",
            ));
        }
        if detected > total {
            errs.push(SemanticError::new(
                ErrorCode::CountOrder,
                &[at],
                format!("detected ({detected}) exceeds total ({total})"),
            ));
        }
    }
}

/// Evaluates a scope estimate at mission time `t` (hours).
///
/// Profiles are read as step functions: the value of the last point at or
/// before `t` is carried forward.
pub fn scope_at_time(scope: &ScopeEvidence, t: f64) -> Result<Probability, EvidenceError> {
    match &scope.form {
        ScopeForm::Point(p) => Ok(*p),
        ScopeForm::Profile(points) => {
            let first = points.first().ok_or(EvidenceError::EmptyProfile)?;
            if t < first.hours || t.is_nan() {
                return Err(EvidenceError::TimeBeforeProfile {
                    code: ErrorCode::TimeBeforeProfile,
                    t,
                    first: first.hours,
                });
            }
            let idx = points.partition_point(|pt| pt.hours <= t);
            Ok(points[idx - 1].p_oos)
        }
    }
}

/// Confidence level each statistical quantity was bounded at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveConfidence {
    pub test: ConfidenceLevel,
    pub detect_srf: Option<ConfidenceLevel>,
    pub labels: Option<ConfidenceLevel>,
}

/// Numeric estimates ready for the bound calculus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedEstimates {
    /// Upper bound on the failure rate observed on the test data.
    pub u_test: Probability,
    /// Lower bound on the runtime detection rate of safety-related failures.
    pub l_detect_srf: Probability,
    pub p_oos: Probability,
    pub p_detect_oos: Probability,
    pub p_lf: Probability,
    pub cl_effective: EffectiveConfidence,
    /// Number of campaign- or audit-based bounds in the bundle.
    pub statistical_quantities: usize,
    pub mode: ConfidenceMode,
    pub interval: IntervalMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ResolveOptions {
    pub mode: ConfidenceMode,
    pub interval: IntervalMethod,
    /// Overrides the bundle's mission time when evaluating a scope profile.
    pub at_time: Option<f64>,
}

impl ResolveOptions {
    pub fn new(mode: ConfidenceMode) -> Self {
        ResolveOptions {
            mode,
            ..Default::default()
        }
    }
}

/// Counts the bounds that consume confidence budget: the test campaign plus
/// any campaign-form SRF detection and audit-form label evidence.
pub fn statistical_quantities(bundle: &CaseBundle) -> usize {
    let detect = matches!(
        bundle.detect_srf,
        Some(DetectionEvidence {
            form: DetectionForm::Campaign { .. },
            ..
        })
    );
    let audit = matches!(bundle.labels, Some(LabelQuality::Audit { .. }));
    1 + usize::from(detect) + usize::from(audit)
}

pub fn resolve_estimates(
    bundle: &CaseBundle,
    mode: ConfidenceMode,
) -> Result<ResolvedEstimates, EvidenceError> {
    resolve_with(bundle, &ResolveOptions::new(mode))
}

pub fn resolve_with(
    bundle: &CaseBundle,
    opts: &ResolveOptions,
) -> Result<ResolvedEstimates, EvidenceError> {
    let errs = validate_bundle(bundle);
    if !errs.is_empty() {
        return Err(EvidenceError::Invalid(errs));
    }
    let m = statistical_quantities(bundle);
    let cl = match opts.mode {
        ConfidenceMode::PaperFaithful => bundle.target.confidence,
        ConfidenceMode::Bonferroni => bundle.target.confidence.bonferroni(m),
    };
    let method = opts.interval;

    let u_test = method.upper(bundle.test.failures, bundle.test.samples, cl)?;

    let (l_detect_srf, detect_cl) = match &bundle.detect_srf {
        Some(DetectionEvidence {
            form: DetectionForm::Campaign { detected, total },
            ..
        }) => (method.lower(*detected, *total, cl)?, Some(cl)),
        Some(DetectionEvidence {
            form: DetectionForm::Point(p),
            ..
        }) => (*p, None),
        None => (Probability::ZERO, None),
    };

    let (p_lf, label_cl) = match bundle.labels {
        Some(LabelQuality::Rate(r)) => (r, None),
        Some(LabelQuality::Audit {
            disagreements,
            audited,
        }) => (method.upper(disagreements, audited, cl)?, Some(cl)),
        None => (Probability::ZERO, None),
    };

    let p_oos = match &bundle.scope {
        Some(scope) => {
            let t = opts.at_time.or(bundle.mission_time).unwrap_or(0.0);
            scope_at_time(scope, t)?
        }
        None => Probability::ZERO,
    };

    let p_detect_oos = match &bundle.detect_oos {
        Some(DetectionEvidence {
            form: DetectionForm::Point(p),
            ..
        }) => *p,
        _ => Probability::ZERO,
    };

    Ok(ResolvedEstimates {
        u_test,
        l_detect_srf,
        p_oos,
        p_detect_oos,
        p_lf,
        cl_effective: EffectiveConfidence {
            test: cl,
            detect_srf: detect_cl,
            labels: label_cl,
        },
        statistical_quantities: m,
        mode: opts.mode,
        interval: method,
    })
}

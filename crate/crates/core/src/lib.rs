//! Quantitative safety bounds for data-driven components.
//!
//! The crate composes statistical test evidence, scope-compliance estimates,
//! runtime detection efficacy and labeling-fault rates into an upper bound on
//! the probability of a component-caused safety violation, and evaluates that
//! bound inside an assurance-case argument.

// Negated comparisons are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod argument;
pub mod binomial;
pub mod budget;
pub mod dsl;
pub mod evidence;
pub mod mc;

pub use binomial::{ConfidenceLevel, Count, IntervalMethod, Probability, StatsError};
pub use evidence::{
    CaseBundle, ConfidenceMode, DetectionEvidence, DetectionForm, DetectionKind, LabelQuality,
    Provenance, ResolvedEstimates, SafetyTarget, ScopeEvidence, ScopeForm, Source, TestEvidence,
};

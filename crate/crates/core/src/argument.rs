//! Assurance-case argument: a top-level quantitative claim split into
//! sub-claims about the target, each evidence role and the test data.

use std::fmt::{self, Write};

use serde::{Deserialize, Serialize};

use crate::budget::{BoundReport, BoundTerms, CaseId, Verdict};
use crate::evidence::{
    CaseBundle, DetectionEvidence, DetectionForm, LabelQuality, ScopeForm, Source,
    DATASET_REPRESENTATIVE, DATASET_UNSEEN,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    TopQuantitative,
    TargetDerivation,
    TestingEstimate,
    ScopeCompliance,
    SrfDetection,
    OosDetection,
    DataUnseen,
    DataRepresentative,
    DataLabelsCorrect,
}

impl NodeKind {
    /// Sub-claim kinds in the order they appear under the root.
    pub const LEAVES: [NodeKind; 8] = [
        NodeKind::TargetDerivation,
        NodeKind::TestingEstimate,
        NodeKind::ScopeCompliance,
        NodeKind::SrfDetection,
        NodeKind::OosDetection,
        NodeKind::DataUnseen,
        NodeKind::DataRepresentative,
        NodeKind::DataLabelsCorrect,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimStatus {
    Satisfied,
    Unsatisfied,
    /// Argued by a declared assumption or estimate without supporting data.
    AssumedOnly,
    MissingEvidence,
}

impl ClaimStatus {
    pub fn is_warning(self) -> bool {
        matches!(self, ClaimStatus::AssumedOnly | ClaimStatus::MissingEvidence)
    }

    fn fill(self) -> &'static str {
        match self {
            ClaimStatus::Satisfied => "green",
            ClaimStatus::Unsatisfied => "red",
            ClaimStatus::AssumedOnly => "yellow",
            ClaimStatus::MissingEvidence => "gray",
        }
    }
}

impl fmt::Display for ClaimStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClaimStatus::Satisfied => "satisfied",
            ClaimStatus::Unsatisfied => "unsatisfied",
            ClaimStatus::AssumedOnly => "assumed_only",
            ClaimStatus::MissingEvidence => "missing_evidence",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArgumentNode {
    pub id: String,
    pub claim: String,
    pub kind: NodeKind,
    pub status: ClaimStatus,
    pub children: Vec<ArgumentNode>,
    pub evidence_refs: Vec<String>,
    pub notes: Vec<String>,
    /// Number of assumed-only or unevidenced leaves below this node.
    pub warnings: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case: Option<CaseId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breakdown: Option<BoundTerms>,
}

impl ArgumentNode {
    pub fn new(id: impl Into<String>, kind: NodeKind, claim: impl Into<String>) -> Self {
        ArgumentNode {
            id: id.into(),
            claim: claim.into(),
            kind,
            status: ClaimStatus::MissingEvidence,
            children: Vec::new(),
            evidence_refs: Vec::new(),
            notes: Vec::new(),
            warnings: 0,
            case: None,
            verdict: None,
            breakdown: None,
        }
    }

    fn with(mut self, status: ClaimStatus) -> Self {
        self.status = status;
        self
    }

    fn evidence(mut self, r: impl Into<String>) -> Self {
        self.evidence_refs.push(r.into());
        self
    }

    fn note(mut self, n: impl Into<String>) -> Self {
        self.notes.push(n.into());
        self
    }

    pub fn child(&self, kind: NodeKind) -> Option<&ArgumentNode> {
        self.children.iter().find(|c| c.kind == kind)
    }

    /// Nodes without children, in depth-first order.
    pub fn leaves(&self) -> Vec<&ArgumentNode> {
        if self.children.is_empty() {
            return vec![self];
        }
        self.children.iter().flat_map(|c| c.leaves()).collect()
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(|c| c.node_count()).sum::<usize>()
    }
}

fn source_ref(s: Option<&Source>) -> String {
    match s {
        Some(s) => format!(" ({}: {})", s.provenance, s.justification),
        None => String::new(),
    }
}

fn detection_ref(d: &DetectionEvidence) -> String {
    let form = match d.form {
        DetectionForm::Campaign { detected, total } => format!("{detected} of {total} detected"),
        DetectionForm::Point(p) => format!("p_detect = {p}"),
    };
    format!("detection {}: {form}{}", d.kind, source_ref(d.source.as_ref()))
}

fn detection_node(
    id: &str,
    kind: NodeKind,
    claim: &str,
    evidence: Option<&DetectionEvidence>,
) -> ArgumentNode {
    let node = ArgumentNode::new(id, kind, claim);
    match evidence {
        Some(d) => node.with(ClaimStatus::Satisfied).evidence(detection_ref(d)),
        None => node.note("no credit taken"),
    }
}

fn assumption_node(id: &str, kind: NodeKind, claim: &str, bundle: &CaseBundle, token: &str) -> ArgumentNode {
    let node = ArgumentNode::new(id, kind, claim);
    if bundle.assumes(token) {
        node.with(ClaimStatus::AssumedOnly)
            .evidence(format!("assume \"{token}\""))
    } else {
        node.note(format!("declare assume \"{token}\" once justified"))
    }
}

/// Builds the argument for `bundle` as evaluated in `report`, with statuses
/// already propagated to the root.
pub fn build_tree(bundle: &CaseBundle, report: &BoundReport) -> ArgumentNode {
    let t = &bundle.target;
    let mut root = ArgumentNode::new(
        "G0",
        NodeKind::TopQuantitative,
        format!(
            "The probability of a component-caused safety violation is at most {} at confidence {}",
            t.p_target, t.confidence
        ),
    );
    root.case = Some(report.case);
    root.verdict = Some(report.verdict);
    root.breakdown = Some(report.terms);
    root.evidence_refs.push(format!(
        "bound {}: p_safe_upper = {} (margin {})",
        report.case, report.p_safe_upper, report.margin
    ));

    let target = ArgumentNode::new(
        "G1",
        NodeKind::TargetDerivation,
        format!("The target {} is appropriately derived", t.p_target),
    )
    .with(ClaimStatus::AssumedOnly)
    .note("the target is an input and its derivation is not checked here");

    let testing = ArgumentNode::new(
        "G2",
        NodeKind::TestingEstimate,
        "Statistical testing bounds the safety-related failure rate inside the scope",
    )
    .with(ClaimStatus::Satisfied)
    .evidence(format!(
        "testing: {} failures in {} samples",
        bundle.test.failures, bundle.test.samples
    ));

    let scope = ArgumentNode::new(
        "G3",
        NodeKind::ScopeCompliance,
        "Use outside the target application scope is bounded",
    );
    let scope = match &bundle.scope {
        Some(s) => {
            let form = match &s.form {
                ScopeForm::Point(p) => format!("p_oos = {p}"),
                ScopeForm::Profile(points) => format!("p_oos profile with {} points", points.len()),
            };
            scope
                .with(ClaimStatus::Satisfied)
                .evidence(format!("scope: {form}{}", source_ref(s.source.as_ref())))
        }
        None if bundle.closed_scope() => scope
            .with(ClaimStatus::AssumedOnly)
            .evidence(format!("assume \"{}\"", crate::evidence::CLOSED_SCOPE)),
        None => scope,
    };

    let mut srf = detection_node(
        "G4",
        NodeKind::SrfDetection,
        "Runtime monitoring flags safety-related failures",
        bundle.detect_srf.as_ref(),
    );
    if !report.preposition_status.is_empty() {
        srf.status = ClaimStatus::Unsatisfied;
        srf.notes
            .extend(report.preposition_status.iter().map(|v| v.message.clone()));
    }
    let oos = detection_node(
        "G5",
        NodeKind::OosDetection,
        "Runtime monitoring detects out-of-scope operation",
        bundle.detect_oos.as_ref(),
    );

    let unseen = assumption_node(
        "G6",
        NodeKind::DataUnseen,
        "The test data was not used during development",
        bundle,
        DATASET_UNSEEN,
    );
    let representative = assumption_node(
        "G7",
        NodeKind::DataRepresentative,
        "The test data is representative of the target application scope",
        bundle,
        DATASET_REPRESENTATIVE,
    );

    let labels = ArgumentNode::new(
        "G8",
        NodeKind::DataLabelsCorrect,
        "The test labels correctly model the intended ground truth",
    );
    let labels = match bundle.labels {
        Some(LabelQuality::Audit {
            disagreements,
            audited,
        }) => labels
            .with(ClaimStatus::Satisfied)
            .evidence(format!("labels: audit {disagreements} of {audited}")),
        Some(LabelQuality::Rate(r)) => labels
            .with(ClaimStatus::AssumedOnly)
            .evidence(format!("labels: declared rate {r}")),
        None => {
            root.notes
                .push("no label evidence: a labeling-fault rate of p_lf = 0 was assumed".into());
            labels
        }
    };

    root.children = vec![
        target,
        testing,
        scope,
        srf,
        oos,
        unseen,
        representative,
        labels,
    ];
    propagate_status(root)
}

/// Derives the root status from the bound verdict and the leaf statuses.
///
/// Leaves are never changed. The root is satisfied only when the verdict is,
/// no leaf is unsatisfied and testing evidence is present; assumed-only and
/// unevidenced leaves are counted as warnings.
pub fn propagate_status(mut root: ArgumentNode) -> ArgumentNode {
    let leaves = root.leaves();
    let is_leaf_root = root.children.is_empty();
    let warnings = if is_leaf_root {
        0
    } else {
        leaves.iter().filter(|l| l.status.is_warning()).count()
    };
    let blocked = !is_leaf_root
        && leaves.iter().any(|l| {
            l.status == ClaimStatus::Unsatisfied
                || (l.kind == NodeKind::TestingEstimate && l.status == ClaimStatus::MissingEvidence)
        });
    root.warnings = warnings;
    root.status = if root.verdict == Some(Verdict::Satisfied) && !blocked {
        ClaimStatus::Satisfied
    } else {
        ClaimStatus::Unsatisfied
    };
    root
}

fn dot_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out
}

/// Graphviz export: one filled box per claim and an edge per decomposition.
pub fn export_dot(root: &ArgumentNode) -> String {
    fn nodes(n: &ArgumentNode, out: &mut String) {
        let _ = writeln!(
            out,
            "  \"{}\" [shape=box, style=filled, fillcolor={}, label=\"{}\\n{}\\n[{}]\"];",
            dot_escape(&n.id),
            n.status.fill(),
            dot_escape(&n.id),
            dot_escape(&n.claim),
            n.status
        );
        for c in &n.children {
            nodes(c, out);
        }
    }
    fn edges(n: &ArgumentNode, out: &mut String) {
        for c in &n.children {
            let _ = writeln!(out, "  \"{}\" -> \"{}\";", dot_escape(&n.id), dot_escape(&c.id));
            edges(c, out);
        }
    }
    let mut out = String::from("digraph argument {\n");
    nodes(root, &mut out);
    edges(root, &mut out);
    out.push_str("}\n");
    out
}

pub fn export_json(root: &ArgumentNode) -> String {
    serde_json::to_string_pretty(root).expect("argument trees always serialize")
}

pub fn import_json(text: &str) -> Result<ArgumentNode, serde_json::Error> {
    serde_json::from_str(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::budget::{applicable_case, evaluate_bound, BaseCase};
    use crate::dsl::parse;
    use crate::evidence::{resolve_estimates, ConfidenceMode, SafetyTarget, TestEvidence};
    use crate::{ConfidenceLevel, Probability};

    fn tree_for(bundle: &CaseBundle) -> ArgumentNode {
        let r = resolve_estimates(bundle, ConfidenceMode::PaperFaithful).unwrap();
        let report = evaluate_bound(&r, applicable_case(bundle), &bundle.target).unwrap();
        build_tree(bundle, &report)
    }

    fn stop_sign() -> CaseBundle {
        parse(crate::dsl::tests::STOP_SIGN).unwrap()
    }

    fn minimal() -> CaseBundle {
        CaseBundle::minimal(
            "m",
            SafetyTarget {
                p_target: Probability::new(0.002).unwrap(),
                confidence: ConfidenceLevel::new(0.9999).unwrap(),
            },
            TestEvidence {
                samples: 100_000,
                failures: 100,
            },
        )
    }

    fn status(t: &ArgumentNode, k: NodeKind) -> ClaimStatus {
        t.child(k).unwrap().status
    }

    #[test]
    fn reference_case_tree() {
        let t = tree_for(&stop_sign());
        assert_eq!(t.node_count(), 9);
        assert_eq!(t.status, ClaimStatus::Satisfied);
        assert_eq!(t.case, Some(CaseId::new(BaseCase::E, true)));
        assert_eq!(status(&t, NodeKind::TargetDerivation), ClaimStatus::AssumedOnly);
        assert_eq!(status(&t, NodeKind::ScopeCompliance), ClaimStatus::Satisfied);
        assert_eq!(status(&t, NodeKind::SrfDetection), ClaimStatus::Satisfied);
        assert_eq!(status(&t, NodeKind::DataUnseen), ClaimStatus::MissingEvidence);
        assert_eq!(status(&t, NodeKind::DataRepresentative), ClaimStatus::MissingEvidence);
        assert_eq!(status(&t, NodeKind::DataLabelsCorrect), ClaimStatus::AssumedOnly);
        // target, labels, and both data-quality leaves
        assert_eq!(t.warnings, 4);
        let kinds: Vec<_> = t.children.iter().map(|c| c.kind).collect();
        assert_eq!(kinds, NodeKind::LEAVES);
    }

    #[test]
    fn declared_assumptions_and_audit() {
        let mut b = stop_sign();
        b.assumptions = vec![DATASET_UNSEEN.into(), DATASET_REPRESENTATIVE.into()];
        b.labels = Some(LabelQuality::Audit {
            disagreements: 1,
            audited: 5000,
        });
        let t = tree_for(&b);
        assert_eq!(status(&t, NodeKind::DataUnseen), ClaimStatus::AssumedOnly);
        assert_eq!(status(&t, NodeKind::DataRepresentative), ClaimStatus::AssumedOnly);
        assert_eq!(status(&t, NodeKind::DataLabelsCorrect), ClaimStatus::Satisfied);
        assert_eq!(t.warnings, 3);
    }

    #[test]
    fn minimal_closed_scope_tree() {
        let t = tree_for(&minimal());
        assert_eq!(status(&t, NodeKind::ScopeCompliance), ClaimStatus::AssumedOnly);
        assert_eq!(status(&t, NodeKind::SrfDetection), ClaimStatus::MissingEvidence);
        assert!(t.child(NodeKind::OosDetection).unwrap().notes.contains(&"no credit taken".to_string()));
        assert_eq!(status(&t, NodeKind::DataLabelsCorrect), ClaimStatus::MissingEvidence);
        assert!(t.notes.iter().any(|n| n.contains("p_lf = 0")));
        assert_eq!(t.status, ClaimStatus::Satisfied);
    }

    #[test]
    fn failing_verdict_dominates() {
        let mut b = stop_sign();
        b.test.failures = 200;
        let t = tree_for(&b);
        assert_eq!(t.verdict, Some(Verdict::NotSatisfied));
        assert_eq!(t.status, ClaimStatus::Unsatisfied);
        assert!(t.children.iter().all(|c| c.status != ClaimStatus::Unsatisfied));
    }

    #[test]
    fn missing_testing_blocks_root() {
        let mut t = tree_for(&minimal());
        t.children[1].status = ClaimStatus::MissingEvidence;
        let t = propagate_status(t);
        assert_eq!(t.status, ClaimStatus::Unsatisfied);
    }

    #[test]
    fn propagation_keeps_leaves() {
        let t = tree_for(&stop_sign());
        let again = propagate_status(t.clone());
        assert_eq!(again, t);
    }

    #[test]
    fn preposition_violation_marks_srf_detection() {
        // 1 - p_oos - l is exactly zero here, the only violation a report can carry.
        let mut b = stop_sign();
        b.scope = Some(crate::ScopeEvidence {
            form: ScopeForm::Point(Probability::new(0.2).unwrap()),
            source: None,
        });
        b.detect_srf = Some(DetectionEvidence {
            kind: crate::DetectionKind::Srf,
            form: DetectionForm::Point(Probability::new(0.8).unwrap()),
            source: None,
        });
        let t = tree_for(&b);
        assert!(!t.child(NodeKind::SrfDetection).unwrap().notes.is_empty());
        assert_eq!(status(&t, NodeKind::SrfDetection), ClaimStatus::Unsatisfied);
        assert_eq!(t.status, ClaimStatus::Unsatisfied);
    }

    #[test]
    fn dot_export_is_deterministic_and_well_formed() {
        let t = tree_for(&stop_sign());
        let dot = export_dot(&t);
        assert_eq!(dot, export_dot(&t));
        let lines: Vec<_> = dot.lines().collect();
        assert_eq!(lines[0], "digraph argument {");
        assert_eq!(*lines.last().unwrap(), "}");
        let node_lines = lines.iter().filter(|l| l.contains("[shape=box")).count();
        let edge_lines = lines.iter().filter(|l| l.contains("->")).count();
        assert_eq!((node_lines, edge_lines), (9, 8));
        assert!(lines[1..lines.len() - 1].iter().all(|l| l.starts_with("  ") && l.ends_with(';')));
        assert!(dot.contains("fillcolor=green"));
        assert!(dot.contains("fillcolor=yellow"));
        assert!(dot.contains("fillcolor=gray"));
    }

    #[test]
    fn single_node_dot() {
        let n = ArgumentNode::new("solo", NodeKind::TopQuantitative, "a \"quoted\" claim");
        let dot = export_dot(&propagate_status(n));
        assert_eq!(dot.lines().count(), 3);
        assert!(dot.contains("a \\\"quoted\\\" claim"));
    }

    #[test]
    fn json_round_trip_and_shape() {
        let t = tree_for(&minimal());
        let json = export_json(&t);
        assert_eq!(import_json(&json).unwrap(), t);
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["status"], "satisfied");
        assert_eq!(v["children"][2]["status"], "assumed_only");
        assert_eq!(v["children"][1]["notes"], serde_json::json!([]));
        assert!(v["breakdown"]["test_term"].is_number());
        assert!(v["children"][0].get("breakdown").is_none());
    }
}

#![allow(dead_code)]

use proptest::prelude::*;
use qcase_core::evidence::{ProfilePoint, CLOSED_SCOPE};
use qcase_core::{
    CaseBundle, ConfidenceLevel, DetectionEvidence, DetectionForm, DetectionKind, LabelQuality,
    Probability, Provenance, SafetyTarget, ScopeEvidence, ScopeForm, Source, TestEvidence,
};

pub fn p(v: f64) -> Probability {
    Probability::new(v).unwrap()
}

pub fn cl(v: f64) -> ConfidenceLevel {
    ConfidenceLevel::new(v).unwrap()
}

/// Printable text, including the characters the string syntax escapes.
pub fn text(max: usize) -> impl Strategy<Value = String> {
    proptest::string::string_regex(&format!("[a-zA-Z0-9 _.,:#{{}}=\"\\\\-]{{0,{max}}}")).unwrap()
}

fn source() -> impl Strategy<Value = Option<Source>> {
    proptest::option::of((any::<bool>(), text(30)).prop_map(|(expert, justification)| Source {
        provenance: if expert { Provenance::Expert } else { Provenance::Data },
        justification,
    }))
}

fn profile() -> impl Strategy<Value = (Vec<ProfilePoint>, f64)> {
    (
        0.0..10.0f64,
        prop::collection::vec((0.5..50.0f64, 0.0..0.01f64), 1..5),
        0.0..200.0f64,
    )
        .prop_map(|(start, steps, after)| {
            let mut hours = start;
            let mut p_oos = 0.0f64;
            let points: Vec<ProfilePoint> = steps
                .into_iter()
                .map(|(dh, dp)| {
                    p_oos = (p_oos + dp).min(0.05);
                    let pt = ProfilePoint { hours, p_oos: p(p_oos) };
                    hours += dh;
                    pt
                })
                .collect();
            let mission = points[0].hours + after;
            (points, mission)
        })
}

fn scope() -> impl Strategy<Value = (ScopeEvidence, Option<f64>)> {
    prop_oneof![
        (0.0..0.05f64, source()).prop_map(|(v, source)| (
            ScopeEvidence { form: ScopeForm::Point(p(v)), source },
            None
        )),
        (profile(), source()).prop_map(|((points, mission), source)| (
            ScopeEvidence { form: ScopeForm::Profile(points), source },
            Some(mission)
        )),
    ]
}

fn srf_detection() -> impl Strategy<Value = DetectionEvidence> {
    let form = prop_oneof![
        (1..300u64, 0.0..0.9f64).prop_map(|(total, share)| DetectionForm::Campaign {
            detected: (total as f64 * share) as u64,
            total,
        }),
        (0.0..0.9f64).prop_map(|v| DetectionForm::Point(p(v))),
    ];
    (form, source()).prop_map(|(form, source)| DetectionEvidence {
        kind: DetectionKind::Srf,
        form,
        source,
    })
}

fn oos_detection() -> impl Strategy<Value = DetectionEvidence> {
    (0.0..=1.0f64, source()).prop_map(|(v, source)| DetectionEvidence {
        kind: DetectionKind::Oos,
        form: DetectionForm::Point(p(v)),
        source,
    })
}

fn labels() -> impl Strategy<Value = Option<LabelQuality>> {
    proptest::option::of(prop_oneof![
        (0.0..0.01f64).prop_map(|v| LabelQuality::Rate(p(v))),
        (1..2000u64, 0.0..0.02f64).prop_map(|(audited, share)| LabelQuality::Audit {
            disagreements: (audited as f64 * share) as u64,
            audited,
        }),
    ])
}

/// Bundles that pass validation and keep `1 - p_oos - l_detect_srf` positive.
pub fn bundle() -> impl Strategy<Value = CaseBundle> {
    let head = (
        text(12),
        1e-4..0.05f64,
        prop::sample::select(vec![0.9, 0.99, 0.999, 0.9999]),
        50..2000u64,
        0.0..0.03f64,
    );
    let evidence = (
        proptest::option::of((scope(), proptest::option::of(oos_detection()))),
        proptest::option::of(srf_detection()),
        labels(),
        prop::collection::vec(text(20), 0..3),
        proptest::option::of(0.0..1000.0f64),
    );
    (head, evidence).prop_map(
        |((id, p_target, conf, samples, share), (scope, srf, labels, extra, mission))| {
            let failures = (samples as f64 * share) as u64;
            let target = SafetyTarget { p_target: p(p_target), confidence: cl(conf) };
            let mut b = CaseBundle::minimal(id, target, TestEvidence { samples, failures });
            b.assumptions.clear();
            match scope {
                Some(((s, profile_time), oos)) => {
                    b.mission_time = profile_time.or(mission);
                    b.scope = Some(s);
                    b.detect_oos = oos;
                }
                None => {
                    b.mission_time = mission;
                    b.assumptions.push(CLOSED_SCOPE.to_string());
                }
            }
            b.detect_srf = srf;
            b.labels = labels;
            b.assumptions
                .extend(extra.into_iter().filter(|a| a != CLOSED_SCOPE));
            b
        },
    )
}

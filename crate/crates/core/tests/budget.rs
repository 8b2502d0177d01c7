mod common;

use common::{bundle, cl, p};
use proptest::prelude::*;
use qcase_core::budget::{
    applicable_case, derive_required_test_bound, evaluate_bound, BaseCase, CaseId, DeriveOptions,
    Infeasibility, Solved,
};
use qcase_core::evidence::{
    resolve_with, scope_at_time, statistical_quantities, EffectiveConfidence, ProfilePoint,
    ResolveOptions,
};
use qcase_core::{
    CaseBundle, ConfidenceMode, IntervalMethod, LabelQuality, Probability, ResolvedEstimates,
    SafetyTarget, ScopeEvidence, ScopeForm,
};

fn stop_sign_estimates(p_lf: f64) -> ResolvedEstimates {
    ResolvedEstimates {
        u_test: Probability::ZERO,
        l_detect_srf: p(0.30),
        p_oos: p(0.0005),
        p_detect_oos: p(0.495),
        p_lf: p(p_lf),
        cl_effective: EffectiveConfidence { test: cl(0.9999), detect_srf: None, labels: None },
        statistical_quantities: 1,
        mode: ConfidenceMode::PaperFaithful,
        interval: IntervalMethod::ClopperPearson,
    }
}

fn target(v: f64) -> SafetyTarget {
    SafetyTarget { p_target: p(v), confidence: cl(0.9999) }
}

fn required(r: &ResolvedEstimates, case: CaseId, t: &SafetyTarget) -> Solved<f64> {
    derive_required_test_bound(r, case, t, &DeriveOptions::default())
        .unwrap()
        .required_u_test
}

#[test]
fn chain_orders_cases() {
    let t = target(0.002);
    for lf in [0.0, 0.001] {
        let r = stop_sign_estimates(lf);
        let v = |base| required(&r, CaseId::new(base, lf > 0.0), &t).value().unwrap();
        let (b, c, d, e) = (v(BaseCase::B), v(BaseCase::C), v(BaseCase::D), v(BaseCase::E));
        assert!(c < b && c < d && d < e, "{b} {c} {d} {e}");
    }
}

#[test]
fn target_below_scope_floor() {
    let r = stop_sign_estimates(0.0);
    let s = required(&r, CaseId::new(BaseCase::C, false), &target(0.0004));
    assert_eq!(s, Solved::Infeasible { reason: Infeasibility::ScopeFloor });
    let s = required(&stop_sign_estimates(0.002), CaseId::new(BaseCase::B, true), &target(0.002));
    assert_eq!(s, Solved::Infeasible { reason: Infeasibility::LabelFaults });
}

proptest! {
    #[test]
    fn complement_identity(u in 0.0..1.0f64, o in 0.0..1.0f64) {
        let lhs = u * (1.0 - o) + o;
        let rhs = 1.0 - (1.0 - u) * (1.0 - o);
        prop_assert!((lhs - rhs).abs() <= 1e-15, "{lhs} {rhs}");
    }

    #[test]
    fn derived_bound_meets_target_exactly(b in bundle(), bonf in any::<bool>()) {
        let mode = if bonf { ConfidenceMode::Bonferroni } else { ConfidenceMode::PaperFaithful };
        let r = resolve_with(&b, &ResolveOptions::new(mode)).unwrap();
        let case = applicable_case(&b);
        if let Solved::Feasible { value } = required(&r, case, &b.target) {
            let mut at = r;
            at.u_test = p(value);
            let rep = evaluate_bound(&at, case, &b.target).unwrap();
            prop_assert!((rep.unclipped - b.target.p_target.value()).abs() <= 1e-12);
        }
    }

    #[test]
    fn label_adjustment_is_a_shift(b in bundle()) {
        let r = resolve_with(&b, &ResolveOptions::default()).unwrap();
        for base in [BaseCase::B, BaseCase::C, BaseCase::D, BaseCase::E] {
            let plain = required(&r, CaseId::new(base, false), &b.target).value();
            let shifted = required(&r, CaseId::new(base, true), &b.target).value();
            if let (Some(a), Some(s)) = (plain, shifted) {
                prop_assert!((s - (a - r.p_lf.value())).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_cases_coincide(b in bundle()) {
        let mut r = resolve_with(&b, &ResolveOptions::default()).unwrap();
        let f = b.labels.is_some();
        let eval = |r: &ResolvedEstimates, base| {
            evaluate_bound(r, CaseId::new(base, f), &b.target).unwrap().unclipped
        };
        let mut no_oos_detect = r;
        no_oos_detect.p_detect_oos = Probability::ZERO;
        prop_assert_eq!(eval(&no_oos_detect, BaseCase::E), eval(&no_oos_detect, BaseCase::D));
        r.p_oos = Probability::ZERO;
        r.l_detect_srf = Probability::ZERO;
        prop_assert_eq!(eval(&r, BaseCase::D), eval(&r, BaseCase::B));
    }

    #[test]
    fn bonferroni_is_weakly_more_conservative(b in bundle()) {
        let paper = resolve_with(&b, &ResolveOptions::new(ConfidenceMode::PaperFaithful)).unwrap();
        let bonf = resolve_with(&b, &ResolveOptions::new(ConfidenceMode::Bonferroni)).unwrap();
        prop_assert!(bonf.u_test >= paper.u_test);
        prop_assert!(bonf.l_detect_srf <= paper.l_detect_srf);
        prop_assert!(bonf.p_lf >= paper.p_lf);
        if statistical_quantities(&b) == 1 {
            prop_assert_eq!(bonf.u_test, paper.u_test);
            prop_assert_eq!(bonf.l_detect_srf, paper.l_detect_srf);
            prop_assert_eq!(bonf.p_lf, paper.p_lf);
        }
    }

    #[test]
    fn resolution_is_pure(b in bundle()) {
        let opts = ResolveOptions::new(ConfidenceMode::Bonferroni);
        prop_assert_eq!(resolve_with(&b, &opts).unwrap(), resolve_with(&b, &opts).unwrap());
    }

    #[test]
    fn profile_is_non_decreasing_in_time(
        steps in prop::collection::vec((0.1..10.0f64, 0.0..0.01f64), 1..6),
        t1 in 0.0..60.0f64,
        dt in 0.0..60.0f64,
    ) {
        let mut hours = 0.0;
        let mut level = 0.0f64;
        let points = steps.into_iter().map(|(dh, dp)| {
            level += dp;
            let pt = ProfilePoint { hours, p_oos: p(level) };
            hours += dh;
            pt
        }).collect();
        let scope = ScopeEvidence { form: ScopeForm::Profile(points), source: None };
        prop_assert!(scope_at_time(&scope, t1).unwrap() <= scope_at_time(&scope, t1 + dt).unwrap());
    }
}

#[test]
fn audit_labels_are_bounded_not_taken_at_face_value() {
    let mut b = CaseBundle::minimal(
        "audit",
        target(0.002),
        qcase_core::TestEvidence { samples: 100_000, failures: 100 },
    );
    b.labels = Some(LabelQuality::Audit { disagreements: 1, audited: 1000 });
    let r = resolve_with(&b, &ResolveOptions::default()).unwrap();
    assert!(r.p_lf.value() > 0.001);
    assert_eq!(r.cl_effective.labels, Some(cl(0.9999)));
}

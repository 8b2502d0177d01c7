use std::fmt::Write;

use qcase_core::argument::{ArgumentNode, ClaimStatus};
use qcase_core::budget::{BoundReport, DerivationResult, Solved, SweepRow};
use qcase_core::{CaseBundle, ConfidenceMode, ResolvedEstimates};

/// Seven significant digits in plain decimal notation.
pub fn sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (6 - magnitude).clamp(0, 15) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn estimate_rows(r: &ResolvedEstimates) -> Vec<(&'static str, String)> {
    let cl = |c: Option<qcase_core::ConfidenceLevel>| match c {
        Some(c) => format!(" (bound at cl {c})"),
        None => String::new(),
    };
    vec![
        ("u_test", format!("{}{}", sig(r.u_test.value()), cl(Some(r.cl_effective.test)))),
        (
            "l_detect_srf",
            format!("{}{}", sig(r.l_detect_srf.value()), cl(r.cl_effective.detect_srf)),
        ),
        ("p_oos", sig(r.p_oos.value())),
        ("p_detect_oos", sig(r.p_detect_oos.value())),
        ("p_lf", format!("{}{}", sig(r.p_lf.value()), cl(r.cl_effective.labels))),
    ]
}

fn term_rows(rep: &BoundReport) -> Vec<(&'static str, String)> {
    let t = &rep.terms;
    vec![
        ("test term", format!("+{}", sig(t.test_term))),
        ("label penalty", format!("+{}", sig(t.label_penalty))),
        ("srf detection credit", format!("-{}", sig(t.srf_detect_credit))),
        ("scope term", format!("+{}", sig(t.scope_term))),
        ("oos detection credit", format!("-{}", sig(t.oos_detect_credit))),
    ]
}

fn warning_leaves(tree: &ArgumentNode) -> Vec<&ArgumentNode> {
    tree.leaves()
        .into_iter()
        .filter(|l| l.status.is_warning() || l.status == ClaimStatus::Unsatisfied)
        .collect()
}

pub fn check_text(
    bundle: &CaseBundle,
    r: &ResolvedEstimates,
    rep: &BoundReport,
    tree: &ArgumentNode,
) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "case \"{}\": {} (mode {}, interval {})",
        bundle.id, rep.case, r.mode, r.interval
    );
    s.push_str("estimates:\n");
    for (k, v) in estimate_rows(r) {
        let _ = writeln!(s, "  {k:<22}{v}");
    }
    s.push_str("bound terms:\n");
    for (k, v) in term_rows(rep) {
        let _ = writeln!(s, "  {k:<22}{v}");
    }
    let _ = writeln!(s, "  {:<22}{}", "p_safe_upper", sig(rep.p_safe_upper));
    let _ = writeln!(s, "  {:<22}{}", "p_target", sig(rep.p_target));
    let _ = writeln!(s, "  {:<22}{}", "margin", sig(rep.margin));
    for v in &rep.preposition_status {
        let _ = writeln!(s, "violation {}: {}", v.code.as_str(), v.message);
    }
    let _ = writeln!(s, "verdict: {}", rep.verdict);
    let _ = writeln!(s, "argument: {} ({} warnings)", tree.status, tree.warnings);
    for leaf in warning_leaves(tree) {
        let _ = writeln!(s, "  {} {}: {}", leaf.id, leaf.status, leaf.claim);
    }
    for n in &tree.notes {
        let _ = writeln!(s, "note: {n}");
    }
    s
}

pub fn check_md(
    bundle: &CaseBundle,
    r: &ResolvedEstimates,
    rep: &BoundReport,
    tree: &ArgumentNode,
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Case `{}`\n", bundle.id);
    let _ = writeln!(
        s,
        "Case **{}**, mode `{}`, interval `{}`.\n",
        rep.case, r.mode, r.interval
    );
    s.push_str("| Estimate | Value |\n|---|---|\n");
    for (k, v) in estimate_rows(r) {
        let _ = writeln!(s, "| `{k}` | {v} |");
    }
    s.push_str("\n| Term | Value |\n|---|---|\n");
    for (k, v) in term_rows(rep) {
        let _ = writeln!(s, "| {k} | {v} |");
    }
    let _ = writeln!(s, "| **p_safe_upper** | **{}** |", sig(rep.p_safe_upper));
    let _ = writeln!(s, "| p_target | {} |", sig(rep.p_target));
    let _ = writeln!(s, "| margin | {} |", sig(rep.margin));
    let _ = writeln!(s, "\n**Verdict:** {}\n", rep.verdict);
    for v in &rep.preposition_status {
        let _ = writeln!(s, "- violation `{}`: {}", v.code.as_str(), v.message);
    }
    let _ = writeln!(s, "## Argument: {} ({} warnings)\n", tree.status, tree.warnings);
    s.push_str("| Claim | Status | Evidence |\n|---|---|---|\n");
    for c in &tree.children {
        let _ = writeln!(
            s,
            "| {} {} | {} | {} |",
            c.id,
            c.claim,
            c.status,
            c.evidence_refs.join("; ")
        );
    }
    for n in &tree.notes {
        let _ = writeln!(s, "\n> {n}");
    }
    s
}

fn solved<T: std::fmt::Display + Copy>(s: &Solved<T>) -> String {
    match s {
        Solved::Feasible { value } => value.to_string(),
        Solved::Infeasible { reason } => format!("infeasible ({reason})"),
    }
}

pub fn derive_text(d: &DerivationResult, mode: ConfidenceMode) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "case {}: p_target {} at confidence {} (mode {mode})",
        d.case,
        sig(d.p_target),
        d.confidence
    );
    let required = match d.required_u_test {
        Solved::Feasible { value } => sig(value),
        Solved::Infeasible { reason } => format!("infeasible ({reason})"),
    };
    let _ = writeln!(s, "required_u_test: {required}");
    if d.case.label_adjusted {
        let _ = writeln!(
            s,
            "required_before_labels: {}",
            sig(d.required_before_labels)
        );
    }
    if let (Some(n), Some(k)) = (d.samples, &d.max_failures) {
        let _ = writeln!(s, "max_failures at n = {n}: {}", solved(k));
    }
    if let (Some(rate), Some(n)) = (d.expected_rate, &d.min_samples) {
        let _ = writeln!(s, "min_samples at expected rate {}: {}", sig(rate), solved(n));
    }
    s
}

fn opt_num<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Fixed columns: `param,value,p_safe_upper,required_u_test,max_failures,verdict`.
/// Infeasible quantities are left empty.
pub fn sweep_csv(rows: &[SweepRow]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "param",
        "value",
        "p_safe_upper",
        "required_u_test",
        "max_failures",
        "verdict",
    ])?;
    for r in rows {
        w.write_record([
            r.param.name().to_string(),
            r.value.to_string(),
            opt_num(r.p_safe_upper),
            opt_num(r.required_u_test.value()),
            opt_num(r.max_failures.value()),
            r.verdict.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

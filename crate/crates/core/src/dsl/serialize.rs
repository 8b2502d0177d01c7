use std::fmt::Write;

use crate::evidence::{
    CaseBundle, DetectionEvidence, DetectionForm, LabelQuality, ScopeForm, Source,
};

/// Renders a bundle in canonical form.
///
/// Blocks appear in a fixed order with two-space indentation, and reals use
/// the shortest text that parses back to the same value.
pub fn serialize(bundle: &CaseBundle) -> String {
    let mut out = String::new();
    let w = &mut out;
    line(w, 0, &format!("case {} {{", quote(&bundle.id)));
    if let Some(t) = bundle.mission_time {
        line(w, 1, &format!("mission_time = {}", real(t)));
    }

    line(w, 1, "target {");
    line(w, 2, &format!("p_target = {}", real(bundle.target.p_target.value())));
    line(w, 2, &format!("confidence = {}", real(bundle.target.confidence.value())));
    line(w, 1, "}");

    if let Some(scope) = &bundle.scope {
        line(w, 1, "scope {");
        match &scope.form {
            ScopeForm::Point(p) => line(w, 2, &format!("p_oos = {}", real(p.value()))),
            ScopeForm::Profile(points) => {
                line(w, 2, "profile {");
                for pt in points {
                    line(w, 3, &format!("{} -> {}", real(pt.hours), real(pt.p_oos.value())));
                }
                line(w, 2, "}");
            }
        }
        source(w, scope.source.as_ref());
        line(w, 1, "}");
    }

    line(w, 1, "testing {");
    line(w, 2, &format!("samples = {}", bundle.test.samples));
    line(w, 2, &format!("failures = {}", bundle.test.failures));
    line(w, 1, "}");

    for d in [&bundle.detect_srf, &bundle.detect_oos].into_iter().flatten() {
        detection(w, d);
    }

    match bundle.labels {
        Some(LabelQuality::Rate(r)) => {
            line(w, 1, "labels {");
            line(w, 2, &format!("rate = {}", real(r.value())));
            line(w, 1, "}");
        }
        Some(LabelQuality::Audit {
            disagreements,
            audited,
        }) => {
            line(w, 1, "labels {");
            line(w, 2, &format!("audit = {disagreements} of {audited}"));
            line(w, 1, "}");
        }
        None => {}
    }

    for a in &bundle.assumptions {
        line(w, 1, &format!("assume {}", quote(a)));
    }
    line(w, 0, "}");
    out
}

fn detection(w: &mut String, d: &DetectionEvidence) {
    line(w, 1, &format!("detection {} {{", d.kind));
    match d.form {
        DetectionForm::Point(p) => line(w, 2, &format!("p_detect = {}", real(p.value()))),
        DetectionForm::Campaign { detected, total } => {
            line(w, 2, &format!("observed = {detected} of {total}"))
        }
    }
    source(w, d.source.as_ref());
    line(w, 1, "}");
}

fn source(w: &mut String, s: Option<&Source>) {
    if let Some(s) = s {
        line(
            w,
            2,
            &format!("source = {} {}", s.provenance, quote(&s.justification)),
        );
    }
}

fn line(w: &mut String, depth: usize, text: &str) {
    let _ = writeln!(w, "{:width$}{text}", "", width = depth * 2);
}

/// Shortest round-trip rendering; always contains `.` or an exponent so the
/// lexer reads it back as a real.
fn real(x: f64) -> String {
    format!("{x:?}")
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

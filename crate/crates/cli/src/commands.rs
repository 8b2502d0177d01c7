use std::fs;

use qcase_core::argument::{build_tree, export_dot, export_json, ArgumentNode};
use qcase_core::budget::{
    applicable_case, derive_required_test_bound, evaluate_bound, sensitivity_sweep, BoundReport,
    BudgetError, DeriveOptions, SweepParam, SweepSpec, Verdict,
};
use qcase_core::dsl::{self, ParseError};
use qcase_core::evidence::{resolve_with, validate_bundle, EvidenceError, ResolveOptions};
use qcase_core::mc::{
    coverage_experiment, grid_csv, standard_grid, CampaignDesign, DetectEval, GroundTruth, McError,
};
use qcase_core::{
    CaseBundle, ConfidenceLevel, ConfidenceMode, IntervalMethod, Probability, ResolvedEstimates,
    ScopeEvidence, ScopeForm,
};
use serde::Serialize;

use crate::render;
use crate::{
    DeriveFormat, EvalArgs, Exit, Failure, ReportFormat, SimulateArgs, SolveFor, TableFormat,
    TreeFormat,
};

pub struct Outcome {
    pub stdout: String,
    pub exit: Exit,
}

type CmdResult = Result<Outcome, Failure>;

struct Loaded {
    bundle: CaseBundle,
    opts: ResolveOptions,
}

fn parse_failure(path: &str, errs: &[ParseError]) -> Failure {
    let lines: Vec<String> = errs.iter().map(|e| format!("{path}: {e}")).collect();
    Failure::usage(lines.join("\n"))
}

fn load(eval: &EvalArgs) -> Result<Loaded, Failure> {
    let path = eval.file.display().to_string();
    let text = fs::read_to_string(&eval.file)
        .map_err(|e| Failure::usage(format!("cannot read {path}: {e}")))?;
    let (mut bundle, map) =
        dsl::parse_unvalidated(&text).map_err(|errs| parse_failure(&path, &errs))?;

    if let Some(t) = eval.at_time {
        if !t.is_finite() || t < 0.0 {
            return Err(Failure::usage(format!(
                "--at-time must be a non-negative number of hours, got {t}"
            )));
        }
    }
    if let Some(ScopeEvidence {
        form: ScopeForm::Profile(points),
        ..
    }) = &bundle.scope
    {
        if bundle.mission_time.is_none() {
            match (eval.at_time, points.first()) {
                (Some(t), _) => bundle.mission_time = Some(t),
                (None, Some(first)) => {
                    eprintln!(
                        "warning: {path}: no mission_time; evaluating the scope profile at its first point ({} h), pass --at-time to choose",
                        first.hours
                    );
                    bundle.mission_time = Some(first.hours);
                }
                (None, None) => {}
            }
        }
    }
    let errs = validate_bundle(&bundle);
    if !errs.is_empty() {
        return Err(parse_failure(&path, &dsl::locate_errors(&errs, &map)));
    }

    let interval = IntervalMethod::from(eval.interval);
    if !interval.is_conservative() {
        eprintln!("warning: {interval} intervals are not conservative; the bound carries no coverage guarantee");
    }
    Ok(Loaded {
        bundle,
        opts: ResolveOptions {
            mode: eval.mode.into(),
            interval,
            at_time: eval.at_time,
        },
    })
}

fn resolve(l: &Loaded) -> Result<ResolvedEstimates, Failure> {
    resolve_with(&l.bundle, &l.opts).map_err(|e| match e {
        EvidenceError::Stats(s) => Failure::internal(s.to_string()),
        other => Failure::usage(other.to_string()),
    })
}

fn budget_failure(e: BudgetError) -> Failure {
    match e {
        BudgetError::Denominator { .. } => Failure {
            exit: Exit::NotSatisfied,
            message: format!("infeasible: {e}"),
        },
        BudgetError::SweepDomain(_) | BudgetError::Evidence(_) => Failure::usage(e.to_string()),
        BudgetError::Stats(_) => Failure::internal(e.to_string()),
    }
}

struct Evaluation {
    estimates: ResolvedEstimates,
    report: BoundReport,
    tree: ArgumentNode,
}

fn evaluate(l: &Loaded) -> Result<Evaluation, Failure> {
    let estimates = resolve(l)?;
    let case = applicable_case(&l.bundle);
    let report = evaluate_bound(&estimates, case, &l.bundle.target).map_err(budget_failure)?;
    let tree = build_tree(&l.bundle, &report);
    Ok(Evaluation {
        estimates,
        report,
        tree,
    })
}

fn json<T: Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| Failure::internal(e.to_string()))
}

/// JSON form of `check`.
#[derive(Serialize)]
struct CheckReport<'a> {
    case_id: &'a str,
    mode: ConfidenceMode,
    interval: IntervalMethod,
    estimates: &'a ResolvedEstimates,
    report: &'a BoundReport,
    tree: &'a ArgumentNode,
}

pub fn check(eval: &EvalArgs, format: ReportFormat) -> CmdResult {
    let l = load(eval)?;
    let ev = evaluate(&l)?;
    let stdout = match format {
        ReportFormat::Json => json(&CheckReport {
            case_id: &l.bundle.id,
            mode: l.opts.mode,
            interval: l.opts.interval,
            estimates: &ev.estimates,
            report: &ev.report,
            tree: &ev.tree,
        })?,
        ReportFormat::Text => render::check_text(&l.bundle, &ev.estimates, &ev.report, &ev.tree),
        ReportFormat::Md => render::check_md(&l.bundle, &ev.estimates, &ev.report, &ev.tree),
    };
    let exit = if ev.report.verdict == Verdict::Satisfied {
        Exit::Satisfied
    } else {
        Exit::NotSatisfied
    };
    Ok(Outcome { stdout, exit })
}

fn probability(flag: &str, v: f64) -> Result<Probability, Failure> {
    Probability::new(v).map_err(|_| Failure::usage(format!("{flag} must lie in [0, 1], got {v}")))
}

fn confidence(v: f64) -> Result<ConfidenceLevel, Failure> {
    ConfidenceLevel::new(v)
        .map_err(|_| Failure::usage(format!("--cl must lie strictly between 0 and 1, got {v}")))
}

pub fn derive(
    eval: &EvalArgs,
    solve_for: SolveFor,
    expected_rate: Option<f64>,
    format: DeriveFormat,
) -> CmdResult {
    let l = load(eval)?;
    let r = resolve(&l)?;
    let case = applicable_case(&l.bundle);
    let opts = match solve_for {
        SolveFor::Failures => DeriveOptions {
            samples: Some(l.bundle.test.samples),
            ..Default::default()
        },
        SolveFor::Samples => {
            let rate = expected_rate.ok_or_else(|| {
                Failure::usage("--solve-for samples needs --expected-rate")
            })?;
            DeriveOptions {
                expected_rate: Some(probability("--expected-rate", rate)?),
                ..Default::default()
            }
        }
    };
    let d = derive_required_test_bound(&r, case, &l.bundle.target, &opts)
        .map_err(budget_failure)?;
    let feasible = d.required_u_test.is_feasible()
        && d.max_failures.is_none_or(|s| s.is_feasible())
        && d.min_samples.is_none_or(|s| s.is_feasible());
    let stdout = match format {
        DeriveFormat::Json => json(&d)?,
        DeriveFormat::Text => render::derive_text(&d, l.opts.mode),
    };
    Ok(Outcome {
        stdout,
        exit: if feasible {
            Exit::Satisfied
        } else {
            Exit::NotSatisfied
        },
    })
}

pub fn sensitivity(
    eval: &EvalArgs,
    param: SweepParam,
    from: f64,
    to: f64,
    steps: usize,
    out: TableFormat,
) -> CmdResult {
    let l = load(eval)?;
    let spec = SweepSpec {
        param,
        from,
        to,
        steps,
    };
    let rows = sensitivity_sweep(&l.bundle, &l.opts, &spec).map_err(|e| match e {
        BudgetError::Denominator { .. } | BudgetError::Stats(_) => Failure::usage(e.to_string()),
        other => budget_failure(other),
    })?;
    let stdout = match out {
        TableFormat::Json => json(&rows)?,
        TableFormat::Csv => render::sweep_csv(&rows).map_err(|e| Failure::internal(e.to_string()))?,
    };
    Ok(Outcome {
        stdout,
        exit: Exit::Satisfied,
    })
}

fn mc_failure(e: McError) -> Failure {
    match e {
        McError::Pool(_) => Failure::internal(e.to_string()),
        other => Failure::usage(other.to_string()),
    }
}

pub fn simulate(args: &SimulateArgs) -> CmdResult {
    if args.runs == 0 {
        return Err(Failure::usage("--runs must be at least 1"));
    }
    if args.n == 0 {
        return Err(Failure::usage("--n must be at least 1"));
    }
    let cl = confidence(args.cl)?;
    if args.grid {
        let rows = standard_grid(args.n, cl, args.runs, args.seed, args.workers).map_err(mc_failure)?;
        let stdout = grid_csv(&rows).map_err(|e| Failure::internal(e.to_string()))?;
        return Ok(Outcome {
            stdout,
            exit: Exit::Satisfied,
        });
    }
    let truth = GroundTruth {
        p_srf: probability("--true-srf", args.true_srf)?,
        p_oos: probability("--true-oos", args.true_oos)?,
        p_detect_srf: probability("--true-detect-srf", args.true_detect_srf)?,
        p_detect_oos: probability("--true-detect-oos", args.true_detect_oos)?,
        p_lf: probability("--true-lf", args.true_lf)?,
    };
    let design = CampaignDesign {
        n_test: args.n,
        n_detect_eval: args.n_detect.map_or(DetectEval::DerivedFromSrfs, DetectEval::Fixed),
        cl,
        mode: args.mode.into(),
        case: args.case,
    };
    let report =
        coverage_experiment(&truth, &design, args.runs, args.seed, args.workers).map_err(mc_failure)?;
    Ok(Outcome {
        stdout: json(&report)?,
        exit: Exit::Satisfied,
    })
}

pub fn render(eval: &EvalArgs, format: TreeFormat) -> CmdResult {
    let l = load(eval)?;
    let ev = evaluate(&l)?;
    let stdout = match format {
        TreeFormat::Dot => export_dot(&ev.tree),
        TreeFormat::Json => {
            let mut s = export_json(&ev.tree);
            s.push('\n');
            s
        }
    };
    Ok(Outcome {
        stdout,
        exit: Exit::Satisfied,
    })
}

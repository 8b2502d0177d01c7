//! Monte Carlo check of the composed bounds.
//!
//! Ground-truth rates are fixed, test and detection campaigns are sampled,
//! and the resulting bound is compared with the true violation probability.
//! The fraction of runs where the bound holds is its empirical coverage.

pub mod rng;

use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::binomial::{ConfidenceLevel, Count, IntervalMethod, Probability};
use crate::budget::{evaluate_bound, BaseCase, CaseId};
use crate::evidence::{
    resolve_with, CaseBundle, ConfidenceMode, DetectionEvidence, DetectionForm, DetectionKind,
    LabelQuality, ResolveOptions, SafetyTarget, ScopeEvidence, ScopeForm, TestEvidence,
};

pub use rng::CounterRng;

/// Largest number of violating run indices kept in a report.
pub const MAX_REPORTED_VIOLATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// True safety-related failure rate inside the scope.
    pub p_srf: Probability,
    pub p_oos: Probability,
    pub p_detect_srf: Probability,
    pub p_detect_oos: Probability,
    /// Labeling-fault rate; every fault hides a safety-related failure.
    pub p_lf: Probability,
}

impl GroundTruth {
    pub fn srf_only(p_srf: Probability) -> Self {
        GroundTruth {
            p_srf,
            p_oos: Probability::ZERO,
            p_detect_srf: Probability::ZERO,
            p_detect_oos: Probability::ZERO,
            p_lf: Probability::ZERO,
        }
    }

    /// True probability of an unflagged safety-related failure, taking every
    /// out-of-scope use as a failure.
    pub fn p_true(&self) -> f64 {
        let (s, o, d, d_oos) = (
            self.p_srf.value(),
            self.p_oos.value(),
            self.p_detect_srf.value(),
            self.p_detect_oos.value(),
        );
        s * (1.0 - o) * (1.0 - d) + o * (1.0 - d_oos)
    }

    pub fn check(&self) -> Result<(), McError> {
        if 1.0 - self.p_oos.value() < self.p_detect_srf.value() {
            return Err(McError::Preposition {
                p_oos: self.p_oos.value(),
                p_detect_srf: self.p_detect_srf.value(),
            });
        }
        Ok(())
    }
}

/// Size of the detection evaluation campaign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectEval {
    /// Detection is evaluated on the safety-related failures of the test set.
    #[default]
    DerivedFromSrfs,
    Fixed(Count),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CampaignDesign {
    pub n_test: Count,
    pub n_detect_eval: DetectEval,
    pub cl: ConfidenceLevel,
    pub mode: ConfidenceMode,
    pub case: CaseId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimOutcome {
    /// Failures observed on the (possibly mislabeled) test set.
    pub k_test: Count,
    /// Detections in the detection evaluation campaign.
    pub detected: Count,
    /// Size of the detection evaluation campaign.
    pub detect_total: Count,
    /// True safety-related failures in the test set.
    pub srf_count: Count,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub runs: Count,
    pub covered: Count,
    pub coverage: f64,
    /// Mean of `bound - p_true` over covered runs, 0 when none is covered.
    pub mean_slack: f64,
    pub seed: u64,
    /// Indices of runs whose bound fell below the true value.
    pub violations: Vec<Count>,
}

impl CoverageReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("coverage reports always serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McError {
    #[error("ground truth violates 1 - p_oos >= p_detect_srf (p_oos = {p_oos}, p_detect_srf = {p_detect_srf})")]
    Preposition { p_oos: f64, p_detect_srf: f64 },
    #[error("at least one run is required")]
    NoRuns,
    #[error("n_test must be at least 1")]
    NoSamples,
    #[error("could not build worker pool: {0}")]
    Pool(String),
}

fn binomial(n: Count, p: f64, rng: &mut CounterRng) -> Count {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    // n >= 1 and p in (0, 1] are always accepted.
    Binomial::new(n, p.min(1.0))
        .map(|b| b.sample(rng))
        .unwrap_or(0)
}

/// Simulates one test campaign and its detection evaluation.
pub fn simulate_campaign(truth: &GroundTruth, design: &CampaignDesign, seed: u64) -> SimOutcome {
    simulate_run(truth, design, &mut CounterRng::for_run(seed, 0))
}

fn simulate_run(truth: &GroundTruth, design: &CampaignDesign, rng: &mut CounterRng) -> SimOutcome {
    let n = design.n_test;
    let visible = (truth.p_srf.value() - truth.p_lf.value()).max(0.0);
    let k_test = binomial(n, visible, rng);
    let srf_count = binomial(n, truth.p_srf.value(), rng);
    let detect_total = match design.n_detect_eval {
        DetectEval::DerivedFromSrfs => srf_count,
        DetectEval::Fixed(m) => m,
    };
    let detected = binomial(detect_total, truth.p_detect_srf.value(), rng);
    SimOutcome {
        k_test,
        detected,
        detect_total,
        srf_count,
    }
}

/// The bundle an analyst would declare after observing `sim`.
///
/// Expert quantities are taken from the ground truth as exact. A detection
/// campaign without any failure to evaluate takes no detection credit.
pub fn bundle_for(truth: &GroundTruth, design: &CampaignDesign, sim: &SimOutcome) -> CaseBundle {
    let case = design.case;
    let mut b = CaseBundle::minimal(
        "simulated",
        SafetyTarget {
            p_target: Probability::new(0.5).unwrap_or(Probability::ONE),
            confidence: design.cl,
        },
        TestEvidence {
            samples: design.n_test,
            failures: sim.k_test,
        },
    );
    if case.base >= BaseCase::C {
        b.assumptions.clear();
        b.scope = Some(ScopeEvidence {
            form: ScopeForm::Point(truth.p_oos),
            source: None,
        });
    }
    if case.base >= BaseCase::D && sim.detect_total > 0 {
        b.detect_srf = Some(DetectionEvidence {
            kind: DetectionKind::Srf,
            form: DetectionForm::Campaign {
                detected: sim.detected,
                total: sim.detect_total,
            },
            source: None,
        });
    }
    if case.base == BaseCase::E {
        b.detect_oos = Some(DetectionEvidence {
            kind: DetectionKind::Oos,
            form: DetectionForm::Point(truth.p_detect_oos),
            source: None,
        });
    }
    if case.label_adjusted {
        b.labels = Some(LabelQuality::Rate(truth.p_lf));
    }
    b
}

/// Bound computed from one simulated campaign, `None` if no bound exists.
fn run_bound(truth: &GroundTruth, design: &CampaignDesign, seed: u64, index: u64) -> Option<f64> {
    let sim = simulate_run(truth, design, &mut CounterRng::for_run(seed, index));
    let bundle = bundle_for(truth, design, &sim);
    let opts = ResolveOptions {
        mode: design.mode,
        interval: IntervalMethod::ClopperPearson,
        at_time: None,
    };
    let r = resolve_with(&bundle, &opts).ok()?;
    evaluate_bound(&r, design.case, &bundle.target)
        .ok()
        .map(|rep| rep.p_safe_upper)
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool, McError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| McError::Pool(e.to_string()))
}

fn check_inputs(truth: &GroundTruth, design: &CampaignDesign, runs: Count) -> Result<(), McError> {
    truth.check()?;
    if runs == 0 {
        return Err(McError::NoRuns);
    }
    if design.n_test == 0 {
        return Err(McError::NoSamples);
    }
    Ok(())
}

/// Measures how often the composed bound is at least the true value.
///
/// `workers` sets the thread count (`None` uses all cores); the report does
/// not depend on it.
pub fn coverage_experiment(
    truth: &GroundTruth,
    design: &CampaignDesign,
    runs: Count,
    seed: u64,
    workers: Option<usize>,
) -> Result<CoverageReport, McError> {
    check_inputs(truth, design, runs)?;
    let bounds: Vec<Option<f64>> = pool(workers)?.install(|| {
        (0..runs)
            .into_par_iter()
            .map(|i| run_bound(truth, design, seed, i))
            .collect()
    });

    let p_true = truth.p_true();
    let mut covered: Count = 0;
    let mut slack = 0.0;
    let mut violations = Vec::new();
    for (i, b) in bounds.into_iter().enumerate() {
        match b {
            Some(u) if u >= p_true => {
                covered += 1;
                slack += u - p_true;
            }
            _ => {
                if violations.len() < MAX_REPORTED_VIOLATIONS {
                    violations.push(i as Count);
                }
            }
        }
    }
    Ok(CoverageReport {
        runs,
        covered,
        coverage: covered as f64 / runs as f64,
        mean_slack: if covered > 0 { slack / covered as f64 } else { 0.0 },
        seed,
        violations,
    })
}

/// `cl - 3 sigma` of the binomial sampling noise on `runs` coverage trials.
pub fn coverage_floor(cl: f64, runs: Count) -> f64 {
    cl - 3.0 * (cl * (1.0 - cl) / runs as f64).sqrt()
}

/// Gap between the factored violation probability
/// `u (1 - p_oos)(1 - l) + p_oos (1 - p_detect_oos)` and the linearized bound
/// `u (1 - p_oos - l) + p_oos (1 - p_detect_oos)`, which is `u p_oos l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearizationSlack {
    /// `p_oos (p_srf - p_lf) p_detect_srf`, the gap at the expected point estimates.
    pub analytic: f64,
    /// Mean gap over runs, evaluated at the point estimates `k/n` and `d/m`.
    pub measured: f64,
    /// Standard error of `measured`.
    pub std_error: f64,
    pub runs: Count,
}

impl LinearizationSlack {
    pub fn z_score(&self) -> f64 {
        if self.std_error > 0.0 {
            (self.measured - self.analytic) / self.std_error
        } else {
            0.0
        }
    }
}

pub fn linearization_slack(
    truth: &GroundTruth,
    design: &CampaignDesign,
    runs: Count,
    seed: u64,
    workers: Option<usize>,
) -> Result<LinearizationSlack, McError> {
    check_inputs(truth, design, runs)?;
    let p_oos = truth.p_oos.value();
    let gaps: Vec<f64> = pool(workers)?.install(|| {
        (0..runs)
            .into_par_iter()
            .map(|i| {
                let sim = simulate_run(truth, design, &mut CounterRng::for_run(seed, i));
                let u = sim.k_test as f64 / design.n_test as f64;
                let l = if sim.detect_total > 0 {
                    sim.detected as f64 / sim.detect_total as f64
                } else {
                    0.0
                };
                u * p_oos * l
            })
            .collect()
    });
    let n = gaps.len() as f64;
    let mean = gaps.iter().sum::<f64>() / n;
    let var = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let visible = (truth.p_srf.value() - truth.p_lf.value()).max(0.0);
    Ok(LinearizationSlack {
        analytic: p_oos * visible * truth.p_detect_srf.value(),
        measured: mean,
        std_error: (var / n).sqrt(),
        runs,
    })
}

/// One point of a coverage grid, compared under both confidence modes with
/// identical seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub p_srf: f64,
    pub p_lf: f64,
    pub p_oos: f64,
    pub p_detect_srf: f64,
    pub case: CaseId,
    pub runs: Count,
    pub paper_coverage: f64,
    pub bonferroni_coverage: f64,
    pub floor: f64,
    pub paper_mean_slack: f64,
    pub bonferroni_mean_slack: f64,
}

impl GridRow {
    pub fn meets_floor(&self) -> bool {
        self.paper_coverage >= self.floor
    }

    pub fn modes_ordered(&self) -> bool {
        self.bonferroni_coverage >= self.paper_coverage
    }
}

/// Ground truth used for each case in the standard grid: scope and
/// detection rates are only non-zero for the cases that claim them.
pub fn grid_truth(p_srf: f64, p_lf: f64, base: BaseCase) -> GroundTruth {
    let p = |v: f64| Probability::saturating(v);
    GroundTruth {
        p_srf: p(p_srf),
        p_oos: p(if base >= BaseCase::C { 0.0005 } else { 0.0 }),
        p_detect_srf: p(if base >= BaseCase::D { 0.3 } else { 0.0 }),
        p_detect_oos: Probability::ZERO,
        p_lf: p(p_lf),
    }
}

/// Runs both confidence modes on `truth` with the same seed.
pub fn grid_point(
    truth: &GroundTruth,
    n_test: Count,
    cl: ConfidenceLevel,
    case: CaseId,
    runs: Count,
    seed: u64,
    workers: Option<usize>,
) -> Result<GridRow, McError> {
    let design = |mode| CampaignDesign {
        n_test,
        n_detect_eval: DetectEval::DerivedFromSrfs,
        cl,
        mode,
        case,
    };
    let paper = coverage_experiment(truth, &design(ConfidenceMode::PaperFaithful), runs, seed, workers)?;
    let bonf = coverage_experiment(truth, &design(ConfidenceMode::Bonferroni), runs, seed, workers)?;
    Ok(GridRow {
        p_srf: truth.p_srf.value(),
        p_lf: truth.p_lf.value(),
        p_oos: truth.p_oos.value(),
        p_detect_srf: truth.p_detect_srf.value(),
        case,
        runs,
        paper_coverage: paper.coverage,
        bonferroni_coverage: bonf.coverage,
        floor: coverage_floor(cl.value(), runs),
        paper_mean_slack: paper.mean_slack,
        bonferroni_mean_slack: bonf.mean_slack,
    })
}

/// The standard grid: `p_srf` in {0.0005, 0.0018, 0.01}, `p_lf` in {0, 0.001}
/// and cases B, C, D, with the label adjustment on whenever `p_lf > 0`.
pub fn standard_grid(
    n_test: Count,
    cl: ConfidenceLevel,
    runs: Count,
    seed: u64,
    workers: Option<usize>,
) -> Result<Vec<GridRow>, McError> {
    let mut rows = Vec::new();
    for p_srf in [0.0005, 0.0018, 0.01] {
        for p_lf in [0.0, 0.001] {
            for base in [BaseCase::B, BaseCase::C, BaseCase::D] {
                let truth = grid_truth(p_srf, p_lf, base);
                let case = CaseId::new(base, p_lf > 0.0);
                rows.push(grid_point(&truth, n_test, cl, case, runs, seed, workers)?);
            }
        }
    }
    Ok(rows)
}

pub fn grid_csv(rows: &[GridRow]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

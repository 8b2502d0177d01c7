//! `qcase`: evaluate quantitative safety cases from `.qcase` files.

mod commands;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qcase_core::budget::{CaseId, SweepParam};
use qcase_core::{ConfidenceMode, IntervalMethod};

/// Exit statuses, one per outcome class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Satisfied = 0,
    NotSatisfied = 1,
    Usage = 2,
    Internal = 3,
}

impl From<Exit> for ExitCode {
    fn from(e: Exit) -> ExitCode {
        ExitCode::from(e as u8)
    }
}

/// A failed command: what to print on stderr and how to exit.
#[derive(Debug)]
pub struct Failure {
    pub exit: Exit,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            exit: Exit::Usage,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Failure {
            exit: Exit::Internal,
            message: message.into(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qcase", version, about = "Quantitative safety bounds for data-driven components")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Paper,
    Bonferroni,
}

impl From<Mode> for ConfidenceMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Paper => ConfidenceMode::PaperFaithful,
            Mode::Bonferroni => ConfidenceMode::Bonferroni,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Interval {
    ClopperPearson,
    Wilson,
    Normal,
}

impl From<Interval> for IntervalMethod {
    fn from(i: Interval) -> Self {
        match i {
            Interval::ClopperPearson => IntervalMethod::ClopperPearson,
            Interval::Wilson => IntervalMethod::Wilson,
            Interval::Normal => IntervalMethod::Normal,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Case file.
    pub file: PathBuf,
    /// How the confidence level is shared among statistical bounds.
    #[arg(long, value_enum, default_value = "paper")]
    pub mode: Mode,
    /// Interval method for the statistical bounds (only clopper-pearson is conservative).
    #[arg(long, value_enum, default_value = "clopper-pearson")]
    pub interval: Interval,
    /// Mission time in hours at which a scope profile is evaluated.
    #[arg(long, value_name = "HOURS")]
    pub at_time: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Json,
    Md,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolveFor {
    Failures,
    Samples,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DeriveFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TreeFormat {
    Dot,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate the bound and the argument for a case file.
    Check {
        #[command(flatten)]
        eval: EvalArgs,
        #[arg(long, value_enum, default_value = "text")]
        format: ReportFormat,
    },
    /// Derive the test bound, failure count or sample size the target requires.
    Derive {
        #[command(flatten)]
        eval: EvalArgs,
        #[arg(long, value_enum, default_value = "failures")]
        solve_for: SolveFor,
        /// Expected failure rate, needed to plan a sample size.
        #[arg(long, value_name = "P")]
        expected_rate: Option<f64>,
        #[arg(long, value_enum, default_value = "text")]
        format: DeriveFormat,
    },
    /// Sweep one parameter and re-evaluate the case at each point.
    Sensitivity {
        #[command(flatten)]
        eval: EvalArgs,
        /// One of p_oos, p_detect_srf, p_detect_oos, p_lf, samples, failures, cl.
        #[arg(long, value_parser = parse_sweep_param)]
        vary: SweepParam,
        #[arg(long, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, allow_negative_numbers = true)]
        to: f64,
        #[arg(long, default_value_t = 11)]
        steps: usize,
        #[arg(long, value_enum, default_value = "csv")]
        out: TableFormat,
    },
    /// Measure the empirical coverage of the bound by simulation.
    Simulate(SimulateArgs),
    /// Export the argument tree.
    Render {
        #[command(flatten)]
        eval: EvalArgs,
        #[arg(long, value_enum, default_value = "dot")]
        format: TreeFormat,
    },
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// True safety-related failure rate inside the scope.
    #[arg(long, default_value_t = 0.0)]
    pub true_srf: f64,
    #[arg(long, default_value_t = 0.0)]
    pub true_oos: f64,
    #[arg(long, default_value_t = 0.0)]
    pub true_detect_srf: f64,
    #[arg(long, default_value_t = 0.0)]
    pub true_detect_oos: f64,
    #[arg(long, default_value_t = 0.0)]
    pub true_lf: f64,
    /// Test campaign size.
    #[arg(long, default_value_t = 100_000)]
    pub n: u64,
    /// Size of the detection evaluation campaign (default: the simulated failures).
    #[arg(long)]
    pub n_detect: Option<u64>,
    #[arg(long, default_value_t = 0.99)]
    pub cl: f64,
    #[arg(long, value_parser = parse_case, default_value = "B")]
    pub case: CaseId,
    #[arg(long, value_enum, default_value = "paper")]
    pub mode: Mode,
    #[arg(long, default_value_t = 10_000)]
    pub runs: u64,
    /// Mandatory so that every simulation is reproducible.
    #[arg(long)]
    pub seed: u64,
    /// Worker threads; the report does not depend on this.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Run the standard coverage grid and print it as CSV instead.
    #[arg(long)]
    pub grid: bool,
}

fn parse_sweep_param(s: &str) -> Result<SweepParam, String> {
    s.parse()
}

fn parse_case(s: &str) -> Result<CaseId, String> {
    s.parse()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                Exit::Usage.into()
            } else {
                Exit::Satisfied.into()
            };
        }
    };
    let result = match cli.command {
        Command::Check { eval, format } => commands::check(&eval, format),
        Command::Derive {
            eval,
            solve_for,
            expected_rate,
            format,
        } => commands::derive(&eval, solve_for, expected_rate, format),
        Command::Sensitivity {
            eval,
            vary,
            from,
            to,
            steps,
            out,
        } => commands::sensitivity(&eval, vary, from, to, steps, out),
        Command::Simulate(args) => commands::simulate(&args),
        Command::Render { eval, format } => commands::render(&eval, format),
    };
    match result {
        Ok(out) => {
            print!("{}", out.stdout);
            out.exit.into()
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.exit.into()
        }
    }
}

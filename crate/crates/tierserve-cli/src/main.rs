//! Experiment runner CLI.
//!
//! Subcommands: `run`, `compare`, `theory`, `calibrate`, `validate-trace`.
//! Exit codes: 0 ok, 1 config error, 2 trace error, 3 runtime error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tierserve::config::{load_config, ExperimentConfig, ReportFormat};
use tierserve::experiment::RunError;
use tierserve::report;
use tierserve::workload::{validate_trace, WorkloadError};

#[derive(Parser)]
#[command(name = "tierserve", version, about = "Multi-tier offloading simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    format: Option<ReportFormat>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured method and emit the per-method report.
    Run(RunArgs),
    /// Run at least two methods and emit the quality/burden trade-off table.
    Compare(RunArgs),
    /// Print the closed-form predictors over a beta grid.
    Theory {
        /// Per-tier compute costs, device first, e.g. 1,5,20.
        #[arg(long, value_delimiter = ',', default_value = "1,5,20")]
        costs: Vec<f64>,
        /// Beta grid.
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6")]
        betas: Vec<f64>,
        /// Mean input-plus-output payload, bytes.
        #[arg(long, default_value_t = 120.0)]
        mean_payload: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Calibrate beta against the config's [calibrate] budget.
    Calibrate(RunArgs),
    /// Check a JSONL trace file and print diagnostics.
    ValidateTrace {
        path: PathBuf,
        /// Report at most this many violations.
        #[arg(long, default_value_t = 20)]
        max_violations: usize,
    },
}

const EXIT_CONFIG: u8 = 1;
const EXIT_TRACE: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn fail(code: u8, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(code)
}

fn run_error_code(err: &RunError) -> u8 {
    match err {
        RunError::Config(_) => EXIT_CONFIG,
        RunError::Trace(WorkloadError::InvalidSpec(_)) => EXIT_CONFIG,
        RunError::Trace(_) => EXIT_TRACE,
        _ => EXIT_RUNTIME,
    }
}

fn emit(out: Option<&PathBuf>, content: &str) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, content),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn load(args: &RunArgs) -> Result<ExperimentConfig, String> {
    let mut config = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.report.out = Some(out.clone());
    }
    if let Some(format) = args.format {
        config.report.format = format;
    }
    Ok(config)
}

fn render_report(
    config: &ExperimentConfig,
    report: &tierserve::ExperimentReport,
    compare_table: bool,
) -> String {
    match config.report.format {
        ReportFormat::Json => {
            serde_json::to_string_pretty(report).expect("report serializes") + "\n"
        }
        ReportFormat::Csv if compare_table => report::render_compare_csv(report),
        ReportFormat::Csv => report::render_run_csv(report),
    }
}

fn cmd_run(args: RunArgs, compare_table: bool) -> ExitCode {
    let config = match load(&args) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let result = if compare_table {
        tierserve::compare(&config)
    } else {
        tierserve::run(&config)
    };
    match result {
        Ok(report) => {
            let content = render_report(&config, &report, compare_table);
            match emit(config.report.out.as_ref(), &content) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(EXIT_RUNTIME, e),
            }
        }
        Err(e) => {
            let code = run_error_code(&e);
            fail(code, e)
        }
    }
}

fn cmd_calibrate(args: RunArgs) -> ExitCode {
    let config = match load(&args) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    match tierserve::run_calibration(&config) {
        Ok(trace) => {
            let content = match config.report.format {
                ReportFormat::Json => {
                    serde_json::to_string_pretty(&trace).expect("trace serializes") + "\n"
                }
                ReportFormat::Csv => report::render_calibration_csv(&trace),
            };
            match emit(config.report.out.as_ref(), &content) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(EXIT_RUNTIME, e),
            }
        }
        Err(e) => {
            let code = run_error_code(&e);
            fail(code, e)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => cmd_run(args, false),
        Command::Compare(args) => cmd_run(args, true),
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::Theory {
            costs,
            betas,
            mean_payload,
            out,
        } => match report::render_theory_csv(&betas, &costs, mean_payload) {
            Ok(csv) => match emit(out.as_ref(), &csv) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(EXIT_RUNTIME, e),
            },
            Err(e) => fail(EXIT_CONFIG, e),
        },
        Command::ValidateTrace {
            path,
            max_violations,
        } => {
            let diag = validate_trace(&path, max_violations);
            print!("{diag}");
            if diag.io_error.is_some() {
                ExitCode::from(EXIT_TRACE)
            } else {
                ExitCode::SUCCESS
            }
        }
    }
}

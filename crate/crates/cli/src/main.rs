//! `ctrldom`: domain-of-control analysis, scoring, comparison and plot data.

mod analyze;
mod compare;
mod input;
mod plot;
mod score;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ctrldom::report::{Algorithm, AnalysisOptions};
use ctrldom::solver::{SolverConfig, DEFAULT_BUDGET_BITS, DEFAULT_SOLVER_CMD, SOLVER_CMD_ENV};

#[derive(Parser)]
#[command(name = "ctrldom", version, about = "Measure how much an attacker controls a value at a program point")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the domain of control of a target and write a JSON report.
    Analyze(analyze::AnalyzeArgs),
    /// Score domains from reports or domain files with a recipe.
    Score(score::ScoreArgs),
    /// Run several algorithms on one input and compare their domains.
    Compare(compare::CompareArgs),
    /// Dump the intervals of a report as CSV.
    Plot(plot::PlotArgs),
    /// List the built-in fixtures.
    Fixtures,
}

#[derive(Args, Clone, Debug)]
#[group(required = true, multiple = false)]
pub struct Source {
    /// SMT-LIB2 file with a `ctrl-target:` annotation.
    #[arg(long, value_name = "FILE")]
    pub smt2: Option<PathBuf>,
    /// Built-in toy program (see `ctrldom fixtures`).
    #[arg(long, value_name = "NAME")]
    pub fixture: Option<String>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum SolverKind {
    Internal,
    External,
}

#[derive(Args, Clone, Debug)]
pub struct EngineArgs {
    /// Sink label to analyze (fixtures only; default: the fixture's own).
    #[arg(long)]
    pub sink: Option<String>,
    /// Global split budget for shrink-and-split.
    #[arg(long, default_value_t = ctrldom::control::DEFAULT_SPLIT_LIMIT)]
    pub split_limit: u64,
    #[arg(long, value_enum, default_value_t = SolverKind::Internal)]
    pub solver: SolverKind,
    /// External solver command line [default: $CTRL_SOLVER_CMD or `z3 -in`].
    #[arg(long, value_name = "CMD")]
    pub solver_cmd: Option<String>,
    /// Per-query timeout for the external solver.
    #[arg(long, value_name = "MS", default_value_t = 300_000)]
    pub timeout: u64,
    /// Input bits the internal enumerator may cover.
    #[arg(long, default_value_t = DEFAULT_BUDGET_BITS)]
    pub budget_bits: u32,
    /// Seed for the sampling baseline.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl EngineArgs {
    pub fn solver_command(&self) -> Option<String> {
        match self.solver {
            SolverKind::Internal => None,
            SolverKind::External => Some(
                self.solver_cmd
                    .clone()
                    .or_else(|| std::env::var(SOLVER_CMD_ENV).ok())
                    .unwrap_or_else(|| DEFAULT_SOLVER_CMD.to_string()),
            ),
        }
    }

    pub fn options(&self) -> Result<AnalysisOptions> {
        if self.timeout == 0 {
            bail!("--timeout must be positive");
        }
        let base = match self.solver_command() {
            None => SolverConfig::internal(),
            Some(cmd) => SolverConfig::external_command(&cmd),
        };
        let solver = base.with_timeout(Duration::from_millis(self.timeout)).with_budget(self.budget_bits);
        Ok(AnalysisOptions { split_limit: self.split_limit, solver, seed: self.seed })
    }
}

pub fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Analyze(a) => analyze::run(&a),
        Command::Score(a) => score::run(&a),
        Command::Compare(a) => compare::run(&a),
        Command::Plot(a) => plot::run(&a),
        Command::Fixtures => input::list_fixtures(),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

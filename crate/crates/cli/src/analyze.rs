use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Args;
use ctrldom::newsome::NewsomeConfig;
use ctrldom::report::{
    analyze_target, plot_rows, AnalysisReport, ConfigInfo, RunInfo, ToolInfo, SCHEMA_VERSION,
};
use ctrldom::report::Algorithm;
use log::info;

use crate::input::{emit, load};
use crate::plot::write_csv;
use crate::{parse_algorithm, EngineArgs, SolverKind, Source};

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub source: Source,
    /// sns, snsfb, newsome, brute, wc or sc.
    #[arg(long, default_value = "sns", value_parser = parse_algorithm)]
    pub algo: Algorithm,
    #[command(flatten)]
    pub engine: EngineArgs,
    /// JSON report path [default: stdout].
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Also dump the intervals as CSV.
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
}

pub fn config_info(algo: Algorithm, engine: &EngineArgs) -> ConfigInfo {
    ConfigInfo {
        algorithm: algo,
        split_limit: engine.split_limit,
        solver: match engine.solver {
            SolverKind::Internal => "internal".into(),
            SolverKind::External => "external".into(),
        },
        solver_command: engine.solver_command(),
        timeout_ms: engine.timeout,
        budget_bits: engine.budget_bits,
        seed: engine.seed,
        newsome: (algo == Algorithm::Newsome).then(|| NewsomeConfig::with_seed(engine.seed)),
    }
}

/// Runs one analysis and builds its report.
pub fn analyze(source: &Source, algo: Algorithm, engine: &EngineArgs) -> Result<AnalysisReport> {
    let started = Instant::now();
    let input = load(source, engine.sink.as_deref())?;
    let options = engine.options()?;
    let hint = if input.needs_external && engine.solver == SolverKind::Internal {
        " (this fixture needs --solver external)"
    } else {
        ""
    };
    let (mut target, _) = analyze_target(&input.name, &input.state, &input.target, algo, &options)
        .with_context(|| format!("{algo} failed on {}{hint}", input.name))?;
    target.concrete = input.concrete;
    let solver_ms = target.solver.elapsed.as_secs_f64() * 1e3;
    info!("{}: {} queries", target.name, target.solver.queries);
    Ok(AnalysisReport {
        schema_version: SCHEMA_VERSION.into(),
        tool: ToolInfo::default(),
        input: input.info,
        config: config_info(algo, engine),
        targets: vec![target],
        run: RunInfo {
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
            solver_ms,
        },
    })
}

pub fn run(args: &AnalyzeArgs) -> Result<u8> {
    let report = analyze(&args.source, args.algo, &args.engine)?;
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    emit(args.out.as_deref(), &json)?;
    if let Some(path) = &args.csv {
        let file = std::fs::File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
        write_csv(file, &plot_rows(&report))?;
    }
    Ok(if report.exact() { 0 } else { 2 })
}

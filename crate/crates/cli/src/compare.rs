use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Args;
use ctrldom::control::{brute_force_domain, Check, ControlDomain};
use ctrldom::report::{analyze_target, Algorithm, InputInfo, RunInfo, SCHEMA_VERSION};
use log::warn;
use serde::Serialize;

use crate::input::{emit, load};
use crate::{parse_algorithm, EngineArgs, Source};

/// Largest represented set enumerated for inclusion checks.
const MAX_ENUMERATED: u128 = 1 << 20;

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[command(flatten)]
    pub source: Source,
    /// Algorithms to run, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "sns,snsfb,newsome,brute", value_parser = parse_algorithm)]
    pub algos: Vec<Algorithm>,
    #[command(flatten)]
    pub engine: EngineArgs,
    /// JSON result path; the table always goes to stdout.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Equal,
    Subset,
    Superset,
    Incomparable,
}

#[derive(Debug, Serialize)]
pub struct Row {
    pub algorithm: Algorithm,
    /// Represented values (an upper bound for approximate domains).
    pub count: Option<String>,
    pub intervals: Option<usize>,
    pub exact: bool,
    pub budget_exhausted: Option<bool>,
    pub wc: Option<Check>,
    pub sc: Option<Check>,
    /// Represented set against the enumeration oracle.
    pub vs_oracle: Option<Relation>,
    /// Strong values ⊆ oracle ⊆ represented values.
    pub sound: Option<bool>,
    pub queries: u64,
    pub error: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub schema_version: String,
    pub input: InputInfo,
    pub target: String,
    pub seed: String,
    pub oracle_count: Option<String>,
    pub rows: Vec<Row>,
    /// Per-algorithm wall time, kept apart from the reproducible rows.
    pub wall_ms: Vec<(Algorithm, f64)>,
    pub run: RunInfo,
}

fn value_set(values: impl Iterator<Item = u64>) -> BTreeSet<u64> {
    values.collect()
}

fn relation(a: &BTreeSet<u64>, b: &BTreeSet<u64>) -> Relation {
    match (a.is_subset(b), b.is_subset(a)) {
        (true, true) => Relation::Equal,
        (true, false) => Relation::Subset,
        (false, true) => Relation::Superset,
        (false, false) => Relation::Incomparable,
    }
}

fn enumerable(d: &ControlDomain) -> bool {
    d.count() <= MAX_ENUMERATED
}

pub fn compare(args: &CompareArgs) -> Result<Comparison> {
    let started = Instant::now();
    let input = load(&args.source, args.engine.sink.as_deref())?;
    let options = args.engine.options()?;
    let oracle = match brute_force_domain(&input.state, &input.target, options.solver.budget_bits) {
        Ok(d) => Some(d),
        Err(e) => {
            warn!("no enumeration oracle: {e}");
            None
        }
    };
    let truth = oracle.as_ref().filter(|d| enumerable(d)).map(|d| value_set(d.values()));
    let mut rows = Vec::new();
    let mut wall_ms = Vec::new();
    let mut solver_ms = 0.0;
    for &algo in &args.algos {
        let t = Instant::now();
        let result = analyze_target(&input.name, &input.state, &input.target, algo, &options);
        wall_ms.push((algo, t.elapsed().as_secs_f64() * 1e3));
        let (report, _) = match result {
            Ok(r) => r,
            Err(e) => {
                rows.push(Row {
                    algorithm: algo,
                    count: None,
                    intervals: None,
                    exact: false,
                    budget_exhausted: None,
                    wc: None,
                    sc: None,
                    vs_oracle: None,
                    sound: None,
                    queries: 0,
                    error: Some(e.to_string()),
                });
                continue;
            }
        };
        solver_ms += report.solver.elapsed.as_secs_f64() * 1e3;
        let d = report.domain.as_ref();
        let (vs_oracle, sound) = match (d, &truth) {
            (Some(d), Some(truth)) if enumerable(d) => {
                let all = value_set(d.values());
                let strong = value_set(d.strong_values());
                (Some(relation(&all, truth)), Some(strong.is_subset(truth) && truth.is_subset(&all)))
            }
            _ => (None, None),
        };
        rows.push(Row {
            algorithm: algo,
            count: d.map(|d| d.count().to_string()),
            intervals: d.map(|d| d.intervals.len()),
            exact: report.exact,
            budget_exhausted: d.map(|d| d.budget_exhausted),
            wc: Some(report.wc),
            sc: Some(report.sc),
            vs_oracle,
            sound,
            queries: report.solver.queries,
            error: None,
        });
    }
    Ok(Comparison {
        schema_version: SCHEMA_VERSION.into(),
        input: input.info,
        target: input.name,
        seed: args.engine.seed.to_string(),
        oracle_count: oracle.map(|d| d.count().to_string()),
        rows,
        wall_ms: wall_ms.clone(),
        run: RunInfo {
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
            solver_ms,
        },
    })
}

fn verdict(c: &Option<Check>) -> &'static str {
    match c {
        Some(Check::True) => "yes",
        Some(Check::False { .. }) => "no",
        _ => "?",
    }
}

pub fn table(c: &Comparison) -> Result<String> {
    let mut s = String::new();
    let dash = || "-".to_string();
    writeln!(
        s,
        "{:<8} {:>12} {:>9} {:>6} {:>7} {:>3} {:>3} {:>12} {:>6} {:>8} {:>10}",
        "algo", "count", "intervals", "exact", "budget", "wc", "sc", "vs-oracle", "sound", "queries", "wall-ms"
    )?;
    for (row, (_, ms)) in c.rows.iter().zip(&c.wall_ms) {
        if let Some(e) = &row.error {
            writeln!(s, "{:<8} error: {e}", row.algorithm.name())?;
            continue;
        }
        let rel = row.vs_oracle.map(serde_json::to_value).transpose()?;
        writeln!(
            s,
            "{:<8} {:>12} {:>9} {:>6} {:>7} {:>3} {:>3} {:>12} {:>6} {:>8} {:>10.1}",
            row.algorithm.name(),
            row.count.clone().unwrap_or_else(dash),
            row.intervals.map_or_else(dash, |n| n.to_string()),
            row.exact,
            row.budget_exhausted.map_or_else(dash, |b| if b { "spent" } else { "ok" }.to_string()),
            verdict(&row.wc),
            verdict(&row.sc),
            rel.as_ref().and_then(|v| v.as_str()).map_or_else(dash, str::to_string),
            row.sound.map_or_else(dash, |b| b.to_string()),
            row.queries,
            ms,
        )?;
    }
    match &c.oracle_count {
        Some(n) => writeln!(s, "oracle: {n} feasible values")?,
        None => writeln!(s, "oracle: unavailable")?,
    }
    Ok(s)
}

pub fn run(args: &CompareArgs) -> Result<u8> {
    let c = compare(args)?;
    print!("{}", table(&c)?);
    if let Some(path) = &args.out {
        let mut json = serde_json::to_string_pretty(&c)?;
        json.push('\n');
        emit(Some(path), &json).with_context(|| "writing comparison")?;
    }
    Ok(if c.rows.iter().any(|r| r.error.is_some()) { 1 } else { 0 })
}

use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use ctrldom::report::{plot_rows, AnalysisReport, PlotRow};

#[derive(Args, Debug)]
pub struct PlotArgs {
    /// Report written by `analyze`.
    pub report: PathBuf,
    /// CSV path [default: stdout].
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

/// Header plus one LF-terminated row per interval.
pub fn write_csv<W: Write>(w: W, rows: &[PlotRow]) -> Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(["target", "lo", "hi", "guarantee", "density"])?;
    for r in rows {
        let guarantee = serde_json::to_value(r.guarantee)?;
        out.write_record([
            r.target.clone(),
            r.lo.to_string(),
            r.hi.to_string(),
            guarantee.as_str().unwrap_or_default().to_string(),
            r.density.map(|d| d.to_string()).unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn run(args: &PlotArgs) -> Result<u8> {
    let text = std::fs::read_to_string(&args.report).with_context(|| format!("cannot read {}", args.report.display()))?;
    let report: AnalysisReport =
        serde_json::from_str(&text).with_context(|| format!("{} is not an analysis report", args.report.display()))?;
    if report.targets.iter().all(|t| t.domain.is_none()) {
        bail!("the report holds no domain");
    }
    let rows = plot_rows(&report);
    match &args.out {
        Some(p) => write_csv(std::fs::File::create(p).with_context(|| format!("cannot write {}", p.display()))?, &rows)?,
        None => write_csv(std::io::stdout().lock(), &rows)?,
    }
    Ok(0)
}

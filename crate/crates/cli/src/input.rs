//! Loading analysis inputs and writing outputs.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use ctrldom::formula::{parse_smt2, SymbolicState, TargetSpec};
use ctrldom::report::InputInfo;
use ctrldom::toy::{builtin_fixtures, fixture};
use sha2::{Digest, Sha256};

use crate::Source;

/// One analysis target with its path state.
pub struct Loaded {
    pub info: InputInfo,
    pub name: String,
    pub state: SymbolicState,
    pub target: TargetSpec,
    /// Value observed on the concrete run, for fixtures.
    pub concrete: Option<u64>,
    pub needs_external: bool,
}

pub fn load(source: &Source, sink: Option<&str>) -> Result<Loaded> {
    if let Some(path) = &source.smt2 {
        let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        let text = String::from_utf8(bytes.clone()).with_context(|| format!("{} is not UTF-8", path.display()))?;
        let problem = parse_smt2(&text).with_context(|| format!("cannot parse {}", path.display()))?;
        return Ok(Loaded {
            info: InputInfo::Smt2 { path: path.display().to_string(), sha256: hex::encode(Sha256::digest(&bytes)) },
            name: "target".into(),
            state: problem.state,
            target: problem.target,
            concrete: None,
            needs_external: false,
        });
    }
    let name = source.fixture.as_deref().expect("clap enforces one source");
    let f = fixture(name)?;
    let s = f.sink_state(sink).with_context(|| format!("fixture {name}"))?;
    Ok(Loaded {
        info: InputInfo::Fixture {
            name: f.name.into(),
            sink: s.label.clone(),
            input: f.input().into_iter().map(|(k, v)| (k, v.to_string())).collect(),
        },
        name: s.label,
        state: s.state,
        target: s.target,
        concrete: Some(s.concrete),
        needs_external: f.needs_external,
    })
}

pub fn list_fixtures() -> Result<u8> {
    let mut out = std::io::stdout().lock();
    for f in builtin_fixtures() {
        let inputs: Vec<String> = f.input.iter().map(|(n, v)| format!("{n}={v}")).collect();
        let note = if f.needs_external { "  [external solver]" } else { "" };
        writeln!(out, "{:<15} sink={:<9} {:<28} {}{note}", f.name, f.sink, inputs.join(","), f.description)?;
    }
    Ok(0)
}

/// Writes `text` to `path`, or to stdout when there is none.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(out.flush()?)
        }
    }
}

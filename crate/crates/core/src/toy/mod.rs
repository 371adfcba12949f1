//! A small structured IR with a flat byte memory, used to produce path
//! constraints for sinks by replaying a concrete run symbolically.
//!
//! One statement per line; `;` starts a comment. Terms are SMT-LIB2
//! bitvector terms over the program's variables.
//!
//! ```text
//! input <name>:<width>            program input (a taint source)
//! memory <bytes>                  size of the flat memory, zero-filled
//! <var> := <term>                 assignment
//! <var> := load <width> <addr>    little-endian load of width/8 bytes
//! store <width> <addr> <value>    little-endian store
//! uninit <var>:<width> residual <addr>
//!                                 uninitialized variable holding the
//!                                 bytes left at <addr>
//! if <bool-term> / else / end     structured branch
//! repeat <n> / end                loop with a constant trip count
//! sink <label> <term> [shift=<int>]
//!                                 target location; `shift` moves values
//!                                 into offset coordinates for scoring
//! ```

mod exec;
mod fixtures;
mod taint;

pub use exec::{execute_concrete, symbolic_single_path, ConcreteTrace, SinkHit, SinkState};
pub use fixtures::{builtin_fixtures, fixture, Fixture};
pub use taint::{taint_propagate, SinkTaint, TaintOptions, TaintState};

use std::collections::BTreeMap;

use thiserror::Error;

use crate::formula::sexp::read_document;
use crate::formula::{term_from_sexp, Expr, FormulaError};

/// Values for the program inputs, by name.
pub type ToyInput = BTreeMap<String, u64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ToyError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: {source}")]
    Formula { line: usize, source: FormulaError },
    #[error("line {line}: {width}-bit access at {addr} outside memory of {size} bytes")]
    Trap { line: usize, addr: u64, width: u32, size: usize },
    #[error("line {line}: `{var}` read before assignment")]
    Unassigned { line: usize, var: String },
    #[error("no value for input `{0}`")]
    MissingInput(String),
    #[error("unknown input `{0}`")]
    UnknownInput(String),
    #[error("input `{name}` = {value} does not fit in {width} bits")]
    InputWidth { name: String, value: u64, width: u32 },
    #[error("sink `{0}` not reached under this input")]
    SinkNotReached(String),
    #[error("execution exceeded {0} steps")]
    TooManySteps(u64),
    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Stmt {
    Assign { line: usize, var: String, expr: Expr },
    Load { line: usize, var: String, width: u32, addr: Expr },
    Store { line: usize, width: u32, addr: Expr, value: Expr },
    If { line: usize, cond: Expr, then: Vec<Stmt>, els: Vec<Stmt> },
    Repeat { line: usize, count: u64, body: Vec<Stmt> },
    Sink { line: usize, label: String, expr: Expr, shift: Option<i128> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToyProgram {
    pub inputs: Vec<(String, u32)>,
    pub memory: usize,
    pub body: Vec<Stmt>,
    /// Width of every variable, inputs included.
    pub vars: BTreeMap<String, u32>,
}

impl ToyProgram {
    pub fn parse(text: &str) -> Result<ToyProgram, ToyError> {
        Parser::default().program(text)
    }

    pub fn sink_labels(&self) -> Vec<String> {
        fn walk(stmts: &[Stmt], out: &mut Vec<String>) {
            for s in stmts {
                match s {
                    Stmt::Sink { label, .. } if !out.contains(label) => out.push(label.clone()),
                    Stmt::If { then, els, .. } => {
                        walk(then, out);
                        walk(els, out);
                    }
                    Stmt::Repeat { body, .. } => walk(body, out),
                    _ => {}
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.body, &mut out);
        out
    }

    /// Checks the input names and widths.
    pub fn check_input(&self, input: &ToyInput) -> Result<(), ToyError> {
        if let Some(extra) = input.keys().find(|k| !self.inputs.iter().any(|(n, _)| n == *k)) {
            return Err(ToyError::UnknownInput(extra.clone()));
        }
        for (name, width) in &self.inputs {
            let value = *input.get(name).ok_or_else(|| ToyError::MissingInput(name.clone()))?;
            if value & !crate::formula::width_mask(*width) != 0 {
                return Err(ToyError::InputWidth { name: name.clone(), value, width: *width });
            }
        }
        Ok(())
    }
}

enum Block {
    Top,
    Then { line: usize, cond: Expr },
    Else { line: usize, cond: Expr, then: Vec<Stmt> },
    Repeat { line: usize, count: u64 },
}

#[derive(Default)]
struct Parser {
    inputs: Vec<(String, u32)>,
    memory: usize,
    vars: BTreeMap<String, u32>,
}

fn perr(line: usize, msg: impl Into<String>) -> ToyError {
    ToyError::Parse { line, msg: msg.into() }
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_decl(line: usize, s: &str) -> Result<(String, u32), ToyError> {
    let (name, w) = s.split_once(':').ok_or_else(|| perr(line, format!("expected <name>:<width>, got `{s}`")))?;
    if !is_ident(name) {
        return Err(perr(line, format!("bad variable name `{name}`")));
    }
    let w: u32 = w.parse().map_err(|_| perr(line, format!("bad width `{w}`")))?;
    if !(1..=64).contains(&w) {
        return Err(perr(line, format!("width {w} not in 1..=64")));
    }
    Ok((name.to_string(), w))
}

fn parse_access_width(line: usize, s: &str) -> Result<u32, ToyError> {
    match s.parse::<u32>() {
        Ok(w) if w % 8 == 0 && (8..=64).contains(&w) => Ok(w),
        _ => Err(perr(line, format!("access width must be 8, 16, ..., 64, got `{s}`"))),
    }
}

fn parse_count(line: usize, s: &str) -> Result<u64, ToyError> {
    s.parse().map_err(|_| perr(line, format!("expected a count, got `{s}`")))
}

impl Parser {
    fn terms(&self, line: usize, text: &str, n: usize) -> Result<Vec<Expr>, ToyError> {
        let doc = read_document(text).map_err(|e| ToyError::Formula { line, source: e.into() })?;
        if doc.items.len() != n {
            return Err(perr(line, format!("expected {n} term(s), found {}", doc.items.len())));
        }
        let vars: Vec<(&str, u32)> = self.vars.iter().map(|(n, w)| (n.as_str(), *w)).collect();
        doc.items
            .iter()
            .map(|s| term_from_sexp(s, &vars).map_err(|e| ToyError::Formula { line, source: e }))
            .collect()
    }

    fn term(&self, line: usize, text: &str) -> Result<Expr, ToyError> {
        Ok(self.terms(line, text, 1)?.remove(0))
    }

    fn bitvector(&self, line: usize, e: Expr) -> Result<Expr, ToyError> {
        if e.is_bool() {
            return Err(perr(line, format!("expected a bitvector term, got `{e}`")));
        }
        Ok(e)
    }

    fn bind(&mut self, line: usize, var: &str, width: u32) -> Result<(), ToyError> {
        if !is_ident(var) {
            return Err(perr(line, format!("bad variable name `{var}`")));
        }
        match self.vars.get(var) {
            Some(&w) if w != width => {
                Err(perr(line, format!("`{var}` has width {w}, assigned a {width}-bit value")))
            }
            _ => {
                self.vars.insert(var.to_string(), width);
                Ok(())
            }
        }
    }

    fn program(mut self, text: &str) -> Result<ToyProgram, ToyError> {
        let mut stack: Vec<(Block, Vec<Stmt>)> = vec![(Block::Top, Vec::new())];
        let mut seen_code = false;
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let src = raw.split(';').next().unwrap_or("").trim();
            if src.is_empty() {
                continue;
            }
            let (word, rest) = src.split_once(char::is_whitespace).map_or((src, ""), |(w, r)| (w, r.trim()));
            let stmt = match word {
                "input" => {
                    if seen_code {
                        return Err(perr(line, "inputs must be declared before any statement"));
                    }
                    let (name, w) = parse_decl(line, rest)?;
                    if self.vars.contains_key(&name) {
                        return Err(perr(line, format!("`{name}` declared twice")));
                    }
                    self.vars.insert(name.clone(), w);
                    self.inputs.push((name, w));
                    continue;
                }
                "memory" => {
                    if seen_code {
                        return Err(perr(line, "memory must be declared before any statement"));
                    }
                    self.memory = rest.parse().map_err(|_| perr(line, format!("bad memory size `{rest}`")))?;
                    continue;
                }
                "if" => {
                    let cond = self.term(line, rest)?;
                    if !cond.is_bool() {
                        return Err(perr(line, format!("branch condition `{cond}` is not boolean")));
                    }
                    stack.push((Block::Then { line, cond }, Vec::new()));
                    seen_code = true;
                    continue;
                }
                "else" => {
                    let (block, body) = stack.pop().expect("top block");
                    match block {
                        Block::Then { line: l, cond } => {
                            stack.push((Block::Else { line: l, cond, then: body }, Vec::new()));
                        }
                        _ => return Err(perr(line, "`else` without `if`")),
                    }
                    continue;
                }
                "repeat" => {
                    let count = parse_count(line, rest)?;
                    stack.push((Block::Repeat { line, count }, Vec::new()));
                    seen_code = true;
                    continue;
                }
                "end" => {
                    let (block, body) = stack.pop().expect("top block");
                    match block {
                        Block::Top => return Err(perr(line, "`end` without a block")),
                        Block::Then { line, cond } => Stmt::If { line, cond, then: body, els: Vec::new() },
                        Block::Else { line, cond, then } => Stmt::If { line, cond, then, els: body },
                        Block::Repeat { line, count } => Stmt::Repeat { line, count, body },
                    }
                }
                "store" => {
                    let (w, terms) = rest.split_once(char::is_whitespace).ok_or_else(|| perr(line, "store <w> <addr> <value>"))?;
                    let width = parse_access_width(line, w)?;
                    let mut t = self.terms(line, terms, 2)?;
                    let value = self.bitvector(line, t.pop().expect("two"))?;
                    let addr = self.bitvector(line, t.pop().expect("two"))?;
                    if value.width() != width {
                        return Err(perr(line, format!("storing a {}-bit value with width {width}", value.width())));
                    }
                    Stmt::Store { line, width, addr, value }
                }
                "uninit" => {
                    let mut parts = rest.split_whitespace();
                    let decl = parts.next().ok_or_else(|| perr(line, "uninit <var>:<w> residual <addr>"))?;
                    if parts.next() != Some("residual") {
                        return Err(perr(line, "uninit <var>:<w> residual <addr>"));
                    }
                    let addr_text: Vec<&str> = parts.collect();
                    let (var, width) = parse_decl(line, decl)?;
                    if width % 8 != 0 {
                        return Err(perr(line, "uninitialized variables span whole bytes"));
                    }
                    let addr = self.bitvector(line, self.term(line, &addr_text.join(" "))?)?;
                    if addr.as_const().is_none() {
                        return Err(perr(line, "residual address must be a constant"));
                    }
                    self.bind(line, &var, width)?;
                    Stmt::Load { line, var, width, addr }
                }
                "sink" => {
                    let (label, term) = rest.split_once(char::is_whitespace).ok_or_else(|| perr(line, "sink <label> <term>"))?;
                    if !is_ident(label) {
                        return Err(perr(line, format!("bad sink label `{label}`")));
                    }
                    let (term, shift) = match term.rsplit_once("shift=") {
                        Some((t, s)) => {
                            let s: i128 = s.trim().parse().map_err(|_| perr(line, format!("bad shift `{s}`")))?;
                            (t.trim(), Some(s))
                        }
                        None => (term, None),
                    };
                    let expr = self.bitvector(line, self.term(line, term)?)?;
                    Stmt::Sink { line, label: label.to_string(), expr, shift }
                }
                var => {
                    let rhs = rest
                        .strip_prefix(":=")
                        .ok_or_else(|| perr(line, format!("unknown statement `{word}`")))?
                        .trim();
                    if let Some(load) = rhs.strip_prefix("load ") {
                        let (w, addr) = load.trim().split_once(char::is_whitespace).ok_or_else(|| perr(line, "load <w> <addr>"))?;
                        let width = parse_access_width(line, w)?;
                        let addr = self.bitvector(line, self.term(line, addr)?)?;
                        self.bind(line, var, width)?;
                        Stmt::Load { line, var: var.to_string(), width, addr }
                    } else {
                        let expr = self.bitvector(line, self.term(line, rhs)?)?;
                        self.bind(line, var, expr.width())?;
                        Stmt::Assign { line, var: var.to_string(), expr }
                    }
                }
            };
            seen_code = true;
            stack.last_mut().expect("top block").1.push(stmt);
        }
        if stack.len() != 1 {
            let line = match &stack.last().expect("block").0 {
                Block::Then { line, .. } | Block::Else { line, .. } | Block::Repeat { line, .. } => *line,
                Block::Top => 0,
            };
            return Err(perr(line, "block not closed with `end`"));
        }
        let body = stack.pop().expect("top block").1;
        Ok(ToyProgram { inputs: self.inputs, memory: self.memory, body, vars: self.vars })
    }
}

//! Dynamic taint along the concrete path, at statement granularity.
//!
//! Inputs are sources. A statement's result is tainted when any operand
//! is; options add control-flow propagation, address-driven memory
//! over-approximation and local suppression of constant results.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::exec::{run, Shadow};
use super::{ToyError, ToyInput, ToyProgram};
use crate::formula::{BinOp, Expr, ExprKind};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaintOptions {
    /// Assignments under a tainted branch condition are tainted.
    pub control_flow: bool,
    /// Accesses through a tainted address touch all of memory.
    pub overapprox_memory: bool,
    /// `e * 0`, `e - e` and `if (v = c)` untaint their result.
    pub suppression: bool,
}

impl TaintOptions {
    /// All eight flag combinations.
    pub fn all() -> Vec<TaintOptions> {
        (0..8u8)
            .map(|b| TaintOptions { control_flow: b & 1 != 0, overapprox_memory: b & 2 != 0, suppression: b & 4 != 0 })
            .collect()
    }
}

/// Tags after the run: `true` is tainted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaintState {
    pub options: TaintOptions,
    pub vars: BTreeMap<String, bool>,
    pub memory: Vec<bool>,
    pub sinks: Vec<SinkTaint>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SinkTaint {
    pub label: String,
    pub line: usize,
    pub occurrence: usize,
    pub tainted: bool,
}

impl TaintState {
    pub fn sink(&self, label: &str) -> Option<bool> {
        self.sinks.iter().find(|s| s.label == label).map(|s| s.tainted)
    }
}

struct Tracker {
    options: TaintOptions,
    vars: BTreeMap<String, bool>,
    memory: Vec<bool>,
    /// Taint of enclosing branch conditions.
    conds: Vec<bool>,
    sinks: Vec<SinkTaint>,
}

fn is_zero(e: &Expr) -> bool {
    e.as_const() == Some(0)
}

impl Tracker {
    fn expr(&self, e: &Expr) -> bool {
        match e.kind() {
            ExprKind::Var(n) => self.vars.get(&**n).copied().unwrap_or(false),
            ExprKind::Const(_) => false,
            ExprKind::Binary(BinOp::Mul, a, b) if self.options.suppression && (is_zero(a) || is_zero(b)) => false,
            ExprKind::Binary(BinOp::Sub, a, b) if self.options.suppression && a == b => false,
            ExprKind::Unary(_, a) | ExprKind::Extract { arg: a, .. } | ExprKind::Extend { arg: a, .. } => self.expr(a),
            ExprKind::Binary(_, a, b) | ExprKind::Concat(a, b) => self.expr(a) || self.expr(b),
            ExprKind::Ite(c, t, f) => self.expr(c) || self.expr(t) || self.expr(f),
        }
    }

    fn control(&self) -> bool {
        self.options.control_flow && self.conds.iter().any(|c| *c)
    }
}

impl Shadow for Tracker {
    fn assign(&mut self, _: usize, var: &str, expr: &Expr) -> Result<(), ToyError> {
        let t = self.expr(expr) || self.control();
        self.vars.insert(var.to_string(), t);
        Ok(())
    }

    fn load(&mut self, _: usize, var: &str, width: u32, addr: &Expr, at: u64) -> Result<(), ToyError> {
        let cells = &self.memory[at as usize..at as usize + (width / 8) as usize];
        let mut t = cells.iter().any(|c| *c);
        if self.options.overapprox_memory && self.expr(addr) {
            t |= self.memory.iter().any(|c| *c);
        }
        let t = t || self.control();
        self.vars.insert(var.to_string(), t);
        Ok(())
    }

    fn store(&mut self, _: usize, width: u32, addr: &Expr, at: u64, value: &Expr) -> Result<(), ToyError> {
        let t = self.expr(value);
        if self.options.overapprox_memory && self.expr(addr) && t {
            self.memory.iter_mut().for_each(|c| *c = true);
        }
        for c in &mut self.memory[at as usize..at as usize + (width / 8) as usize] {
            *c = t;
        }
        Ok(())
    }

    fn enter(&mut self, _: usize, cond: &Expr, taken: bool) -> Result<(), ToyError> {
        self.conds.push(self.expr(cond));
        if self.options.suppression && taken {
            if let ExprKind::Binary(BinOp::Eq, a, b) = cond.kind() {
                let pinned = match (a.as_var(), b.as_var()) {
                    (Some(v), None) if b.as_const().is_some() => Some(v),
                    (None, Some(v)) if a.as_const().is_some() => Some(v),
                    _ => None,
                };
                if let Some(v) = pinned {
                    self.vars.insert(v.to_string(), false);
                }
            }
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.conds.pop();
    }

    fn sink(&mut self, line: usize, label: &str, occurrence: usize, expr: &Expr, _: Option<i128>, _: u64) -> Result<(), ToyError> {
        let tainted = self.expr(expr);
        self.sinks.push(SinkTaint { label: label.to_string(), line, occurrence, tainted });
        Ok(())
    }
}

/// Propagates taint along the path taken on `input`.
pub fn taint_propagate(program: &ToyProgram, input: &ToyInput, options: TaintOptions) -> Result<TaintState, ToyError> {
    let mut t = Tracker {
        options,
        vars: program.inputs.iter().map(|(n, _)| (n.clone(), true)).collect(),
        memory: vec![false; program.memory],
        conds: Vec::new(),
        sinks: Vec::new(),
    };
    run(program, input, &mut t)?;
    Ok(TaintState { options, vars: t.vars, memory: t.memory, sinks: t.sinks })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn taint(src: &str, inputs: &[(&str, u64)], options: TaintOptions) -> TaintState {
        let p = ToyProgram::parse(src).unwrap();
        let input = inputs.iter().map(|(n, v)| (n.to_string(), *v)).collect();
        taint_propagate(&p, &input, options).unwrap()
    }

    const SUPPRESS: TaintOptions = TaintOptions { control_flow: false, overapprox_memory: false, suppression: true };

    #[test]
    fn source_taints() {
        let t = taint("input i:8\nx := i\nsink s x", &[("i", 1)], TaintOptions::default());
        assert_eq!(t.sink("s"), Some(true));
    }

    #[test]
    fn suppression_rules() {
        let src = "input i:8\nv := (bvsub i i)\nw := (bvmul i #x00)\nsink a v\nsink b w";
        let plain = taint(src, &[("i", 1)], TaintOptions::default());
        assert_eq!((plain.sink("a"), plain.sink("b")), (Some(true), Some(true)));
        let sup = taint(src, &[("i", 1)], SUPPRESS);
        assert_eq!((sup.sink("a"), sup.sink("b")), (Some(false), Some(false)));
        let pinned = taint("input x:8\nif (= x #x00)\n  sink s x\nend", &[("x", 0)], SUPPRESS);
        assert_eq!(pinned.sink("s"), Some(false));
    }

    #[test]
    fn control_flow_option() {
        let src = "input i:8\nif (bvult i #x05)\n  y := #x01\nelse\n  y := #x02\nend\nsink s y";
        assert_eq!(taint(src, &[("i", 1)], TaintOptions::default()).sink("s"), Some(false));
        let cf = TaintOptions { control_flow: true, ..TaintOptions::default() };
        assert_eq!(taint(src, &[("i", 1)], cf).sink("s"), Some(true));
    }

    #[test]
    fn memory_options() {
        let src = "input a:8\ninput v:8\nmemory 8\nstore 8 (bvand a #x07) v\nr := load 8 #x05\nsink s r";
        assert_eq!(taint(src, &[("a", 3), ("v", 1)], TaintOptions::default()).sink("s"), Some(false));
        let over = TaintOptions { overapprox_memory: true, ..TaintOptions::default() };
        assert_eq!(taint(src, &[("a", 3), ("v", 1)], over).sink("s"), Some(true));
    }

    #[test]
    fn eight_combinations() {
        assert_eq!(TaintOptions::all().len(), 8);
    }
}

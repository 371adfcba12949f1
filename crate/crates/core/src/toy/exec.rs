//! Concrete execution, with observers that follow the same path.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{Stmt, ToyError, ToyInput, ToyProgram};
use crate::formula::{Affine, EvalError, Expr, SymbolicState, TargetSpec};

const MAX_STEPS: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SinkHit {
    pub label: String,
    pub line: usize,
    /// How many earlier hits of the same label precede this one.
    pub occurrence: usize,
    pub width: u32,
    #[serde(with = "crate::serde_num::u64_str")]
    pub value: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConcreteTrace {
    /// Lines of executed statements, in order; a branch counts once when
    /// its condition is evaluated.
    pub executed: Vec<usize>,
    pub vars: BTreeMap<String, u64>,
    pub memory: Vec<u8>,
    pub sinks: Vec<SinkHit>,
}

impl ConcreteTrace {
    pub fn hit(&self, label: &str) -> Option<&SinkHit> {
        self.sinks.iter().find(|h| h.label == label)
    }
}

/// Symbolic view of one sink hit: the path constraint up to the sink and
/// the sink expression over the program inputs.
#[derive(Clone, Debug)]
pub struct SinkState {
    pub label: String,
    pub line: usize,
    pub occurrence: usize,
    pub state: SymbolicState,
    pub target: TargetSpec,
    /// The value observed on the concrete run.
    pub concrete: u64,
}

/// Observer driven by the concrete run. Callbacks come before the concrete
/// state is updated, with concrete addresses already resolved.
pub(crate) trait Shadow {
    fn assign(&mut self, line: usize, var: &str, expr: &Expr) -> Result<(), ToyError>;
    fn load(&mut self, line: usize, var: &str, width: u32, addr: &Expr, at: u64) -> Result<(), ToyError>;
    fn store(&mut self, line: usize, width: u32, addr: &Expr, at: u64, value: &Expr) -> Result<(), ToyError>;
    fn enter(&mut self, line: usize, cond: &Expr, taken: bool) -> Result<(), ToyError>;
    fn leave(&mut self);
    fn sink(&mut self, line: usize, label: &str, occurrence: usize, expr: &Expr, shift: Option<i128>, value: u64)
        -> Result<(), ToyError>;
}

struct NoShadow;

impl Shadow for NoShadow {
    fn assign(&mut self, _: usize, _: &str, _: &Expr) -> Result<(), ToyError> {
        Ok(())
    }
    fn load(&mut self, _: usize, _: &str, _: u32, _: &Expr, _: u64) -> Result<(), ToyError> {
        Ok(())
    }
    fn store(&mut self, _: usize, _: u32, _: &Expr, _: u64, _: &Expr) -> Result<(), ToyError> {
        Ok(())
    }
    fn enter(&mut self, _: usize, _: &Expr, _: bool) -> Result<(), ToyError> {
        Ok(())
    }
    fn leave(&mut self) {}
    fn sink(&mut self, _: usize, _: &str, _: usize, _: &Expr, _: Option<i128>, _: u64) -> Result<(), ToyError> {
        Ok(())
    }
}

struct Machine<'a> {
    vars: BTreeMap<String, u64>,
    memory: Vec<u8>,
    trace: Vec<usize>,
    sinks: Vec<SinkHit>,
    steps: u64,
    shadow: &'a mut dyn Shadow,
}

impl Machine<'_> {
    fn eval(&self, line: usize, e: &Expr) -> Result<u64, ToyError> {
        e.eval(&|n| self.vars.get(n).copied()).map_err(|EvalError::Unassigned(var)| ToyError::Unassigned { line, var })
    }

    fn address(&self, line: usize, addr: &Expr, width: u32) -> Result<u64, ToyError> {
        let at = self.eval(line, addr)?;
        let bytes = (width / 8) as u64;
        match at.checked_add(bytes) {
            Some(end) if end <= self.memory.len() as u64 => Ok(at),
            _ => Err(ToyError::Trap { line, addr: at, width, size: self.memory.len() }),
        }
    }

    fn block(&mut self, stmts: &[Stmt]) -> Result<(), ToyError> {
        for s in stmts {
            self.stmt(s)?;
        }
        Ok(())
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), ToyError> {
        self.steps += 1;
        if self.steps > MAX_STEPS {
            return Err(ToyError::TooManySteps(MAX_STEPS));
        }
        match s {
            Stmt::Assign { line, var, expr } => {
                self.trace.push(*line);
                let v = self.eval(*line, expr)?;
                self.shadow.assign(*line, var, expr)?;
                self.vars.insert(var.clone(), v);
            }
            Stmt::Load { line, var, width, addr } => {
                self.trace.push(*line);
                let at = self.address(*line, addr, *width)?;
                let mut v = 0u64;
                for k in (0..(*width / 8) as usize).rev() {
                    v = (v << 8) | self.memory[at as usize + k] as u64;
                }
                self.shadow.load(*line, var, *width, addr, at)?;
                self.vars.insert(var.clone(), v);
            }
            Stmt::Store { line, width, addr, value } => {
                self.trace.push(*line);
                let at = self.address(*line, addr, *width)?;
                let v = self.eval(*line, value)?;
                self.shadow.store(*line, *width, addr, at, value)?;
                for k in 0..(*width / 8) as usize {
                    self.memory[at as usize + k] = (v >> (8 * k)) as u8;
                }
            }
            Stmt::If { line, cond, then, els } => {
                self.trace.push(*line);
                let taken = self.eval(*line, cond)? != 0;
                self.shadow.enter(*line, cond, taken)?;
                self.block(if taken { then } else { els })?;
                self.shadow.leave();
            }
            Stmt::Repeat { line, count, body } => {
                self.trace.push(*line);
                for _ in 0..*count {
                    self.block(body)?;
                }
            }
            Stmt::Sink { line, label, expr, shift } => {
                self.trace.push(*line);
                let value = self.eval(*line, expr)?;
                let occurrence = self.sinks.iter().filter(|h| &h.label == label).count();
                self.shadow.sink(*line, label, occurrence, expr, *shift, value)?;
                self.sinks.push(SinkHit { label: label.clone(), line: *line, occurrence, width: expr.width(), value });
            }
        }
        Ok(())
    }
}

pub(crate) fn run(program: &ToyProgram, input: &ToyInput, shadow: &mut dyn Shadow) -> Result<ConcreteTrace, ToyError> {
    program.check_input(input)?;
    let mut m = Machine {
        vars: input.clone(),
        memory: vec![0; program.memory],
        trace: Vec::new(),
        sinks: Vec::new(),
        steps: 0,
        shadow,
    };
    m.block(&program.body)?;
    Ok(ConcreteTrace { executed: m.trace, vars: m.vars, memory: m.memory, sinks: m.sinks })
}

/// Runs the program on a concrete input. Out-of-range memory accesses trap.
pub fn execute_concrete(program: &ToyProgram, input: &ToyInput) -> Result<ConcreteTrace, ToyError> {
    run(program, input, &mut NoShadow)
}

struct Symbolic {
    env: HashMap<String, Expr>,
    memory: Vec<Expr>,
    state: SymbolicState,
    sinks: Vec<SinkState>,
}

fn formula(line: usize) -> impl Fn(crate::formula::FormulaError) -> ToyError {
    move |source| ToyError::Formula { line, source }
}

impl Symbolic {
    fn lift(&self, e: &Expr) -> Expr {
        e.substitute(&|n| self.env.get(n).cloned()).fold_constants()
    }

    /// Pins a symbolic address to the value it had on the concrete run.
    fn concretize(&mut self, line: usize, addr: &Expr, at: u64) -> Result<(), ToyError> {
        let sym = self.lift(addr);
        if sym.as_const().is_none() {
            let c = Expr::eq(&sym, &Expr::constant(at, sym.width()));
            self.state.push_constraint(c).map_err(formula(line))?;
        }
        Ok(())
    }
}

impl Shadow for Symbolic {
    fn assign(&mut self, _: usize, var: &str, expr: &Expr) -> Result<(), ToyError> {
        let v = self.lift(expr);
        self.env.insert(var.to_string(), v);
        Ok(())
    }

    fn load(&mut self, line: usize, var: &str, width: u32, addr: &Expr, at: u64) -> Result<(), ToyError> {
        self.concretize(line, addr, at)?;
        let at = at as usize;
        let mut v = self.memory[at].clone();
        for k in 1..(width / 8) as usize {
            v = Expr::try_concat(self.memory[at + k].clone(), v).map_err(|e| formula(line)(e.into()))?;
        }
        self.env.insert(var.to_string(), v.fold_constants());
        Ok(())
    }

    fn store(&mut self, line: usize, width: u32, addr: &Expr, at: u64, value: &Expr) -> Result<(), ToyError> {
        self.concretize(line, addr, at)?;
        let v = self.lift(value);
        if width == 8 {
            self.memory[at as usize] = v;
            return Ok(());
        }
        for k in 0..width / 8 {
            let byte = Expr::try_extract(8 * k + 7, 8 * k, v.clone()).map_err(|e| formula(line)(e.into()))?;
            self.memory[at as usize + k as usize] = byte.fold_constants();
        }
        Ok(())
    }

    fn enter(&mut self, line: usize, cond: &Expr, taken: bool) -> Result<(), ToyError> {
        let c = self.lift(cond);
        let c = if taken { c } else { Expr::not(&c).fold_constants() };
        if c.as_const() != Some(1) {
            self.state.push_constraint(c).map_err(formula(line))?;
        }
        Ok(())
    }

    fn leave(&mut self) {}

    fn sink(
        &mut self,
        line: usize,
        label: &str,
        occurrence: usize,
        expr: &Expr,
        shift: Option<i128>,
        value: u64,
    ) -> Result<(), ToyError> {
        let mut target = TargetSpec::new(self.lift(expr)).map_err(formula(line))?;
        if let Some(s) = shift {
            target = target.with_transform(Affine::shift(s));
        }
        self.sinks.push(SinkState {
            label: label.to_string(),
            line,
            occurrence,
            state: self.state.clone(),
            target,
            concrete: value,
        });
        Ok(())
    }
}

/// Replays the concrete path with symbolic inputs, returning one state per
/// sink hit in execution order.
pub fn symbolic_single_path(program: &ToyProgram, input: &ToyInput) -> Result<Vec<SinkState>, ToyError> {
    let state = SymbolicState::new(&program.inputs).map_err(formula(0))?;
    let mut sym = Symbolic {
        env: program.inputs.iter().map(|(n, w)| (n.clone(), Expr::var(n, *w))).collect(),
        memory: vec![Expr::constant(0, 8); program.memory],
        state,
        sinks: Vec::new(),
    };
    run(program, input, &mut sym)?;
    Ok(sym.sinks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(pairs: &[(&str, u64)]) -> ToyInput {
        pairs.iter().map(|(n, v)| (n.to_string(), *v)).collect()
    }

    #[test]
    fn straight_line() {
        let p = ToyProgram::parse("input i:8\nx := i\nsink s x").unwrap();
        let t = execute_concrete(&p, &input(&[("i", 5)])).unwrap();
        assert_eq!(t.hit("s").unwrap().value, 5);
        assert_eq!(t.executed, vec![2, 3]);
    }

    #[test]
    fn memory_is_little_endian_and_traps() {
        let p = ToyProgram::parse("input i:16\nmemory 4\nstore 16 #x01 i\nlo := load 8 #x01\nsink s lo\nx := load 32 #x01").unwrap();
        match execute_concrete(&p, &input(&[("i", 0xabcd)])) {
            Err(ToyError::Trap { line: 6, addr: 1, width: 32, size: 4 }) => {}
            other => panic!("{other:?}"),
        }
        let ok = ToyProgram::parse("input i:16\nmemory 4\nstore 16 #x01 i\nlo := load 8 #x01\nsink s lo").unwrap();
        let t = execute_concrete(&ok, &input(&[("i", 0xabcd)])).unwrap();
        assert_eq!(t.hit("s").unwrap().value, 0xcd);
        assert_eq!(t.memory, vec![0, 0xcd, 0xab, 0]);
        let s = symbolic_single_path(&ok, &input(&[("i", 0xabcd)])).unwrap();
        assert_eq!(s[0].target.expr.to_string(), "((_ extract 7 0) i)");
    }

    #[test]
    fn branch_condition_pins_value() {
        let p = ToyProgram::parse("input x:8\nif (= x #x00)\n  sink s x\nend").unwrap();
        let s = symbolic_single_path(&p, &input(&[("x", 0)])).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].state.constraints()[0].to_string(), "(= x #x00)");
        assert!(execute_concrete(&p, &input(&[("x", 1)])).unwrap().sinks.is_empty());
    }

    #[test]
    fn symbolic_addresses_are_pinned() {
        let p = ToyProgram::parse("input a:8\ninput v:8\nmemory 8\nstore 8 (bvand a #x07) v\nr := load 8 #x03\nsink s r").unwrap();
        let s = symbolic_single_path(&p, &input(&[("a", 3), ("v", 9)])).unwrap();
        assert_eq!(s[0].state.constraints()[0].to_string(), "(= (bvand a #x07) #x03)");
        assert_eq!(s[0].target.expr.to_string(), "v");
    }

    #[test]
    fn unassigned_and_bad_inputs() {
        let p = ToyProgram::parse("input a:8\nif (= a #x00)\n  y := a\nend\nsink s y").unwrap();
        assert!(matches!(execute_concrete(&p, &input(&[("a", 1)])), Err(ToyError::Unassigned { line: 5, .. })));
        assert!(matches!(execute_concrete(&p, &input(&[])), Err(ToyError::MissingInput(_))));
        assert!(matches!(execute_concrete(&p, &input(&[("a", 256)])), Err(ToyError::InputWidth { .. })));
        assert!(matches!(execute_concrete(&p, &input(&[("a", 0), ("b", 1)])), Err(ToyError::UnknownInput(_))));
    }

    #[test]
    fn repeat_runs_body() {
        let p = ToyProgram::parse("input a:8\nx := a\nrepeat 3\n  x := (bvadd x #x02)\n  sink s x\nend").unwrap();
        let t = execute_concrete(&p, &input(&[("a", 1)])).unwrap();
        let vals: Vec<u64> = t.sinks.iter().map(|h| h.value).collect();
        assert_eq!(vals, vec![3, 5, 7]);
        assert_eq!(t.sinks[2].occurrence, 2);
    }
}

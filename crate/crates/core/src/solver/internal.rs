//! Exhaustive enumeration of input assignments.
//!
//! For each (constraints, target) pair the backend builds, once, the sorted
//! table of feasible target values with one witness assignment each. Range
//! restrictions, optimization and counterexample search are then lookups.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use log::debug;

use super::compile::Program;
use super::{
    Backend, Direction, FixedBitsOutcome, Model, OptOutcome, ScOutcome, SolverError, TargetQuery, UnknownReason,
    Verdict,
};
use crate::bits::FixedBits;
use crate::formula::{duplicate, width_mask, Expr, SymbolicState, TargetSpec, TARGET_SYMBOL};

/// Candidates examined before an assumption predicate is declared too sparse.
const PREDICATE_SCAN_LIMIT: u64 = 1 << 24;

#[derive(Clone, PartialEq, Eq, Hash)]
struct Key {
    constraints: Vec<Expr>,
    target: Option<Expr>,
}

struct Table {
    vars: Vec<(Arc<str>, u32)>,
    /// (target value, witness assignment), sorted by value, one per value.
    entries: Vec<(u64, u64)>,
}

impl Table {
    fn decode(&self, index: u64) -> Vec<(Arc<str>, u64)> {
        let mut shift = 0;
        self.vars
            .iter()
            .map(|(n, w)| {
                let v = (index >> shift) & width_mask(*w);
                shift += w;
                (n.clone(), v)
            })
            .collect()
    }

    fn model(&self, state: &SymbolicState, index: u64) -> Model {
        let mut m: Model = state.inputs().iter().map(|i| (i.name.to_string(), 0)).collect();
        for (n, v) in self.decode(index) {
            m.insert(n.to_string(), v);
        }
        m
    }

    /// Entries with value in `[lo, hi]`.
    fn slice(&self, lo: u64, hi: u64) -> &[(u64, u64)] {
        let a = self.entries.partition_point(|e| e.0 < lo);
        let b = self.entries.partition_point(|e| e.0 <= hi);
        &self.entries[a..b.max(a)]
    }
}

pub struct InternalBackend {
    budget_bits: u32,
    cache: HashMap<Key, Arc<Table>>,
}

impl InternalBackend {
    pub fn new(budget_bits: u32) -> Self {
        InternalBackend { budget_bits, cache: HashMap::new() }
    }

    fn table(&mut self, state: &SymbolicState, target: Option<&Expr>) -> Result<Arc<Table>, SolverError> {
        if !state.is_quantifier_free_bv() {
            return Err(SolverError::Unsupported(
                "array terms are only forwarded to an external solver; the internal backend cannot interpret them"
                    .into(),
            ));
        }
        let key = Key { constraints: state.constraints().to_vec(), target: target.cloned() };
        if let Some(t) = self.cache.get(&key) {
            return Ok(t.clone());
        }
        let mut names: BTreeSet<Arc<str>> = state.used_variables();
        if let Some(t) = target {
            state.check_expr(t)?;
            t.collect_vars(&mut names);
        }
        let vars: Vec<(Arc<str>, u32)> =
            names.into_iter().map(|n| (n.clone(), state.input(&n).expect("checked declaration").width)).collect();
        let bits: u32 = vars.iter().map(|v| v.1).sum();
        if bits > self.budget_bits {
            return Err(SolverError::BudgetExceeded { bits, budget: self.budget_bits });
        }
        let table = Arc::new(build_table(state.constraints(), target, vars, bits));
        debug!("enumerated {bits} input bits: {} feasible target values", table.entries.len());
        self.cache.insert(key, table.clone());
        Ok(table)
    }

    /// Sorted feasible values of `target`.
    pub fn feasible_values(&mut self, state: &SymbolicState, target: &Expr) -> Result<Vec<u64>, SolverError> {
        Ok(self.table(state, Some(target))?.entries.iter().map(|e| e.0).collect())
    }
}

fn build_table(constraints: &[Expr], target: Option<&Expr>, vars: Vec<(Arc<str>, u32)>, bits: u32) -> Table {
    let mut roots = constraints.to_vec();
    if let Some(t) = target {
        roots.push(t.clone());
    }
    let prog = Program::compile(&roots, &vars);
    let n_constraints = constraints.len();
    let mut regs = prog.registers();
    let mut env = vec![0u64; vars.len()];
    let widths: Vec<u32> = prog.vars().iter().map(|v| v.1).collect();
    let mut values: Vec<(u64, u64)> = Vec::new();
    let total: u64 = 1u64 << bits;
    for index in 0..total {
        let mut shift = 0;
        for (slot, w) in widths.iter().enumerate() {
            env[slot] = (index >> shift) & width_mask(*w);
            shift += w;
        }
        prog.run(&env, &mut regs);
        if (0..n_constraints).all(|i| prog.root(&regs, i) == 1) {
            match target {
                Some(_) => values.push((prog.root(&regs, prog.root_count() - 1), index)),
                None => {
                    values.push((0, index));
                    break;
                }
            }
        }
    }
    // first witness in enumeration order for each value
    values.sort_unstable();
    values.dedup_by_key(|e| e.0);
    Table { vars, entries: values }
}

fn in_assumption(assume: Option<&Expr>, y: u64) -> bool {
    match assume {
        None => true,
        Some(p) => p.eval(&|n| (n == TARGET_SYMBOL).then_some(y)).map(|r| r == 1).unwrap_or(false),
    }
}

/// Smallest member of the assumption set at or above `from`, up to `hi`.
fn next_candidate(from: u64, hi: u64, fixed: Option<FixedBits>, assume: Option<&Expr>) -> Result<Option<u64>, ()> {
    let mut y = from;
    let mut scanned = 0u64;
    loop {
        if let Some(fb) = fixed {
            match fb.next_at_or_above(y) {
                Some(n) => y = n,
                None => return Ok(None),
            }
        }
        if y > hi {
            return Ok(None);
        }
        if in_assumption(assume, y) {
            return Ok(Some(y));
        }
        scanned += 1;
        if scanned > PREDICATE_SCAN_LIMIT {
            return Err(());
        }
        if y == hi {
            return Ok(None);
        }
        y += 1;
    }
}

impl Backend for InternalBackend {
    fn name(&self) -> &str {
        "internal"
    }

    fn check_sat(&mut self, state: &SymbolicState) -> Result<Verdict, SolverError> {
        let t = self.table(state, None)?;
        Ok(match t.entries.first() {
            Some(&(_, w)) => Verdict::Sat(t.model(state, w)),
            None => Verdict::Unsat,
        })
    }

    fn check_range(&mut self, q: &TargetQuery) -> Result<Verdict, SolverError> {
        let t = self.table(q.state, Some(q.target))?;
        Ok(match t.slice(q.lo, q.hi).first() {
            Some(&(_, w)) => Verdict::Sat(t.model(q.state, w)),
            None => Verdict::Unsat,
        })
    }

    fn optimize(&mut self, q: &TargetQuery, dir: Direction) -> Result<OptOutcome, SolverError> {
        let t = self.table(q.state, Some(q.target))?;
        let slice = t.slice(q.lo, q.hi);
        let pick = match dir {
            Direction::Min => slice.first(),
            Direction::Max => slice.last(),
        };
        Ok(match pick {
            Some(&(value, w)) => OptOutcome::Optimum { value, model: t.model(q.state, w) },
            None => OptOutcome::Unknown { reason: UnknownReason::Unsat, best: None },
        })
    }

    fn find_distinct(&mut self, state: &SymbolicState, target: &Expr) -> Result<Verdict, SolverError> {
        let t = self.table(state, Some(target))?;
        let [(_, w1), (_, w2), ..] = t.entries[..] else {
            return Ok(Verdict::Unsat);
        };
        // the second model lives on the renamed copy
        let spec = TargetSpec::new(target.clone())?;
        let (dup, _) = duplicate(state, &spec);
        let mut model = t.model(state, w1);
        let second = t.model(state, w2);
        for (orig, fresh) in state.inputs().iter().zip(dup.inputs()) {
            model.insert(fresh.name.to_string(), second[&*orig.name]);
        }
        Ok(Verdict::Sat(model))
    }

    fn sc_counterexample(&mut self, q: &TargetQuery) -> Result<ScOutcome, SolverError> {
        let t = self.table(q.state, Some(q.target))?;
        let too_sparse = || ScOutcome::Unknown(UnknownReason::Unsupported("assumption predicate too sparse to enumerate".into()));
        let Ok(mut cand) = next_candidate(q.lo, q.hi, q.fixed, q.assume) else {
            return Ok(too_sparse());
        };
        // walk the assumption set and the feasible values in step; the first
        // candidate not matched by a feasible value is the counterexample
        for &(v, _) in t.slice(q.lo, q.hi) {
            let Some(y) = cand else { break };
            if v < y {
                continue;
            }
            if v > y {
                return Ok(ScOutcome::Counterexample(y));
            }
            cand = if y == q.hi {
                None
            } else {
                match next_candidate(y + 1, q.hi, q.fixed, q.assume) {
                    Ok(c) => c,
                    Err(()) => return Ok(too_sparse()),
                }
            };
        }
        Ok(match cand {
            Some(y) => ScOutcome::Counterexample(y),
            None => ScOutcome::StronglyControlled,
        })
    }

    fn fixed_bits(&mut self, state: &SymbolicState, target: &Expr) -> Result<FixedBitsOutcome, SolverError> {
        let t = self.table(state, Some(target))?;
        let Some(&(v0, _)) = t.entries.first() else {
            return Ok(FixedBitsOutcome::Unknown(UnknownReason::Unsat));
        };
        let varying = t.entries.iter().fold(0u64, |acc, e| acc | (e.0 ^ v0));
        let mask = !varying & width_mask(target.width());
        // a pair of models must disagree on every varying bit at once
        let values: HashSet<u64> = t.entries.iter().map(|e| e.0).collect();
        let spanning = t.entries.iter().any(|e| values.contains(&(e.0 ^ varying)));
        Ok(if spanning {
            FixedBitsOutcome::Found(FixedBits { mask, bits: v0 & mask })
        } else {
            FixedBitsOutcome::NoPair
        })
    }
}

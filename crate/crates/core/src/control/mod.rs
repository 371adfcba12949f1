//! Qualitative control checks and domain extraction by shrinking and
//! splitting intervals of the target's value range.

mod domain;

pub use domain::{merge_domains, ControlDomain, ControlInterval, DomainError, Guarantee, MAX_DISSOLVED_RUNS};

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::bits::FixedBits;
use crate::formula::{Expr, SymbolicState, TargetSpec};
use crate::solver::{
    enumerate_feasible, FixedBitsOutcome, OptOutcome, ScOutcome, Solver, SolverError, TargetQuery, UnknownReason,
    Verdict,
};

pub const DEFAULT_SPLIT_LIMIT: u64 = 100;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnsConfig {
    /// Counterexample-driven splits allowed over the whole run.
    pub split_limit: u64,
    pub use_fixed_bits: bool,
}

impl Default for SnsConfig {
    fn default() -> Self {
        SnsConfig { split_limit: DEFAULT_SPLIT_LIMIT, use_fixed_bits: false }
    }
}

impl SnsConfig {
    pub fn with_split_limit(split_limit: u64) -> Self {
        SnsConfig { split_limit, ..SnsConfig::default() }
    }
}

/// Three-valued answer of a qualitative check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Check {
    True,
    /// Carries an infeasible witness when the check is strong control.
    False {
        #[serde(with = "crate::serde_num::opt_u64_str", default, skip_serializing_if = "Option::is_none")]
        witness: Option<u64>,
    },
    Unknown {
        reason: UnknownReason,
    },
}

impl Check {
    pub fn is_true(&self) -> bool {
        matches!(self, Check::True)
    }

    pub fn is_false(&self) -> bool {
        matches!(self, Check::False { .. })
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Check::True => Some(true),
            Check::False { .. } => Some(false),
            Check::Unknown { .. } => None,
        }
    }
}

/// Weak control: can the target take two distinct values?
pub fn check_wc(solver: &mut Solver, state: &SymbolicState, target: &Expr) -> Result<Check, SolverError> {
    Ok(match solver.find_distinct(state, target)? {
        Verdict::Sat(_) => Check::True,
        Verdict::Unsat => Check::False { witness: None },
        Verdict::Unknown(reason) => Check::Unknown { reason },
    })
}

/// Strong control over the target's assumption set (the full domain when
/// there is none): is every value of the set feasible?
pub fn check_sc(solver: &mut Solver, state: &SymbolicState, target: &TargetSpec) -> Result<Check, SolverError> {
    let mut unknown = None;
    for (lo, hi) in target.assumption_intervals() {
        let q = TargetQuery { assume: target.value_predicate(), ..TargetQuery::new(state, &target.expr, lo, hi) };
        match solver.sc_counterexample(&q)? {
            ScOutcome::StronglyControlled => {}
            ScOutcome::Counterexample(y) => return Ok(Check::False { witness: Some(y) }),
            ScOutcome::Unknown(reason) => unknown = Some(reason),
        }
    }
    Ok(match unknown {
        Some(reason) => Check::Unknown { reason },
        None => Check::True,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Shrunk {
    /// Both bounds are feasible.
    Interval(u64, u64),
    /// No feasible value in the interval.
    Empty,
    /// Optimization failed; the bounds are the best known.
    Unknown { lo: u64, hi: u64, reason: UnknownReason },
}

/// Narrows `[lo, hi]` to the feasible minimum and maximum of the target
/// within it.
pub fn shrink(solver: &mut Solver, state: &SymbolicState, target: &Expr, lo: u64, hi: u64) -> Result<Shrunk, SolverError> {
    let q = TargetQuery::new(state, target, lo, hi);
    let min = match solver.minimize(&q)? {
        OptOutcome::Optimum { value, .. } => value,
        OptOutcome::Unknown { reason: UnknownReason::Unsat, .. } => return Ok(Shrunk::Empty),
        OptOutcome::Unknown { reason, .. } => return Ok(Shrunk::Unknown { lo, hi, reason }),
    };
    match solver.maximize(&q.with_range(min, hi))? {
        OptOutcome::Optimum { value, .. } => Ok(Shrunk::Interval(min, value)),
        // min is feasible, so unsat here means the solver contradicted itself
        OptOutcome::Unknown { reason, .. } => Ok(Shrunk::Unknown { lo: min, hi, reason }),
    }
}

/// The state restricted to `lo <= target <= hi`.
pub fn restrict(state: &SymbolicState, target: &Expr, lo: u64, hi: u64) -> Result<SymbolicState, SolverError> {
    Ok(state.conjoin(&target.in_range(lo, hi))?)
}

/// The state the algorithms work on: the path constraint plus the
/// assumption predicate, if any.
fn base_state(state: &SymbolicState, target: &TargetSpec) -> Result<SymbolicState, SolverError> {
    match target.assumption_predicate() {
        Some(p) => Ok(state.conjoin(&p)?),
        None => Ok(state.clone()),
    }
}

/// Domain extraction by shrinking intervals to their feasible bounds,
/// proving strong control over them, or splitting around an infeasible
/// value. Intervals are explored lower half first.
///
/// Once `split_limit` splits have been made, pending intervals are still
/// shrunk and checked but no longer split: an interval that would need a
/// split is emitted weak and the domain is marked `budget_exhausted`.
pub fn shrink_and_split(
    solver: &mut Solver,
    state: &SymbolicState,
    target: &TargetSpec,
    config: &SnsConfig,
) -> Result<ControlDomain, SolverError> {
    if config.use_fixed_bits {
        return sns_fixed_bits(solver, state, target, config);
    }
    sns_with(solver, state, target, config.split_limit, None)
}

fn sns_with(
    solver: &mut Solver,
    state: &SymbolicState,
    target: &TargetSpec,
    split_limit: u64,
    fixed: Option<FixedBits>,
) -> Result<ControlDomain, SolverError> {
    let base = base_state(state, target)?;
    let v = &target.expr;
    let mut domain = ControlDomain { fixed_bits: fixed, ..ControlDomain::empty(target.width) };
    let mut stack: Vec<(u64, u64)> = target.assumption_intervals();
    stack.reverse();
    while let Some((lo, hi)) = stack.pop() {
        let (a, b) = match shrink(solver, &base, v, lo, hi)? {
            Shrunk::Empty => continue,
            Shrunk::Interval(a, b) => (a, b),
            Shrunk::Unknown { lo, hi, reason } => {
                debug!("bounds of [{lo}, {hi}] unknown ({reason}); kept weak");
                domain.intervals.push(ControlInterval::weak(lo, hi));
                continue;
            }
        };
        let q = TargetQuery { fixed, assume: target.value_predicate(), ..TargetQuery::new(&base, v, a, b) };
        match solver.sc_counterexample(&q)? {
            ScOutcome::StronglyControlled => domain.intervals.push(ControlInterval::strong(a, b)),
            ScOutcome::Unknown(reason) => {
                debug!("strong control over [{a}, {b}] unknown ({reason})");
                domain.intervals.push(ControlInterval::weak(a, b));
            }
            ScOutcome::Counterexample(_) if domain.splits_used >= split_limit => {
                domain.budget_exhausted = true;
                domain.intervals.push(ControlInterval::weak(a, b));
            }
            ScOutcome::Counterexample(y) => {
                domain.splits_used += 1;
                if y < b {
                    stack.push((y + 1, b));
                }
                if y > a {
                    stack.push((a, y - 1));
                }
            }
        }
    }
    domain.intervals.sort_by_key(|i| i.lo);
    domain.exact = !domain.budget_exhausted && domain.all_strong();
    Ok(domain)
}

/// Fixed bits of the target from a pair of models that disagree on every
/// other bit. `None` when no such pair exists or the solver gives up, in
/// which case nothing is assumed fixed.
pub fn fixed_bits(solver: &mut Solver, state: &SymbolicState, target: &Expr) -> Result<Option<FixedBits>, SolverError> {
    Ok(match solver.fixed_bits(state, target)? {
        FixedBitsOutcome::Found(fb) => Some(fb),
        FixedBitsOutcome::NoPair => None,
        FixedBitsOutcome::Unknown(reason) => {
            warn!("fixed-bits query failed ({reason}); continuing without fixed bits");
            None
        }
    })
}

/// Shrink and split with strong-control checks restricted to values that
/// agree with the target's fixed bits.
pub fn sns_fixed_bits(
    solver: &mut Solver,
    state: &SymbolicState,
    target: &TargetSpec,
    config: &SnsConfig,
) -> Result<ControlDomain, SolverError> {
    let base = base_state(state, target)?;
    if solver.check_sat(&base)?.is_unsat() {
        return Ok(ControlDomain::empty(target.width));
    }
    let fb = fixed_bits(solver, &base, &target.expr)?.filter(|fb| !fb.is_trivial());
    sns_with(solver, state, target, config.split_limit, fb)
}

/// The exact domain by enumeration, restricted to the assumption set.
pub fn brute_force_domain(state: &SymbolicState, target: &TargetSpec, budget_bits: u32) -> Result<ControlDomain, SolverError> {
    let values: Vec<u64> =
        enumerate_feasible(state, &target.expr, budget_bits)?.into_iter().filter(|v| target.assumes(*v)).collect();
    Ok(ControlDomain::from_values(target.width, &values))
}

//! A uniform solver interface over two backends: an exhaustive enumerator of
//! input assignments (exact at small widths) and an external SMT-LIB2 process.
//!
//! [`Solver`] wraps a backend with query accounting and derives min/max by
//! bisection when native optimization is not wanted.

pub(crate) mod compile;
mod external;
mod internal;
pub mod query;

use std::collections::BTreeMap;
use std::fmt;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::FixedBits;
use crate::formula::{EvalError, Expr, FormulaError, SymbolicState};

pub use external::ExternalBackend;
pub use internal::InternalBackend;

/// Environment variable naming the external solver command line.
pub const SOLVER_CMD_ENV: &str = "CTRL_SOLVER_CMD";
pub const DEFAULT_SOLVER_CMD: &str = "z3 -in";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);
pub const DEFAULT_BUDGET_BITS: u32 = 20;

/// A partial assignment of input variables.
pub type Model = BTreeMap<String, u64>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum UnknownReason {
    /// The queried state has no model (reported by optimization only).
    Unsat,
    Timeout,
    Unsupported(String),
    ProcessFailure(String),
}

impl fmt::Display for UnknownReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UnknownReason::Unsat => write!(f, "unsatisfiable"),
            UnknownReason::Timeout => write!(f, "timeout"),
            UnknownReason::Unsupported(s) => write!(f, "unsupported: {s}"),
            UnknownReason::ProcessFailure(s) => write!(f, "solver failure: {s}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Sat(Model),
    Unsat,
    Unknown(UnknownReason),
}

impl Verdict {
    pub fn is_sat(&self) -> bool {
        matches!(self, Verdict::Sat(_))
    }

    pub fn is_unsat(&self) -> bool {
        matches!(self, Verdict::Unsat)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OptOutcome {
    Optimum { value: u64, model: Model },
    /// Best bound established before giving up, if any.
    Unknown { reason: UnknownReason, best: Option<u64> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ScOutcome {
    StronglyControlled,
    Counterexample(u64),
    Unknown(UnknownReason),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FixedBitsOutcome {
    Found(FixedBits),
    /// No pair of models spans exactly the non-fixed bits.
    NoPair,
    Unknown(UnknownReason),
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("internal enumeration needs {bits} input bits, budget is {budget}")]
    BudgetExceeded { bits: u32, budget: u32 },
    #[error("cannot launch solver `{command}`: {reason}")]
    Launch { command: String, reason: String },
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error("invalid solver configuration: {0}")]
    Config(String),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Direction {
    Min,
    Max,
}

/// A target-centric query: `state ∧ lo <= target <= hi`.
///
/// `fixed` and `assume` only shape the value set checked by
/// [`Backend::sc_counterexample`]: that set is
/// `{y in [lo, hi] : y & mask == bits, assume(y)}` where `assume` is a
/// predicate over [`crate::formula::TARGET_SYMBOL`].
#[derive(Clone, Copy, Debug)]
pub struct TargetQuery<'a> {
    pub state: &'a SymbolicState,
    pub target: &'a Expr,
    pub lo: u64,
    pub hi: u64,
    pub fixed: Option<FixedBits>,
    pub assume: Option<&'a Expr>,
}

impl<'a> TargetQuery<'a> {
    pub fn new(state: &'a SymbolicState, target: &'a Expr, lo: u64, hi: u64) -> Self {
        TargetQuery { state, target, lo, hi, fixed: None, assume: None }
    }

    pub fn with_range(&self, lo: u64, hi: u64) -> Self {
        TargetQuery { lo, hi, ..*self }
    }
}

pub trait Backend: Send {
    fn name(&self) -> &str;
    fn check_sat(&mut self, state: &SymbolicState) -> Result<Verdict, SolverError>;
    /// Satisfiability of the state with the target restricted to the range.
    fn check_range(&mut self, q: &TargetQuery) -> Result<Verdict, SolverError>;
    /// A single optimization query over the restricted state.
    fn optimize(&mut self, q: &TargetQuery, dir: Direction) -> Result<OptOutcome, SolverError>;
    /// The state, a renamed copy, and the targets forced apart.
    fn find_distinct(&mut self, state: &SymbolicState, target: &Expr) -> Result<Verdict, SolverError>;
    /// Some value of the assumption set that the target cannot take.
    fn sc_counterexample(&mut self, q: &TargetQuery) -> Result<ScOutcome, SolverError>;
    /// Fixed bits of the target from a pair of models differing on every
    /// other bit.
    fn fixed_bits(&mut self, state: &SymbolicState, target: &Expr) -> Result<FixedBitsOutcome, SolverError>;
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendKind {
    Internal,
    External { command: Vec<String> },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptMode {
    Native,
    BinarySearch,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolverConfig {
    pub backend: BackendKind,
    pub timeout: Duration,
    /// Maximum number of input bits the internal backend will enumerate.
    pub budget_bits: u32,
    pub optimization: OptMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            backend: BackendKind::Internal,
            timeout: DEFAULT_TIMEOUT,
            budget_bits: DEFAULT_BUDGET_BITS,
            optimization: OptMode::Native,
        }
    }
}

impl SolverConfig {
    pub fn internal() -> Self {
        SolverConfig::default()
    }

    /// External backend using `$CTRL_SOLVER_CMD`, or `z3 -in` when unset.
    pub fn external() -> Self {
        let cmd = std::env::var(SOLVER_CMD_ENV).unwrap_or_else(|_| DEFAULT_SOLVER_CMD.to_string());
        SolverConfig::external_command(&cmd)
    }

    pub fn external_command(cmd: &str) -> Self {
        SolverConfig {
            backend: BackendKind::External { command: cmd.split_whitespace().map(str::to_string).collect() },
            ..SolverConfig::default()
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_optimization(mut self, mode: OptMode) -> Self {
        self.optimization = mode;
        self
    }

    pub fn with_budget(mut self, bits: u32) -> Self {
        self.budget_bits = bits;
        self
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if self.timeout.is_zero() {
            return Err(SolverError::Config("timeout must be positive".into()));
        }
        if let BackendKind::External { command } = &self.backend {
            if command.is_empty() {
                return Err(SolverError::Config("empty solver command".into()));
            }
        }
        Ok(())
    }

    pub fn open(&self) -> Result<Solver, SolverError> {
        self.validate()?;
        let backend: Box<dyn Backend> = match &self.backend {
            BackendKind::Internal => Box::new(InternalBackend::new(self.budget_bits)),
            BackendKind::External { command } => Box::new(ExternalBackend::new(command.clone(), self.timeout)?),
        };
        Ok(Solver::new(backend, self.optimization))
    }
}

/// Query counters. Wall time is kept apart because it is not reproducible.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverStats {
    pub queries: u64,
    pub sat: u64,
    pub unsat: u64,
    pub unknown: u64,
    pub optimizations: u64,
    pub quantified: u64,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl SolverStats {
    pub fn absorb(&mut self, other: &SolverStats) {
        self.queries += other.queries;
        self.sat += other.sat;
        self.unsat += other.unsat;
        self.unknown += other.unknown;
        self.optimizations += other.optimizations;
        self.quantified += other.quantified;
        self.elapsed += other.elapsed;
    }
}

/// A single-owner solver session.
pub struct Solver {
    backend: Box<dyn Backend>,
    mode: OptMode,
    stats: SolverStats,
}

impl Solver {
    pub fn new(backend: Box<dyn Backend>, mode: OptMode) -> Solver {
        Solver { backend, mode, stats: SolverStats::default() }
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    pub fn stats(&self) -> &SolverStats {
        &self.stats
    }

    fn tally(&mut self, v: &Verdict, started: Instant) {
        self.stats.queries += 1;
        self.stats.elapsed += started.elapsed();
        match v {
            Verdict::Sat(_) => self.stats.sat += 1,
            Verdict::Unsat => self.stats.unsat += 1,
            Verdict::Unknown(_) => self.stats.unknown += 1,
        }
    }

    pub fn check_sat(&mut self, state: &SymbolicState) -> Result<Verdict, SolverError> {
        let t = Instant::now();
        let v = self.backend.check_sat(state)?;
        self.tally(&v, t);
        Ok(v)
    }

    pub fn check_range(&mut self, q: &TargetQuery) -> Result<Verdict, SolverError> {
        let t = Instant::now();
        let v = self.backend.check_range(q)?;
        self.tally(&v, t);
        Ok(v)
    }

    /// Satisfiability with the target pinned to `value`.
    pub fn check_value(&mut self, state: &SymbolicState, target: &Expr, value: u64) -> Result<Verdict, SolverError> {
        self.check_range(&TargetQuery::new(state, target, value, value))
    }

    pub fn minimize(&mut self, q: &TargetQuery) -> Result<OptOutcome, SolverError> {
        self.optimize(q, Direction::Min)
    }

    pub fn maximize(&mut self, q: &TargetQuery) -> Result<OptOutcome, SolverError> {
        self.optimize(q, Direction::Max)
    }

    pub fn optimize(&mut self, q: &TargetQuery, dir: Direction) -> Result<OptOutcome, SolverError> {
        self.stats.optimizations += 1;
        match self.mode {
            OptMode::Native => {
                let t = Instant::now();
                let out = self.backend.optimize(q, dir)?;
                self.stats.queries += 1;
                self.stats.elapsed += t.elapsed();
                match &out {
                    OptOutcome::Optimum { .. } => self.stats.sat += 1,
                    OptOutcome::Unknown { reason: UnknownReason::Unsat, .. } => self.stats.unsat += 1,
                    OptOutcome::Unknown { .. } => self.stats.unknown += 1,
                }
                Ok(out)
            }
            OptMode::BinarySearch => self.bisect(q, dir),
        }
    }

    /// Min/max by bisection over satisfiability queries. Every sat answer
    /// tightens the bound to the model's own target value, so at most
    /// `ceil(log2(hi - lo + 1)) + 1` queries are issued.
    fn bisect(&mut self, q: &TargetQuery, dir: Direction) -> Result<OptOutcome, SolverError> {
        let value_of = |m: &Model| eval_model(m, q.target);
        let (mut best, mut model) = match self.check_range(q)? {
            Verdict::Sat(m) => match value_of(&m) {
                Ok(v) => (v, m),
                Err(e) => return Ok(bad_model(e, None)),
            },
            Verdict::Unsat => return Ok(OptOutcome::Unknown { reason: UnknownReason::Unsat, best: None }),
            Verdict::Unknown(r) => return Ok(OptOutcome::Unknown { reason: r, best: None }),
        };
        // invariant: the optimum lies in [lo, best] (min) or [best, hi] (max)
        let (mut lo, mut hi) = (q.lo, q.hi);
        loop {
            let (a, b) = match dir {
                Direction::Min if best > lo => (lo, lo + (best - 1 - lo) / 2),
                Direction::Max if best < hi => (hi - (hi - best - 1) / 2, hi),
                _ => return Ok(OptOutcome::Optimum { value: best, model }),
            };
            match self.check_range(&q.with_range(a, b))? {
                Verdict::Sat(m) => match value_of(&m) {
                    Ok(v) => {
                        best = v;
                        model = m;
                    }
                    Err(e) => return Ok(bad_model(e, Some(best))),
                },
                Verdict::Unsat => match dir {
                    Direction::Min => lo = b + 1,
                    Direction::Max => hi = a - 1,
                },
                Verdict::Unknown(r) => return Ok(OptOutcome::Unknown { reason: r, best: Some(best) }),
            }
        }
    }

    pub fn find_distinct(&mut self, state: &SymbolicState, target: &Expr) -> Result<Verdict, SolverError> {
        let t = Instant::now();
        let v = self.backend.find_distinct(state, target)?;
        self.tally(&v, t);
        Ok(v)
    }

    pub fn sc_counterexample(&mut self, q: &TargetQuery) -> Result<ScOutcome, SolverError> {
        let t = Instant::now();
        let out = self.backend.sc_counterexample(q)?;
        self.stats.queries += 1;
        self.stats.quantified += 1;
        self.stats.elapsed += t.elapsed();
        match out {
            ScOutcome::Counterexample(_) => self.stats.sat += 1,
            ScOutcome::StronglyControlled => self.stats.unsat += 1,
            ScOutcome::Unknown(_) => self.stats.unknown += 1,
        }
        Ok(out)
    }

    pub fn fixed_bits(&mut self, state: &SymbolicState, target: &Expr) -> Result<FixedBitsOutcome, SolverError> {
        let t = Instant::now();
        let out = self.backend.fixed_bits(state, target)?;
        self.stats.queries += 1;
        self.stats.quantified += 1;
        self.stats.elapsed += t.elapsed();
        match out {
            FixedBitsOutcome::Found(_) => self.stats.sat += 1,
            FixedBitsOutcome::NoPair => self.stats.unsat += 1,
            FixedBitsOutcome::Unknown(_) => self.stats.unknown += 1,
        }
        Ok(out)
    }
}

fn bad_model(e: EvalError, best: Option<u64>) -> OptOutcome {
    OptOutcome::Unknown { reason: UnknownReason::ProcessFailure(format!("incomplete model: {e}")), best }
}

/// Evaluates `expr` under a model.
pub fn eval_model(model: &Model, expr: &Expr) -> Result<u64, EvalError> {
    expr.eval(&|n| model.get(n).copied())
}

/// Every feasible value of `target` under `state`, sorted, by exhaustive
/// enumeration of the inputs that occur in either.
pub fn enumerate_feasible(state: &SymbolicState, target: &Expr, budget_bits: u32) -> Result<Vec<u64>, SolverError> {
    InternalBackend::new(budget_bits).feasible_values(state, target)
}

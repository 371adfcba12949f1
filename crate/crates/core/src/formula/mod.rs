//! Bitvector constraint systems: expressions, symbolic states, targets and
//! the SMT-LIB2 subset used to exchange them.

pub mod expr;
pub mod sexp;
pub mod smt2;
pub mod state;

use thiserror::Error;

pub use expr::{width_mask, BinOp, EvalError, Expr, ExprKind, ExtendKind, Sort, SortError, UnOp};
pub use sexp::{Pos, SyntaxError};
pub use smt2::{parse_smt2, parse_state, parse_term, term_from_sexp, serialize_problem, serialize_smt2, Problem};
pub use state::{
    duplicate, duplicate_avoiding, normalize_intervals, Affine, Assumption, Input, Passthrough, SymbolicState,
    TargetSpec, TARGET_SYMBOL,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormulaError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error(transparent)]
    Sort(#[from] SortError),
    #[error("undeclared variable `{0}`")]
    Undeclared(String),
    #[error("`{0}` is declared twice")]
    Redeclared(String),
    #[error("width mismatch in {context}: expected {expected}, found {found}")]
    WidthMismatch { context: String, expected: u32, found: u32 },
    #[error("expected a boolean term, got `{0}`")]
    NotBoolean(String),
    #[error("expected a bitvector term, got `{0}`")]
    NotBitvector(String),
    #[error("unsupported construct `{0}`")]
    Unsupported(String),
    #[error("no `ctrl-target` annotation")]
    MissingTarget,
    #[error("more than one `ctrl-target` annotation")]
    MultipleTargets,
    #[error("malformed annotation: {0}")]
    BadAnnotation(String),
    #[error("invalid assumption: {0}")]
    BadAssumption(String),
    #[error("at {pos}: {error}")]
    Located { pos: Pos, error: Box<FormulaError> },
}

impl FormulaError {
    pub(crate) fn at(self, pos: Pos) -> FormulaError {
        match self {
            e @ (FormulaError::Located { .. } | FormulaError::Syntax(_)) => e,
            e => FormulaError::Located { pos, error: Box::new(e) },
        }
    }

    /// The underlying error without position information.
    pub fn root(&self) -> &FormulaError {
        match self {
            FormulaError::Located { error, .. } => error.root(),
            e => e,
        }
    }
}

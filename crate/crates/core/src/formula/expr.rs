//! Bitvector expressions.
//!
//! Expressions are immutable, reference-counted DAG nodes. Every node carries
//! its sort, computed and checked at construction. Boolean-valued terms use
//! [`Sort::Bool`] and evaluate to `0`/`1`.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Largest supported bitvector width.
pub const MAX_WIDTH: u32 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sort {
    Bool,
    Bv(u32),
}

impl Sort {
    pub fn width(self) -> Option<u32> {
        match self {
            Sort::Bool => None,
            Sort::Bv(w) => Some(w),
        }
    }

    pub fn is_bool(self) -> bool {
        matches!(self, Sort::Bool)
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Bool => write!(f, "Bool"),
            Sort::Bv(w) => write!(f, "(_ BitVec {w})"),
        }
    }
}

/// Unary operators. `Not` is `bvnot` on bitvectors and `not` on booleans.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnOp {
    Not,
    Neg,
}

/// Binary operators. `And`, `Or`, `Xor` and `Eq` accept boolean operands too.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Udiv,
    Urem,
    And,
    Or,
    Xor,
    Shl,
    Lshr,
    Ashr,
    Eq,
    Ult,
    Ule,
    Slt,
    Sle,
}

impl BinOp {
    pub fn is_predicate(self) -> bool {
        matches!(self, BinOp::Eq | BinOp::Ult | BinOp::Ule | BinOp::Slt | BinOp::Sle)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExtendKind {
    Zero,
    Sign,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SortError {
    #[error("width {0} is outside the supported range 1..=64")]
    BadWidth(u32),
    #[error("operator {op} expects operands of equal sort, got {lhs} and {rhs}")]
    Mismatch { op: String, lhs: Sort, rhs: Sort },
    #[error("operator {op} does not accept operand sort {sort}")]
    Operand { op: String, sort: Sort },
    #[error("extract [{hi}:{lo}] is invalid for width {width}")]
    Extract { hi: u32, lo: u32, width: u32 },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("variable `{0}` has no value")]
    Unassigned(String),
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Expr(Arc<Node>);

#[derive(PartialEq, Eq, Hash)]
struct Node {
    kind: ExprKind,
    sort: Sort,
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub enum ExprKind {
    Var(Arc<str>),
    Const(u64),
    Unary(UnOp, Expr),
    Binary(BinOp, Expr, Expr),
    Ite(Expr, Expr, Expr),
    Extract { hi: u32, lo: u32, arg: Expr },
    Extend { kind: ExtendKind, by: u32, arg: Expr },
    Concat(Expr, Expr),
}

/// All-ones mask for a width in `1..=64`.
pub fn width_mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

fn check_width(width: u32) -> Result<u32, SortError> {
    if (1..=MAX_WIDTH).contains(&width) {
        Ok(width)
    } else {
        Err(SortError::BadWidth(width))
    }
}

fn sign_extend(value: u64, width: u32) -> i64 {
    if width >= 64 {
        value as i64
    } else {
        let shift = 64 - width;
        ((value << shift) as i64) >> shift
    }
}

impl Expr {
    fn mk(kind: ExprKind, sort: Sort) -> Expr {
        Expr(Arc::new(Node { kind, sort }))
    }

    pub fn kind(&self) -> &ExprKind {
        &self.0.kind
    }

    pub fn sort(&self) -> Sort {
        self.0.sort
    }

    /// Bit width; booleans report 1.
    pub fn width(&self) -> u32 {
        self.sort().width().unwrap_or(1)
    }

    pub fn is_bool(&self) -> bool {
        self.sort().is_bool()
    }

    pub fn try_var(name: &str, width: u32) -> Result<Expr, SortError> {
        let w = check_width(width)?;
        Ok(Expr::mk(ExprKind::Var(Arc::from(name)), Sort::Bv(w)))
    }

    /// Bitvector variable. Panics on a width outside `1..=64`.
    pub fn var(name: &str, width: u32) -> Expr {
        Expr::try_var(name, width).expect("valid variable width")
    }

    pub fn try_constant(value: u64, width: u32) -> Result<Expr, SortError> {
        let w = check_width(width)?;
        Ok(Expr::mk(ExprKind::Const(value & width_mask(w)), Sort::Bv(w)))
    }

    /// Constant reduced modulo `2^width`.
    pub fn constant(value: u64, width: u32) -> Expr {
        Expr::try_constant(value, width).expect("valid constant width")
    }

    pub fn bool_const(value: bool) -> Expr {
        Expr::mk(ExprKind::Const(value as u64), Sort::Bool)
    }

    pub fn try_unary(op: UnOp, arg: Expr) -> Result<Expr, SortError> {
        let sort = arg.sort();
        if op == UnOp::Neg && sort.is_bool() {
            return Err(SortError::Operand { op: "bvneg".into(), sort });
        }
        Ok(Expr::mk(ExprKind::Unary(op, arg), sort))
    }

    pub fn try_binary(op: BinOp, lhs: Expr, rhs: Expr) -> Result<Expr, SortError> {
        let (ls, rs) = (lhs.sort(), rhs.sort());
        if ls != rs {
            return Err(SortError::Mismatch { op: format!("{op:?}"), lhs: ls, rhs: rs });
        }
        let bool_ok = matches!(op, BinOp::And | BinOp::Or | BinOp::Xor | BinOp::Eq);
        if ls.is_bool() && !bool_ok {
            return Err(SortError::Operand { op: format!("{op:?}"), sort: ls });
        }
        let sort = if op.is_predicate() { Sort::Bool } else { ls };
        Ok(Expr::mk(ExprKind::Binary(op, lhs, rhs), sort))
    }

    pub fn try_ite(cond: Expr, then: Expr, els: Expr) -> Result<Expr, SortError> {
        if !cond.is_bool() {
            return Err(SortError::Operand { op: "ite".into(), sort: cond.sort() });
        }
        if then.sort() != els.sort() {
            return Err(SortError::Mismatch { op: "ite".into(), lhs: then.sort(), rhs: els.sort() });
        }
        let sort = then.sort();
        Ok(Expr::mk(ExprKind::Ite(cond, then, els), sort))
    }

    pub fn try_extract(hi: u32, lo: u32, arg: Expr) -> Result<Expr, SortError> {
        let width = match arg.sort() {
            Sort::Bv(w) => w,
            s => return Err(SortError::Operand { op: "extract".into(), sort: s }),
        };
        if hi < lo || hi >= width {
            return Err(SortError::Extract { hi, lo, width });
        }
        Ok(Expr::mk(ExprKind::Extract { hi, lo, arg }, Sort::Bv(hi - lo + 1)))
    }

    pub fn try_extend(kind: ExtendKind, by: u32, arg: Expr) -> Result<Expr, SortError> {
        let width = match arg.sort() {
            Sort::Bv(w) => w,
            s => return Err(SortError::Operand { op: "extend".into(), sort: s }),
        };
        let w = check_width(width + by)?;
        if by == 0 {
            return Ok(arg);
        }
        Ok(Expr::mk(ExprKind::Extend { kind, by, arg }, Sort::Bv(w)))
    }

    pub fn try_concat(hi: Expr, lo: Expr) -> Result<Expr, SortError> {
        match (hi.sort(), lo.sort()) {
            (Sort::Bv(a), Sort::Bv(b)) => {
                let w = check_width(a + b)?;
                Ok(Expr::mk(ExprKind::Concat(hi, lo), Sort::Bv(w)))
            }
            (a, b) => Err(SortError::Mismatch { op: "concat".into(), lhs: a, rhs: b }),
        }
    }

    /// Binary node; panics on a sort mismatch. Meant for internally built
    /// terms whose sorts are known to agree.
    pub fn binary(op: BinOp, lhs: &Expr, rhs: &Expr) -> Expr {
        Expr::try_binary(op, lhs.clone(), rhs.clone()).expect("well-sorted binary term")
    }

    pub fn not(arg: &Expr) -> Expr {
        Expr::try_unary(UnOp::Not, arg.clone()).expect("well-sorted not")
    }

    pub fn eq(lhs: &Expr, rhs: &Expr) -> Expr {
        Expr::binary(BinOp::Eq, lhs, rhs)
    }

    pub fn ule(lhs: &Expr, rhs: &Expr) -> Expr {
        Expr::binary(BinOp::Ule, lhs, rhs)
    }

    pub fn ult(lhs: &Expr, rhs: &Expr) -> Expr {
        Expr::binary(BinOp::Ult, lhs, rhs)
    }

    /// Conjunction of a list; the empty list is `true`.
    pub fn and_all(terms: &[Expr]) -> Expr {
        let mut it = terms.iter();
        match it.next() {
            None => Expr::bool_const(true),
            Some(first) => it.fold(first.clone(), |acc, t| Expr::binary(BinOp::And, &acc, t)),
        }
    }

    /// `lo <= self <= hi` as a pair of unsigned comparisons.
    pub fn in_range(&self, lo: u64, hi: u64) -> Expr {
        let w = self.width();
        let lo_c = Expr::constant(lo, w);
        let hi_c = Expr::constant(hi, w);
        Expr::binary(BinOp::And, &Expr::ule(&lo_c, self), &Expr::ule(self, &hi_c))
    }

    pub fn as_const(&self) -> Option<u64> {
        match self.kind() {
            ExprKind::Const(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_var(&self) -> Option<&str> {
        match self.kind() {
            ExprKind::Var(n) => Some(n),
            _ => None,
        }
    }

    /// Names of all variables occurring in the term.
    pub fn variables(&self) -> BTreeSet<Arc<str>> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub(crate) fn collect_vars(&self, out: &mut BTreeSet<Arc<str>>) {
        let mut stack = vec![self];
        let mut seen = std::collections::HashSet::new();
        while let Some(e) = stack.pop() {
            if !seen.insert(Arc::as_ptr(&e.0)) {
                continue;
            }
            match e.kind() {
                ExprKind::Var(n) => {
                    out.insert(n.clone());
                }
                ExprKind::Const(_) => {}
                ExprKind::Unary(_, a) | ExprKind::Extract { arg: a, .. } | ExprKind::Extend { arg: a, .. } => {
                    stack.push(a)
                }
                ExprKind::Binary(_, a, b) | ExprKind::Concat(a, b) => {
                    stack.push(a);
                    stack.push(b);
                }
                ExprKind::Ite(c, t, f) => {
                    stack.push(c);
                    stack.push(t);
                    stack.push(f);
                }
            }
        }
    }

    /// Widths of variables as they occur in the term, for declaration checks.
    pub fn variable_sorts(&self) -> Vec<(Arc<str>, u32)> {
        let mut out = Vec::new();
        self.visit(&mut |e| {
            if let ExprKind::Var(n) = e.kind() {
                out.push((n.clone(), e.width()));
            }
        });
        out
    }

    fn visit(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        match self.kind() {
            ExprKind::Var(_) | ExprKind::Const(_) => {}
            ExprKind::Unary(_, a) | ExprKind::Extract { arg: a, .. } | ExprKind::Extend { arg: a, .. } => a.visit(f),
            ExprKind::Binary(_, a, b) | ExprKind::Concat(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            ExprKind::Ite(c, t, e) => {
                c.visit(f);
                t.visit(f);
                e.visit(f);
            }
        }
    }

    /// Rebuilds the term with every variable replaced by `f(name)` when it
    /// returns `Some`. Replacements must keep the variable's sort.
    pub fn substitute(&self, f: &dyn Fn(&str) -> Option<Expr>) -> Expr {
        let mut memo = std::collections::HashMap::new();
        self.subst_memo(f, &mut memo)
    }

    fn subst_memo(
        &self,
        f: &dyn Fn(&str) -> Option<Expr>,
        memo: &mut std::collections::HashMap<*const Node, Expr>,
    ) -> Expr {
        let key = Arc::as_ptr(&self.0);
        if let Some(e) = memo.get(&key) {
            return e.clone();
        }
        let sort = self.sort();
        let out = match self.kind() {
            ExprKind::Var(n) => match f(n) {
                Some(e) => {
                    debug_assert_eq!(e.sort(), sort, "substitution must preserve sorts");
                    e
                }
                None => self.clone(),
            },
            ExprKind::Const(_) => self.clone(),
            ExprKind::Unary(op, a) => Expr::mk(ExprKind::Unary(*op, a.subst_memo(f, memo)), sort),
            ExprKind::Binary(op, a, b) => {
                Expr::mk(ExprKind::Binary(*op, a.subst_memo(f, memo), b.subst_memo(f, memo)), sort)
            }
            ExprKind::Ite(c, t, e) => Expr::mk(
                ExprKind::Ite(c.subst_memo(f, memo), t.subst_memo(f, memo), e.subst_memo(f, memo)),
                sort,
            ),
            ExprKind::Extract { hi, lo, arg } => {
                Expr::mk(ExprKind::Extract { hi: *hi, lo: *lo, arg: arg.subst_memo(f, memo) }, sort)
            }
            ExprKind::Extend { kind, by, arg } => {
                Expr::mk(ExprKind::Extend { kind: *kind, by: *by, arg: arg.subst_memo(f, memo) }, sort)
            }
            ExprKind::Concat(a, b) => Expr::mk(ExprKind::Concat(a.subst_memo(f, memo), b.subst_memo(f, memo)), sort),
        };
        memo.insert(key, out.clone());
        out
    }

    /// Evaluates with modular bitvector semantics. Division by zero follows
    /// SMT-LIB: `bvudiv x 0 = ~0` and `bvurem x 0 = x`.
    pub fn eval(&self, env: &dyn Fn(&str) -> Option<u64>) -> Result<u64, EvalError> {
        let mut memo = std::collections::HashMap::new();
        self.eval_memo(env, &mut memo)
    }

    fn eval_memo(
        &self,
        env: &dyn Fn(&str) -> Option<u64>,
        memo: &mut std::collections::HashMap<*const Node, u64>,
    ) -> Result<u64, EvalError> {
        let key = Arc::as_ptr(&self.0);
        if let Some(v) = memo.get(&key) {
            return Ok(*v);
        }
        let v = match self.kind() {
            ExprKind::Var(n) => env(n).ok_or_else(|| EvalError::Unassigned(n.to_string()))? & width_mask(self.width()),
            ExprKind::Const(c) => *c,
            ExprKind::Unary(op, a) => apply_unary(*op, a.sort(), a.eval_memo(env, memo)?),
            ExprKind::Binary(op, a, b) => {
                let x = a.eval_memo(env, memo)?;
                let y = b.eval_memo(env, memo)?;
                apply_binary(*op, a.sort(), x, y)
            }
            ExprKind::Ite(c, t, e) => {
                if c.eval_memo(env, memo)? != 0 {
                    t.eval_memo(env, memo)?
                } else {
                    e.eval_memo(env, memo)?
                }
            }
            ExprKind::Extract { hi, lo, arg } => (arg.eval_memo(env, memo)? >> lo) & width_mask(hi - lo + 1),
            ExprKind::Extend { kind, arg, .. } => {
                let x = arg.eval_memo(env, memo)?;
                match kind {
                    ExtendKind::Zero => x,
                    ExtendKind::Sign => (sign_extend(x, arg.width()) as u64) & width_mask(self.width()),
                }
            }
            ExprKind::Concat(a, b) => {
                let hi = a.eval_memo(env, memo)?;
                let lo = b.eval_memo(env, memo)?;
                (hi << b.width()) | lo
            }
        };
        memo.insert(key, v);
        Ok(v)
    }

    /// Folds every constant subterm.
    pub fn fold_constants(&self) -> Expr {
        let sort = self.sort();
        let rebuilt = match self.kind() {
            ExprKind::Var(_) | ExprKind::Const(_) => return self.clone(),
            ExprKind::Unary(op, a) => Expr::mk(ExprKind::Unary(*op, a.fold_constants()), sort),
            ExprKind::Binary(op, a, b) => Expr::mk(ExprKind::Binary(*op, a.fold_constants(), b.fold_constants()), sort),
            ExprKind::Ite(c, t, e) => {
                let c = c.fold_constants();
                match c.as_const() {
                    Some(0) => return e.fold_constants(),
                    Some(_) => return t.fold_constants(),
                    None => Expr::mk(ExprKind::Ite(c, t.fold_constants(), e.fold_constants()), sort),
                }
            }
            ExprKind::Extract { hi, lo, arg } => {
                Expr::mk(ExprKind::Extract { hi: *hi, lo: *lo, arg: arg.fold_constants() }, sort)
            }
            ExprKind::Extend { kind, by, arg } => {
                Expr::mk(ExprKind::Extend { kind: *kind, by: *by, arg: arg.fold_constants() }, sort)
            }
            ExprKind::Concat(a, b) => Expr::mk(ExprKind::Concat(a.fold_constants(), b.fold_constants()), sort),
        };
        if rebuilt.variables().is_empty() {
            let v = rebuilt.eval(&|_| None).expect("closed term");
            Expr::mk(ExprKind::Const(v), sort)
        } else {
            rebuilt
        }
    }
}

pub(crate) fn apply_unary(op: UnOp, sort: Sort, x: u64) -> u64 {
    let w = sort.width().unwrap_or(1);
    match op {
        UnOp::Not => !x & width_mask(w),
        UnOp::Neg => x.wrapping_neg() & width_mask(w),
    }
}

pub(crate) fn apply_binary(op: BinOp, sort: Sort, x: u64, y: u64) -> u64 {
    let w = sort.width().unwrap_or(1);
    let m = width_mask(w);
    match op {
        BinOp::Add => x.wrapping_add(y) & m,
        BinOp::Sub => x.wrapping_sub(y) & m,
        BinOp::Mul => x.wrapping_mul(y) & m,
        BinOp::Udiv => x.checked_div(y).unwrap_or(m),
        BinOp::Urem => {
            if y == 0 {
                x
            } else {
                x % y
            }
        }
        BinOp::And => x & y,
        BinOp::Or => x | y,
        BinOp::Xor => x ^ y,
        BinOp::Shl => {
            if y >= w as u64 {
                0
            } else {
                (x << y) & m
            }
        }
        BinOp::Lshr => {
            if y >= w as u64 {
                0
            } else {
                x >> y
            }
        }
        BinOp::Ashr => {
            let s = sign_extend(x, w);
            let sh = y.min(63);
            ((s >> sh) as u64) & m
        }
        BinOp::Eq => (x == y) as u64,
        BinOp::Ult => (x < y) as u64,
        BinOp::Ule => (x <= y) as u64,
        BinOp::Slt => (sign_extend(x, w) < sign_extend(y, w)) as u64,
        BinOp::Sle => (sign_extend(x, w) <= sign_extend(y, w)) as u64,
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Quotes a symbol with `|...|` unless it is a simple SMT-LIB symbol.
pub fn quote_symbol(name: &str) -> String {
    let simple = !name.is_empty()
        && !name.starts_with(|c: char| c.is_ascii_digit())
        && name.chars().all(|c| c.is_ascii_alphanumeric() || "~!@$%^&*_-+=<>.?/".contains(c));
    if simple {
        name.to_string()
    } else {
        format!("|{name}|")
    }
}

fn bin_symbol(op: BinOp, boolean: bool) -> &'static str {
    match (op, boolean) {
        (BinOp::And, true) => "and",
        (BinOp::Or, true) => "or",
        (BinOp::Xor, true) => "xor",
        (BinOp::Add, _) => "bvadd",
        (BinOp::Sub, _) => "bvsub",
        (BinOp::Mul, _) => "bvmul",
        (BinOp::Udiv, _) => "bvudiv",
        (BinOp::Urem, _) => "bvurem",
        (BinOp::And, _) => "bvand",
        (BinOp::Or, _) => "bvor",
        (BinOp::Xor, _) => "bvxor",
        (BinOp::Shl, _) => "bvshl",
        (BinOp::Lshr, _) => "bvlshr",
        (BinOp::Ashr, _) => "bvashr",
        (BinOp::Eq, _) => "=",
        (BinOp::Ult, _) => "bvult",
        (BinOp::Ule, _) => "bvule",
        (BinOp::Slt, _) => "bvslt",
        (BinOp::Sle, _) => "bvsle",
    }
}

/// Renders as an SMT-LIB2 term.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind() {
            ExprKind::Var(n) => write!(f, "{}", quote_symbol(n)),
            ExprKind::Const(v) => match self.sort() {
                Sort::Bool => write!(f, "{}", if *v != 0 { "true" } else { "false" }),
                Sort::Bv(w) if w % 4 == 0 => write!(f, "#x{:0width$x}", v, width = (w / 4) as usize),
                Sort::Bv(w) => write!(f, "#b{:0width$b}", v, width = w as usize),
            },
            ExprKind::Unary(op, a) => {
                let sym = match (op, a.is_bool()) {
                    (UnOp::Not, true) => "not",
                    (UnOp::Not, false) => "bvnot",
                    (UnOp::Neg, _) => "bvneg",
                };
                write!(f, "({sym} {a})")
            }
            ExprKind::Binary(op, a, b) => write!(f, "({} {a} {b})", bin_symbol(*op, a.is_bool())),
            ExprKind::Ite(c, t, e) => write!(f, "(ite {c} {t} {e})"),
            ExprKind::Extract { hi, lo, arg } => write!(f, "((_ extract {hi} {lo}) {arg})"),
            ExprKind::Extend { kind, by, arg } => {
                let sym = match kind {
                    ExtendKind::Zero => "zero_extend",
                    ExtendKind::Sign => "sign_extend",
                };
                write!(f, "((_ {sym} {by}) {arg})")
            }
            ExprKind::Concat(a, b) => write!(f, "(concat {a} {b})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env<'a>(pairs: &'a [(&'a str, u64)]) -> impl Fn(&str) -> Option<u64> + 'a {
        move |n| pairs.iter().find(|(k, _)| *k == n).map(|(_, v)| *v)
    }

    #[test]
    fn eval_examples() {
        let x = Expr::var("x", 8);
        let e = Expr::binary(BinOp::Add, &x, &x);
        assert_eq!(e.eval(&env(&[("x", 3)])).unwrap(), 6);
        let inc = Expr::binary(BinOp::Add, &x, &Expr::constant(1, 8));
        assert_eq!(inc.eval(&env(&[("x", 255)])).unwrap(), 0);
        let div = Expr::binary(BinOp::Udiv, &x, &Expr::constant(0, 8));
        assert_eq!(div.eval(&env(&[("x", 7)])).unwrap(), 255);
        let rem = Expr::binary(BinOp::Urem, &x, &Expr::constant(0, 8));
        assert_eq!(rem.eval(&env(&[("x", 7)])).unwrap(), 7);
    }

    #[test]
    fn unassigned_variable_is_an_error() {
        let x = Expr::var("x", 8);
        assert_eq!(x.eval(&|_| None), Err(EvalError::Unassigned("x".into())));
    }

    #[test]
    fn constants_are_reduced() {
        assert_eq!(Expr::constant(0x1ff, 8).as_const(), Some(0xff));
    }

    #[test]
    fn sort_checks() {
        let x = Expr::var("x", 8);
        let y = Expr::var("y", 16);
        assert!(Expr::try_binary(BinOp::Add, x.clone(), y).is_err());
        assert!(Expr::try_extract(8, 0, x.clone()).is_err());
        assert!(Expr::try_extract(3, 4, x.clone()).is_err());
        assert_eq!(Expr::try_extract(7, 4, x.clone()).unwrap().width(), 4);
        let c = Expr::ule(&x, &x);
        assert!(Expr::try_binary(BinOp::Add, c.clone(), c.clone()).is_err());
        assert!(Expr::try_concat(Expr::var("a", 40), Expr::var("b", 40)).is_err());
    }

    #[test]
    fn signed_ops() {
        let x = Expr::var("x", 8);
        let zero = Expr::constant(0, 8);
        let slt = Expr::binary(BinOp::Slt, &x, &zero);
        assert_eq!(slt.eval(&env(&[("x", 0x80)])).unwrap(), 1);
        assert_eq!(slt.eval(&env(&[("x", 0x7f)])).unwrap(), 0);
        let sra = Expr::binary(BinOp::Ashr, &x, &Expr::constant(9, 8));
        assert_eq!(sra.eval(&env(&[("x", 0x80)])).unwrap(), 0xff);
        let sx = Expr::try_extend(ExtendKind::Sign, 8, x.clone()).unwrap();
        assert_eq!(sx.eval(&env(&[("x", 0x80)])).unwrap(), 0xff80);
    }

    #[test]
    fn display_is_smt2() {
        let x = Expr::var("x", 8);
        let t = Expr::ule(&x, &Expr::constant(0x29, 8));
        assert_eq!(t.to_string(), "(bvule x #x29)");
        assert_eq!(Expr::constant(5, 3).to_string(), "#b101");
        assert_eq!(quote_symbol("a b"), "|a b|");
    }

    #[test]
    fn fold_constants_collapses_closed_terms() {
        let e = Expr::binary(BinOp::Add, &Expr::constant(16, 8), &Expr::constant(8, 8));
        assert_eq!(e.fold_constants().as_const(), Some(24));
    }
}

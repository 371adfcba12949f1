//! Symbolic states (conjunctions of constraints over declared inputs) and
//! analysis targets.

use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::expr::{width_mask, Expr, Sort};
use super::sexp::Sexp;
use super::FormulaError;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Input {
    pub name: Arc<str>,
    pub width: u32,
}

/// Declarations and assertions over array terms, kept verbatim for external
/// solvers. They are never interpreted internally.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Passthrough {
    pub decls: Vec<(String, Sexp)>,
    pub asserts: Vec<Sexp>,
}

impl Passthrough {
    pub fn is_empty(&self) -> bool {
        self.decls.is_empty() && self.asserts.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SymbolicState {
    inputs: Vec<Input>,
    constraints: Vec<Expr>,
    passthrough: Passthrough,
}

impl SymbolicState {
    /// The trivially satisfiable state over `inputs`.
    pub fn new<S: AsRef<str>>(inputs: &[(S, u32)]) -> Result<Self, FormulaError> {
        let mut state = SymbolicState::default();
        for (name, width) in inputs {
            state.declare(name.as_ref(), *width)?;
        }
        Ok(state)
    }

    pub fn declare(&mut self, name: &str, width: u32) -> Result<(), FormulaError> {
        Expr::try_var(name, width)?;
        if self.input(name).is_some() || self.passthrough.decls.iter().any(|(n, _)| n == name) {
            return Err(FormulaError::Redeclared(name.to_string()));
        }
        self.inputs.push(Input { name: Arc::from(name), width });
        Ok(())
    }

    pub fn inputs(&self) -> &[Input] {
        &self.inputs
    }

    pub fn constraints(&self) -> &[Expr] {
        &self.constraints
    }

    pub fn passthrough(&self) -> &Passthrough {
        &self.passthrough
    }

    pub(crate) fn passthrough_mut(&mut self) -> &mut Passthrough {
        &mut self.passthrough
    }

    pub fn input(&self, name: &str) -> Option<&Input> {
        self.inputs.iter().find(|i| &*i.name == name)
    }

    pub fn total_input_bits(&self) -> u32 {
        self.inputs.iter().map(|i| i.width).sum()
    }

    /// Checks that every variable of `e` is a declared input of matching width.
    pub fn check_expr(&self, e: &Expr) -> Result<(), FormulaError> {
        for (name, width) in e.variable_sorts() {
            match self.input(&name) {
                None => return Err(FormulaError::Undeclared(name.to_string())),
                Some(i) if i.width != width => {
                    return Err(FormulaError::WidthMismatch {
                        context: format!("variable `{name}`"),
                        expected: i.width,
                        found: width,
                    })
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    /// The state with `c` added to the conjunction.
    pub fn conjoin(&self, c: &Expr) -> Result<SymbolicState, FormulaError> {
        let mut out = self.clone();
        out.push_constraint(c.clone())?;
        Ok(out)
    }

    pub fn push_constraint(&mut self, c: Expr) -> Result<(), FormulaError> {
        if c.sort() != Sort::Bool {
            return Err(FormulaError::NotBoolean(c.to_string()));
        }
        self.check_expr(&c)?;
        self.constraints.push(c);
        Ok(())
    }

    /// Conjunction with `other`, whose variables must be disjoint or
    /// identically declared.
    pub fn union(&self, other: &SymbolicState) -> Result<SymbolicState, FormulaError> {
        let mut out = self.clone();
        for i in &other.inputs {
            match out.input(&i.name) {
                Some(j) if j.width != i.width => {
                    return Err(FormulaError::WidthMismatch {
                        context: format!("variable `{}`", i.name),
                        expected: j.width,
                        found: i.width,
                    })
                }
                Some(_) => {}
                None => out.inputs.push(i.clone()),
            }
        }
        out.constraints.extend(other.constraints.iter().cloned());
        out.passthrough.decls.extend(other.passthrough.decls.iter().cloned());
        out.passthrough.asserts.extend(other.passthrough.asserts.iter().cloned());
        Ok(out)
    }

    /// Every name declared by the state, inputs and passthrough alike.
    pub fn names(&self) -> BTreeSet<String> {
        self.inputs
            .iter()
            .map(|i| i.name.to_string())
            .chain(self.passthrough.decls.iter().map(|(n, _)| n.clone()))
            .collect()
    }

    /// Variables that actually occur in the constraints.
    pub fn used_variables(&self) -> BTreeSet<Arc<str>> {
        let mut out = BTreeSet::new();
        for c in &self.constraints {
            c.collect_vars(&mut out);
        }
        out
    }

    /// Renames every declared symbol through `rename`.
    pub fn rename(&self, rename: &dyn Fn(&str) -> String) -> SymbolicState {
        let names = self.names();
        let var_map = |n: &str| -> Option<Expr> {
            self.input(n).map(|i| Expr::var(&rename(&i.name), i.width))
        };
        let sym_map = |s: &str| -> Option<String> { names.contains(s).then(|| rename(s)) };
        SymbolicState {
            inputs: self.inputs.iter().map(|i| Input { name: Arc::from(rename(&i.name)), width: i.width }).collect(),
            constraints: self.constraints.iter().map(|c| c.substitute(&var_map)).collect(),
            passthrough: Passthrough {
                decls: self.passthrough.decls.iter().map(|(n, s)| (rename(n), s.clone())).collect(),
                asserts: self.passthrough.asserts.iter().map(|a| a.map_symbols(&sym_map)).collect(),
            },
        }
    }

    pub fn is_quantifier_free_bv(&self) -> bool {
        self.passthrough.is_empty()
    }
}

/// Offset applied to target values before scoring: `v ↦ v + offset`.
/// Values mapped outside `[0, 2^width - 1]` are dropped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Affine {
    #[serde(with = "crate::serde_num::i128_str")]
    pub offset: i128,
}

impl Affine {
    pub fn shift(offset: i128) -> Self {
        Affine { offset }
    }

    /// Image of `[lo, hi]` clipped to the domain, as (image, preimage) bounds.
    pub fn map_interval(&self, lo: u64, hi: u64, width: u32) -> Option<((u64, u64), (u64, u64))> {
        let max = width_mask(width) as i128;
        let a = lo as i128 + self.offset;
        let b = hi as i128 + self.offset;
        let ca = a.max(0);
        let cb = b.min(max);
        if ca > cb {
            return None;
        }
        let pre = ((ca - self.offset) as u64, (cb - self.offset) as u64);
        Some(((ca as u64, cb as u64), pre))
    }
}

/// Assumption set `E` restricting which target values are of interest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Assumption {
    /// Union of closed intervals.
    Intervals(Vec<(u64, u64)>),
    /// Boolean term over the inputs and the reserved symbol [`TARGET_SYMBOL`].
    Predicate(Expr),
}

/// Symbol standing for the target expression inside assumption predicates.
pub const TARGET_SYMBOL: &str = "$target";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TargetSpec {
    pub expr: Expr,
    pub width: u32,
    pub assumption: Option<Assumption>,
    pub transform: Option<Affine>,
}

impl TargetSpec {
    pub fn new(expr: Expr) -> Result<Self, FormulaError> {
        if expr.is_bool() {
            return Err(FormulaError::NotBitvector(expr.to_string()));
        }
        let width = expr.width();
        Ok(TargetSpec { expr, width, assumption: None, transform: None })
    }

    pub fn with_assumption(mut self, assumption: Assumption) -> Result<Self, FormulaError> {
        if let Assumption::Intervals(ivs) = &assumption {
            let max = width_mask(self.width);
            if ivs.is_empty() || ivs.iter().any(|&(lo, hi)| lo > hi || hi > max) {
                return Err(FormulaError::BadAssumption(format!("{ivs:?} is not a nonempty subset of the domain")));
            }
        }
        if let Assumption::Predicate(p) = &assumption {
            if !p.is_bool() {
                return Err(FormulaError::NotBoolean(p.to_string()));
            }
            // a value set must not depend on the inputs
            for (name, width) in p.variable_sorts() {
                if &*name != TARGET_SYMBOL || width != self.width {
                    return Err(FormulaError::BadAssumption(format!(
                        "`{p}` may only mention {TARGET_SYMBOL} (width {})",
                        self.width
                    )));
                }
            }
        }
        self.assumption = Some(assumption);
        Ok(self)
    }

    pub fn with_transform(mut self, transform: Affine) -> Self {
        self.transform = Some(transform);
        self
    }

    pub fn domain_max(&self) -> u64 {
        width_mask(self.width)
    }

    /// The assumption predicate instantiated on the target expression.
    pub fn assumption_predicate(&self) -> Option<Expr> {
        match &self.assumption {
            Some(Assumption::Predicate(p)) => Some(p.substitute(&|n| (n == TARGET_SYMBOL).then(|| self.expr.clone()))),
            _ => None,
        }
    }

    /// The raw predicate over [`TARGET_SYMBOL`], if any.
    pub fn value_predicate(&self) -> Option<&Expr> {
        match &self.assumption {
            Some(Assumption::Predicate(p)) => Some(p),
            _ => None,
        }
    }

    /// Whether `value` belongs to the assumption set (always true without one).
    pub fn assumes(&self, value: u64) -> bool {
        match &self.assumption {
            None => true,
            Some(Assumption::Intervals(ivs)) => ivs.iter().any(|&(lo, hi)| lo <= value && value <= hi),
            Some(Assumption::Predicate(p)) => {
                p.eval(&|n| (n == TARGET_SYMBOL).then_some(value)).map(|r| r == 1).unwrap_or(false)
            }
        }
    }

    /// Normalized interval assumption: sorted, merged, or the full domain.
    pub fn assumption_intervals(&self) -> Vec<(u64, u64)> {
        match &self.assumption {
            Some(Assumption::Intervals(ivs)) => normalize_intervals(ivs),
            _ => vec![(0, self.domain_max())],
        }
    }
}

/// Sorts and merges overlapping or adjacent closed intervals.
pub fn normalize_intervals(ivs: &[(u64, u64)]) -> Vec<(u64, u64)> {
    let mut v: Vec<(u64, u64)> = ivs.iter().copied().filter(|(a, b)| a <= b).collect();
    v.sort_unstable();
    let mut out: Vec<(u64, u64)> = Vec::with_capacity(v.len());
    for (lo, hi) in v {
        match out.last_mut() {
            Some((_, phi)) if lo <= phi.saturating_add(1) => *phi = (*phi).max(hi),
            _ => out.push((lo, hi)),
        }
    }
    out
}

/// A copy of `state` over fresh variable names, with `target` rewritten over
/// them. Fresh names are `<name>__dup<k>` for the smallest `k` free in both
/// the state and `avoid`.
pub fn duplicate_avoiding(
    state: &SymbolicState,
    target: &TargetSpec,
    avoid: &HashSet<String>,
) -> (SymbolicState, TargetSpec) {
    let names = state.names();
    let mut k = 1u64;
    let suffix = loop {
        let s = format!("__dup{k}");
        let clash = names.iter().any(|n| {
            let fresh = format!("{n}{s}");
            names.contains(&fresh) || avoid.contains(&fresh)
        });
        if !clash {
            break s;
        }
        k += 1;
    };
    let rename = |n: &str| format!("{n}{suffix}");
    let dup = state.rename(&rename);
    let var_map = |n: &str| state.input(n).map(|i| Expr::var(&rename(&i.name), i.width));
    let mut t = target.clone();
    t.expr = target.expr.substitute(&var_map);
    if let Some(Assumption::Predicate(p)) = &target.assumption {
        t.assumption = Some(Assumption::Predicate(p.substitute(&var_map)));
    }
    (dup, t)
}

/// A copy of `state` over fresh variable names.
pub fn duplicate(state: &SymbolicState, target: &TargetSpec) -> (SymbolicState, TargetSpec) {
    duplicate_avoiding(state, target, &HashSet::new())
}

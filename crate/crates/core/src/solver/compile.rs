//! Expressions flattened into a straight-line register program, so that
//! enumerating millions of assignments does not walk `Arc` trees.

use std::collections::HashMap;
use std::sync::Arc;

use crate::formula::expr::{apply_binary, apply_unary};
use crate::formula::{width_mask, BinOp, Expr, ExprKind, ExtendKind, Sort, UnOp};

#[derive(Clone, Debug)]
enum Op {
    Var(usize),
    Const(u64),
    Unary(UnOp, Sort, usize),
    Binary(BinOp, Sort, usize, usize),
    Ite(usize, usize, usize),
    Extract { lo: u32, mask: u64, arg: usize },
    SignExtend { from: u32, mask: u64, arg: usize },
    Concat { low_width: u32, hi: usize, lo: usize },
}

#[derive(Clone, Debug)]
pub(crate) struct Program {
    ops: Vec<Op>,
    roots: Vec<usize>,
    vars: Vec<(Arc<str>, u32)>,
}

impl Program {
    /// Compiles `roots` over the variable order `vars`; every variable of
    /// the roots must appear in `vars`.
    pub(crate) fn compile(roots: &[Expr], vars: &[(Arc<str>, u32)]) -> Program {
        let slots: HashMap<&str, usize> = vars.iter().enumerate().map(|(i, (n, _))| (&**n, i)).collect();
        let mut b = Builder { ops: Vec::new(), memo: HashMap::new(), slots };
        let roots = roots.iter().map(|r| b.lower(r)).collect();
        Program { ops: b.ops, roots, vars: vars.to_vec() }
    }

    pub(crate) fn vars(&self) -> &[(Arc<str>, u32)] {
        &self.vars
    }

    pub(crate) fn registers(&self) -> Vec<u64> {
        vec![0; self.ops.len()]
    }

    /// Evaluates every op; root values are then read with [`Program::root`].
    pub(crate) fn run(&self, env: &[u64], regs: &mut [u64]) {
        for (i, op) in self.ops.iter().enumerate() {
            let v = match *op {
                Op::Var(s) => env[s],
                Op::Const(c) => c,
                Op::Unary(op, sort, a) => apply_unary(op, sort, regs[a]),
                Op::Binary(op, sort, a, b) => apply_binary(op, sort, regs[a], regs[b]),
                Op::Ite(c, t, e) => {
                    if regs[c] == 1 {
                        regs[t]
                    } else {
                        regs[e]
                    }
                }
                Op::Extract { lo, mask, arg } => (regs[arg] >> lo) & mask,
                Op::SignExtend { from, mask, arg } => {
                    let x = regs[arg];
                    if x >> (from - 1) & 1 == 1 {
                        (x | !width_mask(from)) & mask
                    } else {
                        x
                    }
                }
                Op::Concat { low_width, hi, lo } => (regs[hi] << low_width) | regs[lo],
            };
            regs[i] = v;
        }
    }

    pub(crate) fn root(&self, regs: &[u64], i: usize) -> u64 {
        regs[self.roots[i]]
    }

    pub(crate) fn root_count(&self) -> usize {
        self.roots.len()
    }
}

struct Builder<'a> {
    ops: Vec<Op>,
    memo: HashMap<Expr, usize>,
    slots: HashMap<&'a str, usize>,
}

impl Builder<'_> {
    fn push(&mut self, op: Op) -> usize {
        self.ops.push(op);
        self.ops.len() - 1
    }

    fn lower(&mut self, e: &Expr) -> usize {
        if let Some(&r) = self.memo.get(e) {
            return r;
        }
        let op = match e.kind() {
            ExprKind::Var(n) => Op::Var(*self.slots.get(&**n).unwrap_or_else(|| panic!("variable `{n}` has no slot"))),
            ExprKind::Const(c) => Op::Const(*c),
            ExprKind::Unary(op, a) => {
                let a_reg = self.lower(a);
                Op::Unary(*op, a.sort(), a_reg)
            }
            ExprKind::Binary(op, a, b) => {
                let (ra, rb) = (self.lower(a), self.lower(b));
                Op::Binary(*op, a.sort(), ra, rb)
            }
            ExprKind::Ite(c, t, f) => {
                let (rc, rt, rf) = (self.lower(c), self.lower(t), self.lower(f));
                Op::Ite(rc, rt, rf)
            }
            ExprKind::Extract { hi, lo, arg } => {
                let r = self.lower(arg);
                Op::Extract { lo: *lo, mask: width_mask(hi - lo + 1), arg: r }
            }
            ExprKind::Extend { kind, by, arg } => {
                let r = self.lower(arg);
                match kind {
                    ExtendKind::Zero => return self.alias(e, r),
                    ExtendKind::Sign => Op::SignExtend { from: arg.width(), mask: width_mask(arg.width() + by), arg: r },
                }
            }
            ExprKind::Concat(hi, lo) => {
                let (rh, rl) = (self.lower(hi), self.lower(lo));
                Op::Concat { low_width: lo.width(), hi: rh, lo: rl }
            }
        };
        let r = self.push(op);
        self.memo.insert(e.clone(), r);
        r
    }

    fn alias(&mut self, e: &Expr, r: usize) -> usize {
        self.memo.insert(e.clone(), r);
        r
    }
}

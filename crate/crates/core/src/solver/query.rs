//! SMT-LIB2 scripts for each kind of backend query. Every script is a fresh,
//! self-contained emission ending in `(check-sat)` and, where a model is
//! needed, one `(get-value ...)`.

use std::collections::HashSet;
use std::fmt::Write as _;

use super::Direction;
use super::TargetQuery;
use crate::formula::expr::quote_symbol;
use crate::formula::smt2::write_declarations;
use crate::formula::{duplicate_avoiding, BinOp, Expr, SymbolicState, TargetSpec, TARGET_SYMBOL};

/// A script plus the symbols whose values the answer will carry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Script {
    pub text: String,
    pub get: Vec<String>,
}

fn fresh(taken: &HashSet<String>, base: &str) -> String {
    if !taken.contains(base) {
        return base.to_string();
    }
    (1..).map(|k| format!("{base}_{k}")).find(|n| !taken.contains(n)).expect("unbounded supply")
}

fn taken_names(states: &[&SymbolicState]) -> HashSet<String> {
    states.iter().flat_map(|s| s.names()).collect()
}

fn conjunction(state: &SymbolicState) -> String {
    let mut parts: Vec<String> = state.constraints().iter().map(|c| c.to_string()).collect();
    parts.extend(state.passthrough().asserts.iter().map(|a| a.to_string()));
    match parts.len() {
        0 => "true".into(),
        1 => parts.pop().expect("one"),
        _ => format!("(and {})", parts.join(" ")),
    }
}

fn header(out: &mut String, state: &SymbolicState, quantified: bool) {
    let arrays = !state.passthrough().is_empty();
    let logic = match (quantified, arrays) {
        (false, false) => "QF_BV",
        (false, true) => "QF_ABV",
        (true, false) => "BV",
        (true, true) => "ABV",
    };
    let _ = writeln!(out, "(set-logic {logic})");
}

fn asserts(out: &mut String, state: &SymbolicState) {
    for c in state.constraints() {
        let _ = writeln!(out, "(assert {c})");
    }
    for a in &state.passthrough().asserts {
        let _ = writeln!(out, "(assert {a})");
    }
}

fn input_names(state: &SymbolicState) -> Vec<String> {
    state.inputs().iter().map(|i| i.name.to_string()).collect()
}

fn footer(out: &mut String, get: &[String]) {
    out.push_str("(check-sat)\n");
    if !get.is_empty() {
        let names: Vec<String> = get.iter().map(|n| quote_symbol(n)).collect();
        let _ = writeln!(out, "(get-value ({}))", names.join(" "));
    }
}

/// `state ∧ extras`, asking for every input.
pub fn sat(state: &SymbolicState, extras: &[Expr]) -> Script {
    let mut text = String::new();
    header(&mut text, state, false);
    write_declarations(&mut text, state);
    asserts(&mut text, state);
    for e in extras {
        let _ = writeln!(text, "(assert {e})");
    }
    let get = input_names(state);
    footer(&mut text, &get);
    Script { text, get }
}

/// `state ∧ lo <= target <= hi`.
pub fn range(q: &TargetQuery) -> Script {
    sat(q.state, &[q.target.in_range(q.lo, q.hi)])
}

/// Range query with an optimization directive on the target.
pub fn optimize(q: &TargetQuery, dir: Direction) -> Script {
    let mut text = String::new();
    header(&mut text, q.state, false);
    write_declarations(&mut text, q.state);
    asserts(&mut text, q.state);
    let _ = writeln!(text, "(assert {})", q.target.in_range(q.lo, q.hi));
    let directive = match dir {
        Direction::Min => "minimize",
        Direction::Max => "maximize",
    };
    let _ = writeln!(text, "({directive} {})", q.target);
    let get = input_names(q.state);
    footer(&mut text, &get);
    Script { text, get }
}

/// `φ ∧ φ' ∧ v != v'` over a renamed copy.
pub fn distinct(state: &SymbolicState, target: &Expr) -> Script {
    let spec = TargetSpec::new(target.clone()).expect("bitvector target");
    let (dup, dspec) = duplicate_avoiding(state, &spec, &HashSet::new());
    let mut text = String::new();
    header(&mut text, state, false);
    write_declarations(&mut text, state);
    write_declarations(&mut text, &dup);
    asserts(&mut text, state);
    asserts(&mut text, &dup);
    let _ = writeln!(text, "(assert (not (= {target} {})))", dspec.expr);
    let mut get = input_names(state);
    get.extend(input_names(&dup));
    footer(&mut text, &get);
    Script { text, get }
}

/// The universally quantified body `∀ inputs. φ ⇒ body`. Arrays of the
/// state are bound alongside the bitvector inputs.
fn forall(state: &SymbolicState, body: &str) -> String {
    let mut binders: Vec<String> =
        state.inputs().iter().map(|i| format!("({} (_ BitVec {}))", quote_symbol(&i.name), i.width)).collect();
    binders.extend(state.passthrough().decls.iter().map(|(n, s)| format!("({} {s})", quote_symbol(n))));
    let implication = format!("(=> {} {body})", conjunction(state));
    if binders.is_empty() {
        implication
    } else {
        format!("(forall ({}) {implication})", binders.join(" "))
    }
}

/// `∃y ∈ E. ∀x. φ(x) ⇒ v(x) != y`, with `y` a free constant so that its
/// value can be read back.
pub fn sc_counterexample(q: &TargetQuery) -> Script {
    let w = q.target.width();
    let y = fresh(&taken_names(&[q.state]), "ctrl_y");
    let yv = Expr::var(&y, w);
    let mut text = String::new();
    header(&mut text, q.state, true);
    let _ = writeln!(text, "(declare-const {} (_ BitVec {w}))", quote_symbol(&y));
    let _ = writeln!(text, "(assert {})", yv.in_range(q.lo, q.hi));
    if let Some(fb) = q.fixed {
        let masked = Expr::binary(BinOp::And, &yv, &Expr::constant(fb.mask, w));
        let _ = writeln!(text, "(assert {})", Expr::eq(&masked, &Expr::constant(fb.bits, w)));
    }
    if let Some(p) = q.assume {
        let inst = p.substitute(&|n| (n == TARGET_SYMBOL).then(|| yv.clone()));
        let _ = writeln!(text, "(assert {inst})");
    }
    let body = format!("(not (= {} {}))", q.target, quote_symbol(&y));
    let _ = writeln!(text, "(assert {})", forall(q.state, &body));
    let get = vec![y];
    footer(&mut text, &get);
    Script { text, get }
}

/// Two copies `φ'`, `φ''` with `mask = ~(v' ^ v'')`, `bits = v' & v''` and
/// `∀x. φ(x) ⇒ v(x) & mask = bits`. The answer carries `mask` then `bits`.
pub fn fixed_bits(state: &SymbolicState, target: &Expr) -> Script {
    let w = target.width();
    let spec = TargetSpec::new(target.clone()).expect("bitvector target");
    let (d1, s1) = duplicate_avoiding(state, &spec, &HashSet::new());
    let (d2, s2) = duplicate_avoiding(state, &spec, &d1.names().into_iter().collect());
    let taken = taken_names(&[state, &d1, &d2]);
    let mask = fresh(&taken, "ctrl_mask");
    let bits = fresh(&taken, "ctrl_bits");
    let (mv, bv) = (Expr::var(&mask, w), Expr::var(&bits, w));
    let mut text = String::new();
    header(&mut text, state, true);
    write_declarations(&mut text, &d1);
    write_declarations(&mut text, &d2);
    let _ = writeln!(text, "(declare-const {} (_ BitVec {w}))", quote_symbol(&mask));
    let _ = writeln!(text, "(declare-const {} (_ BitVec {w}))", quote_symbol(&bits));
    asserts(&mut text, &d1);
    asserts(&mut text, &d2);
    let xor = Expr::binary(BinOp::Xor, &s1.expr, &s2.expr);
    let _ = writeln!(text, "(assert (= {mv} (bvnot {xor})))");
    let _ = writeln!(text, "(assert (= {bv} {}))", Expr::binary(BinOp::And, &s1.expr, &s2.expr));
    let body = format!("(= {} {bv})", Expr::binary(BinOp::And, target, &mv));
    let _ = writeln!(text, "(assert {})", forall(state, &body));
    let get = vec![mask, bits];
    footer(&mut text, &get);
    Script { text, get }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::FixedBits;
    use crate::formula::parse_smt2;

    fn x_le_41() -> (SymbolicState, Expr) {
        let p = parse_smt2("(declare-const x (_ BitVec 8)) (assert (bvule x #x29)) ; ctrl-target: x width=8").unwrap();
        (p.state, p.target.expr)
    }

    #[test]
    fn sc_query_shape() {
        let (s, x) = x_le_41();
        let mut q = TargetQuery::new(&s, &x, 0, 255);
        q.fixed = FixedBits::new(1, 0);
        let sc = sc_counterexample(&q);
        assert_eq!(
            sc.text,
            "(set-logic BV)
(declare-const ctrl_y (_ BitVec 8))
(assert (and (bvule #x00 ctrl_y) (bvule ctrl_y #xff)))
(assert (= (bvand ctrl_y #x01) #x00))
(assert (forall ((x (_ BitVec 8))) (=> (bvule x #x29) (not (= x ctrl_y)))))
(check-sat)
(get-value (ctrl_y))
"
        );
    }

    #[test]
    fn fresh_names_avoid_inputs() {
        let p = parse_smt2("(declare-const ctrl_y (_ BitVec 8)) ; ctrl-target: ctrl_y width=8").unwrap();
        let q = TargetQuery::new(&p.state, &p.target.expr, 0, 255);
        let sc = sc_counterexample(&q);
        assert_eq!(sc.get, vec!["ctrl_y_1".to_string()]);
        // no inputs constrained: the body is still quantified over ctrl_y
        assert!(sc.text.contains("(forall ((ctrl_y (_ BitVec 8))) (=> true (not (= ctrl_y ctrl_y_1))))"));
    }

    #[test]
    fn fixed_bits_query_uses_two_copies() {
        let (s, x) = x_le_41();
        let fb = fixed_bits(&s, &x);
        assert!(fb.text.contains("(declare-const x__dup1 (_ BitVec 8))"));
        assert!(fb.text.contains("(declare-const x__dup2 (_ BitVec 8))"));
        assert!(fb.text.contains("(assert (= ctrl_mask (bvnot (bvxor x__dup1 x__dup2))))"));
        assert!(!fb.text.contains("(declare-const x (_ BitVec 8))"));
        assert_eq!(fb.get, vec!["ctrl_mask".to_string(), "ctrl_bits".to_string()]);
    }

    #[test]
    fn optimize_emits_directive() {
        let (s, x) = x_le_41();
        let q = TargetQuery::new(&s, &x, 3, 200);
        let o = optimize(&q, Direction::Max);
        assert!(o.text.contains("(maximize x)\n(check-sat)\n(get-value (x))\n"));
    }
}

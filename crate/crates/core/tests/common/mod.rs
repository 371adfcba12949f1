//! Random small constraint systems as SMT-LIB2 text.

#![allow(dead_code)]

use ctrldom::formula::{parse_smt2, Problem};
use proptest::prelude::*;

/// An 8-bit term over `x` (8 bits) and `y` (`ybits` bits, zero-extended).
pub fn term(ybits: u32) -> impl Strategy<Value = String> {
    let y = if ybits == 0 {
        "x".to_string()
    } else if ybits == 8 {
        "y".to_string()
    } else {
        format!("((_ zero_extend {}) y)", 8 - ybits)
    };
    let leaf = prop_oneof![
        3 => Just("x".to_string()),
        2 => Just(y),
        2 => any::<u8>().prop_map(|c| format!("#x{c:02x}")),
    ];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            4 => (
                prop::sample::select(vec!["bvadd", "bvsub", "bvand", "bvor", "bvxor", "bvmul"]),
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(op, a, b)| format!("({op} {a} {b})")),
            2 => (prop::sample::select(vec!["bvshl", "bvlshr"]), inner.clone(), 0u8..8)
                .prop_map(|(op, a, k)| format!("({op} {a} #x{k:02x})")),
            1 => (inner.clone(), inner.clone(), inner.clone(), inner)
                .prop_map(|(a, b, c, d)| format!("(ite (bvult {a} {b}) {c} {d})")),
        ]
    })
}

pub fn constraint(ybits: u32) -> impl Strategy<Value = String> {
    prop_oneof![
        (prop::sample::select(vec!["bvult", "bvule", "bvugt", "bvuge"]), term(ybits), term(ybits))
            .prop_map(|(op, a, b)| format!("({op} {a} {b})")),
        (prop::sample::select(vec!["bvult", "bvule", "bvugt", "bvuge"]), term(ybits), any::<u8>())
            .prop_map(|(op, a, c)| format!("({op} {a} #x{c:02x})")),
        (term(ybits), any::<u8>()).prop_map(|(a, c)| format!("(not (= {a} #x{c:02x}))")),
        (term(ybits), any::<u8>(), any::<u8>())
            .prop_map(|(a, m, b)| format!("(= (bvand {a} #x{m:02x}) #x{:02x})", b & m)),
        (term(ybits), 0u32..8).prop_map(|(a, i)| format!("(= ((_ extract {i} {i}) {a}) #b0)")),
    ]
}

/// SMT-LIB2 text of a problem with at most 16 input bits.
pub fn problem_text() -> impl Strategy<Value = String> {
    problem_text_with(vec![0, 4, 8])
}

/// Like [`problem_text`], with the width of `y` drawn from `ybits`.
pub fn problem_text_with(ybits: Vec<u32>) -> impl Strategy<Value = String> {
    prop::sample::select(ybits).prop_flat_map(|ybits| {
        (prop::collection::vec(constraint(ybits), 0..4), term(ybits)).prop_map(move |(cs, t)| {
            let mut s = String::from("(declare-const x (_ BitVec 8))\n");
            if ybits > 0 {
                s += &format!("(declare-const y (_ BitVec {ybits}))\n");
            }
            for c in cs {
                s += &format!("(assert {c})\n");
            }
            s += &format!("; ctrl-target: {t} width=8\n");
            s
        })
    })
}

pub fn problem() -> impl Strategy<Value = Problem> {
    problem_text().prop_map(|t| parse_smt2(&t).expect("generated problems parse"))
}

/// Problems over `x` alone.
pub fn small_problem() -> impl Strategy<Value = Problem> {
    problem_text_with(vec![0]).prop_map(|t| parse_smt2(&t).expect("generated problems parse"))
}

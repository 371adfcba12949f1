//! SMT-LIB2 subset: `declare-const` / `declare-fun` of bitvectors,
//! zero-arity `define-fun`, and `assert` of QF_BV terms. Array declarations
//! and any assertion touching them are kept verbatim (see [`Passthrough`]).
//!
//! The analysis target comes from a comment annotation:
//!
//! ```text
//! ; ctrl-target: <name-or-term> width=<w>
//! ; ctrl-assume: <boolean term, may use $target>
//! ; ctrl-transform: offset=<signed integer>
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;

use super::expr::{BinOp, Expr, ExtendKind, Sort, UnOp};
use super::sexp::{read_document, read_one, Atom, Pos, Sexp};
use super::state::{Affine, Assumption, Passthrough, SymbolicState, TargetSpec, TARGET_SYMBOL};
use super::FormulaError;

/// A parsed input file: the path constraint and the designated target.
#[derive(Clone, Debug)]
pub struct Problem {
    pub state: SymbolicState,
    pub target: TargetSpec,
}

#[derive(Default)]
struct Ctx {
    state: SymbolicState,
    defines: HashMap<String, Expr>,
    arrays: HashMap<String, Sexp>,
    lets: Vec<HashMap<String, Expr>>,
    target_var: Option<Expr>,
}

fn unsupported(what: impl Into<String>, pos: Pos) -> FormulaError {
    FormulaError::Unsupported(what.into()).at(pos)
}

fn parse_u32(s: &Sexp) -> Result<u32, FormulaError> {
    match s {
        Sexp::Atom(Atom::Numeral(n), p) => {
            n.parse().map_err(|_| FormulaError::BadAnnotation(format!("numeral {n} out of range")).at(*p))
        }
        other => Err(unsupported(format!("expected a numeral, got {other}"), other.pos())),
    }
}

fn parse_sort(s: &Sexp) -> Result<Option<u32>, FormulaError> {
    // Some(w) for bitvectors, None for arrays (passthrough).
    match s {
        Sexp::List(items, p) => match items.as_slice() {
            [u, bv, w] if u.symbol() == Some("_") && bv.symbol() == Some("BitVec") => {
                let w = parse_u32(w)?;
                Expr::try_var("_", w).map_err(|e| FormulaError::from(e).at(*p))?;
                Ok(Some(w))
            }
            [head, ..] if head.symbol() == Some("Array") => Ok(None),
            _ => Err(unsupported(format!("sort {s}"), *p)),
        },
        other => Err(unsupported(format!("sort {other}"), other.pos())),
    }
}

fn mentions_arrays(s: &Sexp, arrays: &HashMap<String, Sexp>) -> bool {
    let mut syms = Vec::new();
    s.symbols(&mut syms);
    syms.iter().any(|n| n == "select" || n == "store" || arrays.contains_key(n))
}

impl Ctx {
    fn lookup(&self, name: &str) -> Option<Expr> {
        for scope in self.lets.iter().rev() {
            if let Some(e) = scope.get(name) {
                return Some(e.clone());
            }
        }
        if let Some(e) = self.defines.get(name) {
            return Some(e.clone());
        }
        if name == TARGET_SYMBOL {
            if let Some(t) = &self.target_var {
                return Some(t.clone());
            }
        }
        self.state.input(name).map(|i| Expr::var(&i.name, i.width))
    }

    fn term(&mut self, s: &Sexp) -> Result<Expr, FormulaError> {
        let pos = s.pos();
        self.term_inner(s).map_err(|e| e.at(pos))
    }

    fn term_inner(&mut self, s: &Sexp) -> Result<Expr, FormulaError> {
        match s {
            Sexp::Atom(Atom::Symbol(name), _) => match name.as_str() {
                "true" => Ok(Expr::bool_const(true)),
                "false" => Ok(Expr::bool_const(false)),
                _ => self.lookup(name).ok_or_else(|| FormulaError::Undeclared(name.clone())),
            },
            Sexp::Atom(Atom::Hex(h), _) => {
                let w = 4 * h.len() as u32;
                let v = u64::from_str_radix(h, 16).map_err(|_| FormulaError::Unsupported(format!("#x{h}")))?;
                Ok(Expr::try_constant(v, w)?)
            }
            Sexp::Atom(Atom::Binary(b), _) => {
                let w = b.len() as u32;
                let v = u64::from_str_radix(b, 2).map_err(|_| FormulaError::Unsupported(format!("#b{b}")))?;
                Ok(Expr::try_constant(v, w)?)
            }
            Sexp::Atom(a, _) => Err(FormulaError::Unsupported(format!("{a:?}"))),
            Sexp::List(items, _) => self.app(items),
        }
    }

    fn app(&mut self, items: &[Sexp]) -> Result<Expr, FormulaError> {
        let Some((head, args)) = items.split_first() else {
            return Err(FormulaError::Unsupported("()".into()));
        };
        // indexed literal (_ bvN w)
        if head.symbol() == Some("_") {
            if let [Sexp::Atom(Atom::Symbol(lit), _), w] = args {
                if let Some(digits) = lit.strip_prefix("bv") {
                    let w = parse_u32(w)?;
                    let v: u128 = digits.parse().map_err(|_| FormulaError::Unsupported(format!("(_ {lit} {w})")))?;
                    return Ok(Expr::try_constant(v as u64, w)?);
                }
            }
            return Err(FormulaError::Unsupported(format!("(_ {})", args.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" "))));
        }
        // indexed operators ((_ extract i j) t) etc.
        if let Some(idx) = head.list() {
            let name = idx.get(1).and_then(|s| s.symbol()).unwrap_or("");
            if idx.first().and_then(|s| s.symbol()) != Some("_") || args.len() != 1 {
                return Err(FormulaError::Unsupported(head.to_string()));
            }
            let arg = self.term(&args[0])?;
            return match (name, &idx[2..]) {
                ("extract", [hi, lo]) => Ok(Expr::try_extract(parse_u32(hi)?, parse_u32(lo)?, arg)?),
                ("zero_extend", [k]) => Ok(Expr::try_extend(ExtendKind::Zero, parse_u32(k)?, arg)?),
                ("sign_extend", [k]) => Ok(Expr::try_extend(ExtendKind::Sign, parse_u32(k)?, arg)?),
                _ => Err(FormulaError::Unsupported(head.to_string())),
            };
        }
        let op = head.symbol().ok_or_else(|| FormulaError::Unsupported(head.to_string()))?;
        if op == "let" {
            return self.let_term(args);
        }
        if matches!(op, "forall" | "exists") {
            return Err(FormulaError::Unsupported(format!("quantifier `{op}` in input")));
        }
        let terms = args.iter().map(|a| self.term(a)).collect::<Result<Vec<_>, _>>()?;
        build_app(op, terms)
    }

    fn let_term(&mut self, args: &[Sexp]) -> Result<Expr, FormulaError> {
        let [bindings, body] = args else {
            return Err(FormulaError::Unsupported("malformed let".into()));
        };
        let bindings = bindings.list().ok_or_else(|| FormulaError::Unsupported("malformed let".into()))?;
        let mut scope = HashMap::new();
        for b in bindings {
            match b.list() {
                Some([name, value]) => {
                    let name = name.symbol().ok_or_else(|| FormulaError::Unsupported(name.to_string()))?;
                    scope.insert(name.to_string(), self.term(value)?);
                }
                _ => return Err(FormulaError::Unsupported(format!("let binding {b}"))),
            }
        }
        self.lets.push(scope);
        let out = self.term(body);
        self.lets.pop();
        out
    }

    fn command(&mut self, cmd: &Sexp) -> Result<(), FormulaError> {
        let items = cmd.list().ok_or_else(|| unsupported(cmd.to_string(), cmd.pos()))?;
        let name = items.first().and_then(|s| s.symbol()).unwrap_or("");
        match (name, &items[1..]) {
            ("set-logic" | "set-info" | "set-option" | "check-sat" | "get-model" | "get-value" | "exit", _) => Ok(()),
            ("declare-const", [n, sort]) | ("declare-fun", [n, Sexp::List(_, _), sort])
                if name == "declare-const" || items[2].list().is_some_and(|a| a.is_empty()) =>
            {
                let n = n.symbol().ok_or_else(|| unsupported(n.to_string(), n.pos()))?;
                match parse_sort(sort)? {
                    Some(w) => self.state.declare(n, w).map_err(|e| e.at(cmd.pos())),
                    None => {
                        self.arrays.insert(n.to_string(), sort.clone());
                        self.state.passthrough_mut().decls.push((n.to_string(), sort.clone()));
                        Ok(())
                    }
                }
            }
            ("define-fun", [n, params, sort, body]) if params.list().is_some_and(|p| p.is_empty()) => {
                let n = n.symbol().ok_or_else(|| unsupported(n.to_string(), n.pos()))?;
                let w = parse_sort(sort)?.ok_or_else(|| unsupported("array-valued define-fun", cmd.pos()))?;
                let e = self.term(body)?;
                if e.sort() != Sort::Bv(w) {
                    return Err(FormulaError::WidthMismatch { context: format!("define-fun {n}"), expected: w, found: e.width() }
                        .at(cmd.pos()));
                }
                self.defines.insert(n.to_string(), e);
                Ok(())
            }
            ("assert", [t]) => {
                if mentions_arrays(t, &self.arrays) {
                    self.state.passthrough_mut().asserts.push(t.clone());
                    return Ok(());
                }
                let e = self.term(t)?;
                self.state.push_constraint(e).map_err(|e| e.at(t.pos()))
            }
            _ => Err(unsupported(format!("command `{name}`"), cmd.pos())),
        }
    }
}

fn fold_binary(op: BinOp, terms: Vec<Expr>) -> Result<Expr, FormulaError> {
    let mut it = terms.into_iter();
    let first = it.next().ok_or_else(|| FormulaError::Unsupported(format!("{op:?} without operands")))?;
    let mut acc = first;
    let mut any = false;
    for t in it {
        acc = Expr::try_binary(op, acc, t)?;
        any = true;
    }
    if !any {
        return Err(FormulaError::Unsupported(format!("{op:?} needs two operands")));
    }
    Ok(acc)
}

fn two(op: &str, terms: Vec<Expr>) -> Result<(Expr, Expr), FormulaError> {
    let mut it = terms.into_iter();
    match (it.next(), it.next(), it.next()) {
        (Some(a), Some(b), None) => Ok((a, b)),
        _ => Err(FormulaError::Unsupported(format!("`{op}` expects two operands"))),
    }
}

fn build_app(op: &str, terms: Vec<Expr>) -> Result<Expr, FormulaError> {
    use BinOp::*;
    let chain = |bop: BinOp, terms: Vec<Expr>, swap: bool| -> Result<Expr, FormulaError> {
        if terms.len() < 2 {
            return Err(FormulaError::Unsupported(format!("`{op}` expects at least two operands")));
        }
        let mut parts = Vec::new();
        for w in terms.windows(2) {
            let (a, b) = if swap { (w[1].clone(), w[0].clone()) } else { (w[0].clone(), w[1].clone()) };
            parts.push(Expr::try_binary(bop, a, b)?);
        }
        fold_binary(And, parts.clone()).or_else(|_| Ok(parts.pop().expect("one part")))
    };
    match op {
        "not" | "bvnot" | "bvneg" => {
            let [a] = <[Expr; 1]>::try_from(terms).map_err(|_| FormulaError::Unsupported(format!("`{op}` arity")))?;
            if op == "not" && !a.is_bool() {
                return Err(FormulaError::NotBoolean(a.to_string()));
            }
            if op == "bvnot" && a.is_bool() {
                return Err(FormulaError::NotBitvector(a.to_string()));
            }
            Ok(Expr::try_unary(if op == "bvneg" { UnOp::Neg } else { UnOp::Not }, a)?)
        }
        "and" | "or" => {
            if let Some(t) = terms.iter().find(|t| !t.is_bool()) {
                return Err(FormulaError::NotBoolean(t.to_string()));
            }
            match terms.len() {
                0 => Ok(Expr::bool_const(op == "and")),
                1 => Ok(terms.into_iter().next().expect("one")),
                _ => fold_binary(if op == "and" { And } else { Or }, terms),
            }
        }
        "xor" => {
            if let Some(t) = terms.iter().find(|t| !t.is_bool()) {
                return Err(FormulaError::NotBoolean(t.to_string()));
            }
            fold_binary(Xor, terms)
        }
        "=>" => {
            let (a, b) = two(op, terms)?;
            if !a.is_bool() || !b.is_bool() {
                return Err(FormulaError::NotBoolean(format!("(=> {a} {b})")));
            }
            Ok(Expr::try_binary(Or, Expr::try_unary(UnOp::Not, a)?, b)?)
        }
        "=" => chain(Eq, terms, false),
        "distinct" => {
            let mut parts = Vec::new();
            for i in 0..terms.len() {
                for j in i + 1..terms.len() {
                    parts.push(Expr::try_unary(UnOp::Not, Expr::try_binary(Eq, terms[i].clone(), terms[j].clone())?)?);
                }
            }
            if parts.is_empty() {
                return Err(FormulaError::Unsupported("`distinct` expects two operands".into()));
            }
            Ok(Expr::and_all(&parts))
        }
        "ite" => {
            let [c, t, e] = <[Expr; 3]>::try_from(terms).map_err(|_| FormulaError::Unsupported("`ite` arity".into()))?;
            Ok(Expr::try_ite(c, t, e)?)
        }
        "bvadd" | "bvmul" | "bvand" | "bvor" | "bvxor" | "bvsub" | "concat" => {
            if let Some(t) = terms.iter().find(|t| t.is_bool()) {
                return Err(FormulaError::NotBitvector(t.to_string()));
            }
            if op == "concat" {
                let mut it = terms.into_iter();
                let first = it.next().ok_or_else(|| FormulaError::Unsupported("empty concat".into()))?;
                return it.try_fold(first, |acc, t| Expr::try_concat(acc, t).map_err(FormulaError::from));
            }
            let bop = match op {
                "bvadd" => Add,
                "bvmul" => Mul,
                "bvand" => And,
                "bvor" => Or,
                "bvxor" => Xor,
                _ => Sub,
            };
            fold_binary(bop, terms)
        }
        "bvudiv" | "bvurem" | "bvshl" | "bvlshr" | "bvashr" => {
            let (a, b) = two(op, terms)?;
            if a.is_bool() {
                return Err(FormulaError::NotBitvector(a.to_string()));
            }
            let bop = match op {
                "bvudiv" => Udiv,
                "bvurem" => Urem,
                "bvshl" => Shl,
                "bvlshr" => Lshr,
                _ => Ashr,
            };
            Ok(Expr::try_binary(bop, a, b)?)
        }
        "bvult" | "bvule" | "bvugt" | "bvuge" | "bvslt" | "bvsle" | "bvsgt" | "bvsge" => {
            let (a, b) = two(op, terms)?;
            if a.is_bool() {
                return Err(FormulaError::NotBitvector(a.to_string()));
            }
            let (bop, swap) = match op {
                "bvult" => (Ult, false),
                "bvule" => (Ule, false),
                "bvugt" => (Ult, true),
                "bvuge" => (Ule, true),
                "bvslt" => (Slt, false),
                "bvsle" => (Sle, false),
                "bvsgt" => (Slt, true),
                _ => (Sle, true),
            };
            let (a, b) = if swap { (b, a) } else { (a, b) };
            Ok(Expr::try_binary(bop, a, b)?)
        }
        other => Err(FormulaError::Unsupported(other.to_string())),
    }
}

fn parse_into_ctx(text: &str) -> Result<(Ctx, Vec<super::sexp::Comment>), FormulaError> {
    let doc = read_document(text)?;
    let mut ctx = Ctx::default();
    for cmd in &doc.items {
        ctx.command(cmd)?;
    }
    Ok((ctx, doc.comments))
}

/// Parses one term over the given bitvector variables.
pub fn parse_term(text: &str, vars: &[(&str, u32)]) -> Result<Expr, FormulaError> {
    term_from_sexp(&read_one(text)?, vars)
}

/// Converts an already-read s-expression into a term over `vars`.
pub fn term_from_sexp(s: &Sexp, vars: &[(&str, u32)]) -> Result<Expr, FormulaError> {
    let mut ctx = Ctx { state: SymbolicState::new(vars)?, ..Ctx::default() };
    ctx.term(s)
}

/// Parses a file into a state, ignoring target annotations.
pub fn parse_state(text: &str) -> Result<SymbolicState, FormulaError> {
    Ok(parse_into_ctx(text)?.0.state)
}

fn annotation<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    text.trim().strip_prefix(key).map(str::trim)
}

fn annotation_term(ctx: &mut Ctx, text: &str, line: u32) -> Result<Expr, FormulaError> {
    let sexp = read_one(text).map_err(|mut e| {
        e.pos.line = line;
        FormulaError::Syntax(e)
    })?;
    ctx.term(&sexp).map_err(|e| e.at(Pos { line, col: 1 }))
}

/// Parses a file with its `ctrl-target` annotation.
pub fn parse_smt2(text: &str) -> Result<Problem, FormulaError> {
    let (mut ctx, comments) = parse_into_ctx(text)?;
    let mut target = None;
    let mut assume = None;
    let mut transform = None;
    for c in &comments {
        let here = Pos { line: c.line, col: 1 };
        if let Some(rest) = annotation(&c.text, "ctrl-target:") {
            if target.is_some() {
                return Err(FormulaError::MultipleTargets.at(here));
            }
            let (term, width) = rest
                .rsplit_once("width=")
                .ok_or_else(|| FormulaError::BadAnnotation("ctrl-target needs `width=<w>`".into()).at(here))?;
            let width: u32 = width
                .trim()
                .parse()
                .map_err(|_| FormulaError::BadAnnotation(format!("bad width `{}`", width.trim())).at(here))?;
            let e = annotation_term(&mut ctx, term.trim(), c.line)?;
            if e.is_bool() {
                return Err(FormulaError::NotBitvector(e.to_string()).at(here));
            }
            if e.width() != width {
                return Err(FormulaError::WidthMismatch { context: "ctrl-target".into(), expected: width, found: e.width() }
                    .at(here));
            }
            target = Some(e);
        } else if let Some(rest) = annotation(&c.text, "ctrl-assume:") {
            assume = Some((rest.to_string(), c.line));
        } else if let Some(rest) = annotation(&c.text, "ctrl-transform:") {
            let off = rest
                .strip_prefix("offset=")
                .and_then(|v| v.trim().parse::<i128>().ok())
                .ok_or_else(|| FormulaError::BadAnnotation(format!("ctrl-transform `{rest}`")).at(here))?;
            transform = Some(Affine::shift(off));
        }
    }
    let expr = target.ok_or(FormulaError::MissingTarget)?;
    let mut spec = TargetSpec::new(expr.clone())?;
    if let Some((text, line)) = assume {
        ctx.target_var = Some(Expr::var(TARGET_SYMBOL, expr.width()));
        let p = annotation_term(&mut ctx, &text, line)?;
        if !p.is_bool() {
            return Err(FormulaError::NotBoolean(p.to_string()).at(Pos { line, col: 1 }));
        }
        spec = spec.with_assumption(Assumption::Predicate(p))?;
    }
    if let Some(t) = transform {
        spec = spec.with_transform(t);
    }
    Ok(Problem { state: ctx.state, target: spec })
}

fn logic(state: &SymbolicState) -> &'static str {
    if state.passthrough().is_empty() {
        "QF_BV"
    } else {
        "QF_ABV"
    }
}

pub(crate) fn write_declarations(out: &mut String, state: &SymbolicState) {
    for i in state.inputs() {
        let _ = writeln!(out, "(declare-const {} (_ BitVec {}))", super::expr::quote_symbol(&i.name), i.width);
    }
    write_passthrough_decls(out, state.passthrough());
}

pub(crate) fn write_passthrough_decls(out: &mut String, p: &Passthrough) {
    for (n, sort) in &p.decls {
        let _ = writeln!(out, "(declare-const {} {sort})", super::expr::quote_symbol(n));
    }
}

/// Emits declarations then assertions, with `extras` asserted last.
pub fn serialize_smt2(state: &SymbolicState, extras: &[Expr]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "(set-logic {})", logic(state));
    write_declarations(&mut out, state);
    for c in state.constraints().iter().chain(extras) {
        let _ = writeln!(out, "(assert {c})");
    }
    for a in &state.passthrough().asserts {
        let _ = writeln!(out, "(assert {a})");
    }
    out
}

/// Serializes a state together with its target annotations, in a form
/// accepted by [`parse_smt2`].
pub fn serialize_problem(state: &SymbolicState, target: &TargetSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "; ctrl-target: {} width={}", target.expr, target.width);
    match &target.assumption {
        Some(Assumption::Predicate(p)) => {
            let _ = writeln!(out, "; ctrl-assume: {p}");
        }
        Some(Assumption::Intervals(ivs)) => {
            let v = Expr::var(TARGET_SYMBOL, target.width);
            let parts: Vec<Expr> = ivs.iter().map(|&(lo, hi)| v.in_range(lo, hi)).collect();
            let mut it = parts.into_iter();
            let first = it.next().expect("nonempty assumption");
            let any = it.fold(first, |acc, p| Expr::binary(BinOp::Or, &acc, &p));
            let _ = writeln!(out, "; ctrl-assume: {any}");
        }
        None => {}
    }
    if let Some(t) = &target.transform {
        let _ = writeln!(out, "; ctrl-transform: offset={}", t.offset);
    }
    out.push_str(&serialize_smt2(state, &[]));
    out
}

//! Acceptance criteria 1-8, one verdict line each. Exits non-zero when any
//! criterion is unmet.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use ctrldom::control::{
    brute_force_domain, check_sc, check_wc, shrink_and_split, ControlDomain, SnsConfig,
};
use ctrldom::formula::{parse_smt2, Problem, SymbolicState, TargetSpec};
use ctrldom::metrics::{
    self, band, count_fixed_bits, fixed_bits_density, qc_bits, score_oob, wqc_constrained, wqc_exact,
    wqc_interval, Band, BaseWeight, Recipe, ScoredParam, Weight,
};
use ctrldom::newsome::{density_domain, newsome_domain, NewsomeConfig};
use ctrldom::solver::{enumerate_feasible, SolverConfig};
use ctrldom::toy::{builtin_fixtures, fixture, symbolic_single_path, taint_propagate, TaintOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const BUDGET: u32 = 20;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// A named problem of the small corpus.
struct Case {
    name: String,
    state: SymbolicState,
    target: TargetSpec,
}

/// Every sink of every internally analyzable fixture, plus `corpus/*.smt2`.
fn corpus() -> Vec<Case> {
    let mut out = Vec::new();
    for f in builtin_fixtures().iter().filter(|f| !f.needs_external) {
        for s in symbolic_single_path(&f.program(), &f.input()).unwrap() {
            out.push(Case { name: format!("{}:{}#{}", f.name, s.label, s.occurrence), state: s.state, target: s.target });
        }
    }
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    let mut files: Vec<_> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    for p in files.into_iter().filter(|p| p.extension().is_some_and(|e| e == "smt2")) {
        let Problem { state, target } = parse_smt2(&std::fs::read_to_string(&p).unwrap()).unwrap();
        out.push(Case { name: p.file_name().unwrap().to_string_lossy().into_owned(), state, target });
    }
    out
}

fn truth(state: &SymbolicState, target: &TargetSpec) -> BTreeSet<u64> {
    brute_force_domain(state, target, BUDGET).unwrap().values().collect()
}

fn sns(state: &SymbolicState, target: &TargetSpec, split_limit: u64, use_fixed_bits: bool) -> ControlDomain {
    let mut s = SolverConfig::internal().open().unwrap();
    shrink_and_split(&mut s, state, target, &SnsConfig { split_limit, use_fixed_bits }).unwrap()
}

fn log() -> Weight {
    Weight::Base(BaseWeight::Log)
}

/// Sizes of the two motivating overflows at full width, forty values each.
fn motex_pair() -> (ControlDomain, ControlDomain) {
    let a = ControlDomain::from_intervals(64, &[(u64::MAX - 295, u64::MAX - 256)]).unwrap();
    let b = ControlDomain::from_intervals(64, &[(1, 40)]).unwrap();
    (a, b)
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let (a, b) = motex_pair();
    let wqc_b = metrics::wqc(&b, &log(), None).unwrap();
    let wqc_a = metrics::wqc(&a, &log(), None).unwrap();
    let score_b = score_oob(None, Some(ScoredParam::new(&b)), &log()).unwrap();
    let (bits_a, bits_b) = (qc_bits(&a), qc_bits(&b));
    let elapsed = started.elapsed();
    let pass = (wqc_b - 0.0837).abs() <= 0.001
        && (score_b - 5.36).abs() <= 0.05
        && wqc_a <= 1e-4
        && (bits_a - 5.32).abs() <= 0.01
        && (bits_b - 5.32).abs() <= 0.01
        && elapsed < Duration::from_secs(1);
    outcome(
        pass,
        format!(
            "wQC(b)={wqc_b:.4} score(b)={score_b:.3} wQC(a)={wqc_a:.2e} QC bits a={bits_a:.3} b={bits_b:.3} in {:.1} ms",
            elapsed.as_secs_f64() * 1e3
        ),
    )
}

fn analyze(fixture: &str) -> (i32, Value) {
    let o = Command::new(env!("CARGO_BIN_EXE_ctrldom"))
        .args(["analyze", "--fixture", fixture, "--algo", "sns", "--solver", "internal"])
        .output()
        .unwrap();
    (o.status.code().unwrap_or(-1), serde_json::from_slice(&o.stdout).unwrap())
}

fn intervals(report: &Value) -> Vec<(u64, u64, String)> {
    report["targets"][0]["domain"]["intervals"]
        .as_array()
        .unwrap()
        .iter()
        .map(|i| {
            (
                i["lo"].as_str().unwrap().parse().unwrap(),
                i["hi"].as_str().unwrap().parse().unwrap(),
                i["guarantee"].as_str().unwrap().to_string(),
            )
        })
        .collect()
}

fn criterion_2() -> Outcome {
    let started = Instant::now();
    let (code2, r2) = analyze("motex2-8bit");
    let (code1, r1) = analyze("motex1-8bit");
    let enumerated = |name: &str| {
        let s = fixture(name).unwrap().sink_state(None).unwrap();
        enumerate_feasible(&s.state, &s.target.expr, BUDGET).unwrap()
    };
    let values = |ivs: &[(u64, u64, String)]| ivs.iter().flat_map(|(lo, hi, _)| *lo..=*hi).collect::<Vec<u64>>();
    let (iv2, iv1) = (intervals(&r2), intervals(&r1));
    let score = |r: &Value| r["targets"][0]["scores"]["oob_write"]["score"].as_f64().unwrap();
    let elapsed = started.elapsed();
    let exact2 = code2 == 0 && r2["targets"][0]["exact"] == true && iv2 == vec![(17, 41, "strong".to_string())];
    let matches = values(&iv2) == enumerated("motex2-8bit") && values(&iv1) == enumerated("motex1-8bit");
    let wraps = code1 == 0 && iv1.last().is_some_and(|(_, hi, _)| *hi == 255) && iv1.iter().all(|(lo, _, _)| *lo >= 128);
    let ordered = score(&r1) < score(&r2);
    outcome(
        exact2 && matches && wraps && ordered && elapsed < Duration::from_secs(10),
        format!(
            "motex2 {iv2:?} exit {code2}; motex1 {iv1:?} exit {code1}; oob scores {:.4} < {:.4}; {:.2} s",
            score(&r1),
            score(&r2),
            elapsed.as_secs_f64()
        ),
    )
}

fn random_term(rng: &mut ChaCha8Rng, depth: u32, y: &str) -> String {
    if depth == 0 || rng.gen_bool(0.3) {
        return match rng.gen_range(0..7) {
            0..=2 => "x".to_string(),
            3 | 4 => y.to_string(),
            _ => format!("#x{:02x}", rng.gen::<u8>()),
        };
    }
    let sub = |rng: &mut ChaCha8Rng| random_term(rng, depth - 1, y);
    match rng.gen_range(0..9) {
        0..=5 => {
            let op = ["bvadd", "bvsub", "bvand", "bvor", "bvxor", "bvmul"][rng.gen_range(0..6)];
            format!("({op} {} {})", sub(rng), sub(rng))
        }
        6 | 7 => {
            let op = ["bvshl", "bvlshr"][rng.gen_range(0..2)];
            format!("({op} {} #x{:02x})", sub(rng), rng.gen_range(0..8u8))
        }
        _ => format!("(ite (bvult {} {}) {} {})", sub(rng), sub(rng), sub(rng), sub(rng)),
    }
}

fn random_problem(rng: &mut ChaCha8Rng) -> String {
    let ybits = [0u32, 4, 8][rng.gen_range(0..3)];
    let y = match ybits {
        0 => "x".to_string(),
        8 => "y".to_string(),
        b => format!("((_ zero_extend {}) y)", 8 - b),
    };
    let mut s = String::from("(declare-const x (_ BitVec 8))\n");
    if ybits > 0 {
        s += &format!("(declare-const y (_ BitVec {ybits}))\n");
    }
    for _ in 0..rng.gen_range(0..4) {
        let c = match rng.gen_range(0..5) {
            0 => format!("(bvult {} {})", random_term(rng, 3, &y), random_term(rng, 3, &y)),
            1 => format!("(bvule {} #x{:02x})", random_term(rng, 3, &y), rng.gen::<u8>()),
            2 => format!("(not (= {} #x{:02x}))", random_term(rng, 3, &y), rng.gen::<u8>()),
            3 => {
                let (m, b) = (rng.gen::<u8>(), rng.gen::<u8>());
                format!("(= (bvand {} #x{m:02x}) #x{:02x})", random_term(rng, 3, &y), b & m)
            }
            _ => format!("(= ((_ extract {i} {i}) {}) #b0)", random_term(rng, 3, &y), i = rng.gen_range(0..8)),
        };
        s += &format!("(assert {c})\n");
    }
    s + &format!("; ctrl-target: {} width=8\n", random_term(rng, 3, &y))
}

fn criterion_3() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
    let (mut checked, mut with_unknown, mut exact_equal, mut sandwiched) = (0, 0, 0, 0);
    for _ in 0..500 {
        let p = parse_smt2(&random_problem(&mut rng)).unwrap();
        let truth = truth(&p.state, &p.target);
        let mut s = SolverConfig::internal().open().unwrap();
        let d = shrink_and_split(&mut s, &p.state, &p.target, &SnsConfig::with_split_limit(10_000)).unwrap();
        let all: BTreeSet<u64> = d.values().collect();
        let strong: BTreeSet<u64> = d.strong_values().collect();
        checked += 1;
        sandwiched += (strong.is_subset(&truth) && truth.is_subset(&all)) as u32;
        if s.stats().unknown > 0 {
            with_unknown += 1;
        } else {
            exact_equal += (d.exact && all == truth) as u32;
        }
    }
    let elapsed = started.elapsed();
    let without = checked - with_unknown;
    outcome(
        exact_equal == without && sandwiched == checked && elapsed < Duration::from_secs(300),
        format!(
            "{checked} systems: exact and equal {exact_equal}/{without} without unknowns, sandwich {sandwiched}/{checked}; {:.1} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0004);
    let n = 200;
    let (mut fb_ok, mut exhausted) = (0, 0);
    let mut failures = Vec::new();
    for _ in 0..n {
        let w = rng.gen_range(8..=16u32);
        let full = (1u64 << w) - 1;
        let m = rng.gen::<u64>() & full;
        let b = rng.gen::<u64>() & m;
        let lit = |v: u64| format!("#b{v:0w$b}", w = w as usize);
        let text = format!(
            "(declare-const v (_ BitVec {w}))\n(assert (= (bvand v {}) {}))\n; ctrl-target: v width={w}\n",
            lit(m),
            lit(b)
        );
        let p = parse_smt2(&text).unwrap();
        let truth = truth(&p.state, &p.target);
        let d = sns(&p.state, &p.target, 100, true);
        let ok = match (d.intervals.as_slice(), d.fixed_bits) {
            ([iv], Some(fb)) => {
                iv.is_strong()
                    && d.exact
                    && fb.mask & m == m
                    && count_fixed_bits(iv.lo, iv.hi, fb.mask, fb.bits) == truth.len() as u128
            }
            _ => false,
        };
        if ok {
            fb_ok += 1;
        } else if failures.len() < 3 {
            failures.push(format!("w={w} m={m:#x} b={b:#x}"));
        }
        exhausted += sns(&p.state, &p.target, 10, false).budget_exhausted as u32;
    }
    let ratio = exhausted as f64 / n as f64;
    outcome(
        fb_ok == n && ratio >= 0.9,
        format!(
            "fixed bits single strong interval with exact count {fb_ok}/{n}{}; plain S&S (limit 10) exhausted {exhausted}/{n} = {:.0}% (needs >= 90%)",
            if failures.is_empty() { String::new() } else { format!(" (e.g. {})", failures.join(", ")) },
            ratio * 100.0
        ),
    )
}

fn criterion_5() -> Outcome {
    let cases = corpus();
    let mut violations = Vec::new();
    for c in &cases {
        let mut s = SolverConfig::internal().open().unwrap();
        let wc = check_wc(&mut s, &c.state, &c.target.expr).unwrap();
        let sc = check_sc(&mut s, &c.state, &c.target).unwrap();
        let (Some(wc), Some(sc)) = (wc.as_bool(), sc.as_bool()) else {
            violations.push(format!("{}: unknown verdict", c.name));
            continue;
        };
        // weak control is a property of the path alone, assumptions aside
        let feasible = enumerate_feasible(&c.state, &c.target.expr, BUDGET).unwrap();
        let exact = truth(&c.state, &c.target);
        let assumed = (0..=c.target.domain_max()).filter(|v| c.target.assumes(*v)).count();
        if sc && !wc {
            violations.push(format!("{}: SC without WC", c.name));
        }
        if wc != (feasible.len() > 1) {
            violations.push(format!("{}: WC={wc} with {} values", c.name, feasible.len()));
        }
        if sc != (exact.len() == assumed) {
            violations.push(format!("{}: SC={sc} with {}/{assumed} values", c.name, exact.len()));
        }
    }
    outcome(violations.is_empty(), format!("{} corpus targets, {} violations {violations:?}", cases.len(), violations.len()))
}

fn criterion_6() -> Outcome {
    let f = fixture("listing3-8bit").unwrap();
    let program = f.program();
    let states = symbolic_single_path(&program, &f.input()).unwrap();
    let mut s = SolverConfig::internal().open().unwrap();
    let wc: Vec<bool> = states.iter().map(|st| check_wc(&mut s, &st.state, &st.target.expr).unwrap().is_true()).collect();
    let mut bad = Vec::new();
    let mut witnesses = 0;
    for options in TaintOptions::all() {
        let taint = taint_propagate(&program, &f.input(), options).unwrap();
        let mut witnessed = false;
        for (t, w) in taint.sinks.iter().zip(&wc) {
            if !t.tainted && *w {
                bad.push(format!("{} untainted but WC under {options:?}", t.label));
            }
            witnessed |= t.tainted && !*w;
        }
        if witnessed {
            witnesses += 1;
        } else {
            bad.push(format!("no tainted non-WC sink under {options:?}"));
        }
    }
    outcome(
        bad.is_empty(),
        format!("{} sinks; tainted-but-not-WC witnessed under {witnesses}/8 option sets {bad:?}", wc.len()),
    )
}

fn criterion_7() -> Outcome {
    let weights = [BaseWeight::Log, BaseWeight::InverseSquare, BaseWeight::InverseSqrt].map(Weight::Base);
    let mut domains: Vec<(String, ControlDomain)> = Vec::new();
    for c in corpus() {
        domains.push((format!("{} sns", c.name), sns(&c.state, &c.target, 10_000, false)));
        let fb = sns(&c.state, &c.target, 10_000, true);
        if fb.fixed_bits.is_some() {
            domains.push((format!("{} snsfb", c.name), fb));
        }
    }
    let (a, b) = motex_pair();
    domains.push(("motex-a".into(), a.clone()));
    domains.push(("motex-b".into(), b.clone()));
    let (mut worst, mut worst_at, mut compared, mut over) = (0.0f64, String::new(), 0, 0);
    for (name, d) in domains.iter().filter(|(_, d)| !d.is_empty()) {
        for w in &weights {
            let exact = wqc_exact(d, w, None).unwrap();
            let approx = match d.fixed_bits {
                Some(_) => wqc_constrained(d, w, None, &fixed_bits_density(d)).unwrap(),
                None => wqc_interval(d, w, None).unwrap(),
            };
            let err = if exact == 0.0 { approx.abs() } else { (approx - exact).abs() / exact };
            compared += 1;
            over += (err > 0.02) as u32;
            if err > worst {
                worst = err;
                worst_at = format!("{name} / {}: {approx:.4} vs {exact:.4}", w.name());
            }
        }
    }
    let cutoffs = Recipe::OobWrite.default_cutoffs();
    let bands = |d: &ControlDomain| -> Vec<Band> {
        weights.iter().map(|w| band(score_oob(None, Some(ScoredParam::new(d)), w).unwrap(), cutoffs)).collect()
    };
    let (ba, bb) = (bands(&a), bands(&b));
    let stable = ba.iter().all(|x| *x == ba[0]) && bb.iter().all(|x| *x == bb[0]);
    outcome(
        over == 0 && stable,
        format!(
            "{over}/{compared} comparisons beyond 2%, worst {:.1}% ({worst_at}); motex bands under log/inverse-square/inverse-sqrt: a {ba:?}, b {bb:?}",
            worst * 100.0
        ),
    )
}

fn criterion_8() -> Outcome {
    let (mut covered, mut total) = (0u32, 0u32);
    for name in ["even-8bit", "holes-8bit"] {
        let s = fixture(name).unwrap().sink_state(None).unwrap();
        let t = truth(&s.state, &s.target);
        for seed in 0..200u64 {
            let mut solver = SolverConfig::internal().open().unwrap();
            for iv in newsome_domain(&mut solver, &s.state, &s.target, &NewsomeConfig::with_seed(seed)).unwrap() {
                let density = t.range(iv.lo..=iv.hi).count() as f64 / iv.len() as f64;
                let (lo, hi) = iv.confidence_interval;
                total += 1;
                covered += (lo <= density && density <= hi) as u32;
            }
        }
    }
    let calibration = covered as f64 / total as f64;
    let cases = corpus();
    let mut narrower = 0;
    for c in &cases {
        let d = sns(&c.state, &c.target, 100, false);
        let mut solver = SolverConfig::internal().open().unwrap();
        let n = density_domain(
            c.target.width,
            &newsome_domain(&mut solver, &c.state, &c.target, &NewsomeConfig::with_seed(0)).unwrap(),
        );
        let (ds, ns): (BTreeSet<u64>, BTreeSet<u64>) = (d.values().collect(), n.values().collect());
        narrower += ds.is_subset(&ns) as u32;
    }
    let share = narrower as f64 / cases.len() as f64;
    outcome(
        calibration >= 0.9 && share >= 0.8,
        format!(
            "CI coverage {covered}/{total} = {:.1}%; S&S within the baseline on {narrower}/{} corpus targets = {:.0}%",
            calibration * 100.0,
            cases.len(),
            share * 100.0
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("motivating-example scores", criterion_1),
        ("end-to-end scaled motex", criterion_2),
        ("oracle equivalence", criterion_3),
        ("fixed-bits precision", criterion_4),
        ("propositions", criterion_5),
        ("taint vs weak control", criterion_6),
        ("integral approximation and weight stability", criterion_7),
        ("sampling baseline calibration", criterion_8),
    ];
    let mut failed = 0;
    for (k, (title, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|e| {
                let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
                outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
            });
        failed += !result.pass as u32;
        println!("criterion {} {}: {} | {}", k + 1, if result.pass { "PASS" } else { "FAIL" }, title, result.detail);
    }
    println!("{}/{} criteria met", criteria.len() as u32 - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

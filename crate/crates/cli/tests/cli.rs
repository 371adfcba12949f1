//! End-to-end runs of the `ctrldom` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ctrldom"))
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json_out(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stderr)))
}

fn interval(v: &Value) -> (u64, u64, String) {
    (
        v["lo"].as_str().unwrap().parse().unwrap(),
        v["hi"].as_str().unwrap().parse().unwrap(),
        v["guarantee"].as_str().unwrap().to_string(),
    )
}

fn write(dir: &TempDir, name: &str, v: &Value) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, serde_json::to_string(v).unwrap()).unwrap();
    p.display().to_string()
}

fn domain64(lo: u64, hi: u64) -> Value {
    json!({
        "width": 64,
        "intervals": [{"lo": lo.to_string(), "hi": hi.to_string(), "guarantee": "strong"}],
        "fixed_bits": null, "exact": true, "splits_used": 0, "budget_exhausted": false
    })
}

#[test]
fn analyze_motex2_is_exact() {
    let o = run(&["analyze", "--fixture", "motex2-8bit", "--algo", "sns", "--solver", "internal"]);
    assert_eq!(code(&o), 0);
    let r = json_out(&o);
    let t = &r["targets"][0];
    assert_eq!(t["exact"], true);
    let ivs: Vec<_> = t["domain"]["intervals"].as_array().unwrap().iter().map(interval).collect();
    assert_eq!(ivs, vec![(17, 41, "strong".to_string())]);
    assert_eq!(t["concrete"], "30");
}

#[test]
fn analyze_exhausted_budget_exits_two() {
    let o = run(&["analyze", "--fixture", "mul-8bit", "--algo", "sns", "--split-limit", "4"]);
    assert_eq!(code(&o), 2);
    let r = json_out(&o);
    assert_eq!(r["targets"][0]["domain"]["budget_exhausted"], true);
    assert_eq!(r["targets"][0]["exact"], false);
}

#[test]
fn analyze_missing_file_exits_one() {
    let o = run(&["analyze", "--smt2", "missing.smt2", "--algo", "sns"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.smt2"));
}

#[test]
fn analyze_rejects_bad_arguments() {
    assert_eq!(code(&run(&["analyze", "--fixture", "nope"])), 1);
    assert_eq!(code(&run(&["analyze", "--fixture", "mul-8bit", "--algo", "magic"])), 2);
    assert_eq!(code(&run(&["analyze", "--fixture", "mul-8bit", "--smt2", "x.smt2"])), 2);
    assert_eq!(code(&run(&["analyze", "--fixture", "mul-8bit", "--sink", "nowhere"])), 1);
}

#[test]
fn analyze_smt2_records_hash_and_assumption() {
    let path = root().join("corpus/assume-8bit.smt2");
    let o = run(&["analyze", "--smt2", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let r = json_out(&o);
    assert_eq!(r["input"]["kind"], "smt2");
    assert_eq!(r["input"]["sha256"].as_str().unwrap().len(), 64);
    let ivs: Vec<_> = r["targets"][0]["domain"]["intervals"].as_array().unwrap().iter().map(interval).collect();
    assert_eq!(ivs, vec![(64, 159, "strong".to_string())]);
    assert_eq!(r["targets"][0]["sc"]["verdict"], "false");
}

#[test]
fn exit_code_tracks_exactness() {
    for (algo, limit) in [("sns", "100"), ("sns", "3"), ("snsfb", "100"), ("newsome", "100"), ("brute", "100"), ("wc", "100"), ("sc", "100")] {
        for fixture in ["mul-8bit", "holes-8bit", "copy-8bit"] {
            let o = run(&["analyze", "--fixture", fixture, "--algo", algo, "--split-limit", limit]);
            let exact = json_out(&o)["targets"][0]["exact"].as_bool().unwrap();
            assert_eq!(code(&o), if exact { 0 } else { 2 }, "{fixture} {algo} {limit}");
        }
    }
}

#[test]
fn reports_are_reproducible_apart_from_run_info() {
    for algo in ["sns", "snsfb", "newsome"] {
        let args = ["analyze", "--fixture", "holes-8bit", "--algo", algo, "--seed", "9"];
        let (mut a, mut b) = (json_out(&run(&args)), json_out(&run(&args)));
        a.as_object_mut().unwrap().remove("run");
        b.as_object_mut().unwrap().remove("run");
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap(), "{algo}");
    }
}

#[test]
fn reports_validate_against_schema() {
    let schema: Value =
        serde_json::from_str(&std::fs::read_to_string(root().join("schemas/report.schema.json")).unwrap()).unwrap();
    let validator = jsonschema::JSONSchema::compile(&schema).expect("schema compiles");
    let corpus = root().join("corpus/wrap-16bit.smt2");
    let cases: Vec<Vec<&str>> = vec![
        vec!["--fixture", "mul-8bit", "--algo", "sns"],
        vec!["--fixture", "mul-8bit", "--algo", "snsfb"],
        vec!["--fixture", "even-8bit", "--algo", "newsome", "--seed", "3"],
        vec!["--fixture", "pinned-8bit", "--algo", "wc"],
        vec!["--fixture", "copy-8bit", "--algo", "sc"],
        vec!["--fixture", "motex1-8bit", "--algo", "brute"],
        vec!["--smt2", corpus.to_str().unwrap(), "--algo", "sns"],
    ];
    for args in cases {
        let o = run(&[&["analyze"], args.as_slice()].concat());
        let report = json_out(&o);
        let msgs: Vec<String> = match validator.validate(&report) {
            Ok(()) => Vec::new(),
            Err(errors) => errors.map(|e| format!("{} at {}", e, e.instance_path)).collect(),
        };
        assert!(msgs.is_empty(), "{args:?}: {msgs:?}");
    }
    let mut bad = json_out(&run(&["analyze", "--fixture", "mul-8bit"]));
    bad["targets"][0]["domain"]["intervals"][0]["lo"] = json!(0);
    assert!(!validator.is_valid(&bad));
}

#[test]
fn csv_dump_and_plot_agree() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("r.json");
    let csv = dir.path().join("r.csv");
    let o = run(&[
        "analyze", "--fixture", "holes-8bit", "--out", report.to_str().unwrap(), "--csv", csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let dumped = std::fs::read_to_string(&csv).unwrap();
    let plotted = run(&["plot", report.to_str().unwrap()]);
    assert_eq!(code(&plotted), 0);
    assert_eq!(String::from_utf8(plotted.stdout).unwrap(), dumped);
    assert!(!dumped.contains('\r'));
    let mut lines = dumped.lines();
    assert_eq!(lines.next(), Some("target,lo,hi,guarantee,density"));
    let los: Vec<u64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(los.len(), 40);
    assert!(los.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn plot_single_interval() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("r.json");
    run(&["analyze", "--fixture", "motex2-8bit", "--out", report.to_str().unwrap()]);
    let o = run(&["plot", report.to_str().unwrap()]);
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "target,lo,hi,guarantee,density\noverflow,17,41,strong,1\n");
}

#[test]
fn plot_fixed_bits_density() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("r.json");
    run(&["analyze", "--fixture", "mul-8bit", "--algo", "snsfb", "--out", report.to_str().unwrap()]);
    let text = String::from_utf8(run(&["plot", report.to_str().unwrap()]).stdout).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[..4], &["product", "0", "254", "strong"]);
    assert!((row[4].parse::<f64>().unwrap() - 128.0 / 255.0).abs() < 1e-12);
}

#[test]
fn plot_rejects_verdict_only_report() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("r.json");
    run(&["analyze", "--fixture", "mul-8bit", "--algo", "wc", "--out", report.to_str().unwrap()]);
    assert_eq!(code(&run(&["plot", report.to_str().unwrap()])), 1);
}

#[test]
fn score_examples() {
    let dir = TempDir::new().unwrap();
    // forty overflowing sizes just past the buffer
    let b = write(&dir, "b.json", &domain64(1, 40));
    let o = run(&["score", "--recipe", "oob-write", "--weight", "log", "--size", &b]);
    assert_eq!(code(&o), 0);
    let s = json_out(&o);
    assert!((s["score"].as_f64().unwrap() - 5.36).abs() < 0.01, "{s}");
    assert_eq!(s["band"], "medium");

    let a = write(&dir, "a.json", &domain64(u64::MAX - 295, u64::MAX - 256));
    let s = json_out(&run(&["score", "--recipe", "oob-write", "--weight", "log", "--size", &a]));
    assert!(s["score"].as_f64().unwrap() < 1e-3);
    assert_eq!(s["band"], "low");

    let cfh = write(&dir, "c.json", &domain64(0, (1 << 48) - 1));
    let s = json_out(&run(&["score", "--recipe", "cfh", "--target", &cfh]));
    assert!((s["score"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(s["band"], "high");
}

#[test]
fn score_reads_reports_and_orders_motex_pair() {
    let dir = TempDir::new().unwrap();
    let m1 = dir.path().join("m1.json");
    let m2 = dir.path().join("m2.json");
    run(&["analyze", "--fixture", "motex1-8bit", "--out", m1.to_str().unwrap()]);
    run(&["analyze", "--fixture", "motex2-8bit", "--out", m2.to_str().unwrap()]);
    let s1 = json_out(&run(&["score", "--recipe", "oob-write", "--size", m1.to_str().unwrap()]));
    let s2 = json_out(&run(&["score", "--recipe", "oob-write", "--size", m2.to_str().unwrap()]));
    assert!(s1["score"].as_f64().unwrap() < s2["score"].as_f64().unwrap());
    assert_eq!(s1["band"], "low");
    // overriding the recorded shift changes the score
    let s3 = json_out(&run(&["score", "--recipe", "oob-write", "--size", m2.to_str().unwrap(), "--size-shift", "0"]));
    assert!(s3["score"].as_f64().unwrap() != s2["score"].as_f64().unwrap());
}

#[test]
fn score_weights_and_cutoffs() {
    let dir = TempDir::new().unwrap();
    let b = write(&dir, "b.json", &domain64(1, 40));
    let w = dir.path().join("w.json");
    std::fs::write(&w, r#"{"name":"flat-then-log","segments":[{"start":"0","weight":"constant","scale":1},{"start":"4096","weight":"log","scale":1}]}"#).unwrap();
    let o = run(&["score", "--recipe", "oob-read", "--weight-file", w.to_str().unwrap(), "--size", &b]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = json_out(&run(&["score", "--recipe", "oob-write", "--size", &b, "--cutoffs", "0.5,5"]));
    assert_eq!(s["band"], "high");
    let s = json_out(&run(&["score", "--recipe", "oob-write", "--size", &b, "--weight", "distance:16,256:log"]));
    assert!(s["score"].as_f64().unwrap() > 0.0);
    assert_eq!(code(&run(&["score", "--recipe", "oob-write", "--size", &b, "--weight", "bogus"])), 1);
}

#[test]
fn score_shape_mismatches_fail() {
    let dir = TempDir::new().unwrap();
    let b = write(&dir, "b.json", &domain64(1, 40));
    assert_eq!(code(&run(&["score", "--recipe", "oob-write"])), 1);
    assert_eq!(code(&run(&["score", "--recipe", "cfh", "--size", &b])), 1);
    assert_eq!(code(&run(&["score", "--recipe", "data", "--byte", &b])), 1);
    assert_eq!(code(&run(&["score", "--recipe", "nope", "--size", &b])), 1);
    let narrow = write(&dir, "n.json", &json!({
        "width": 8, "intervals": [{"lo": "0", "hi": "3", "guarantee": "strong"}],
        "fixed_bits": null, "exact": true, "splits_used": 0, "budget_exhausted": false
    }));
    assert_eq!(code(&run(&["score", "--recipe", "oob-write", "--size", &b, "--offset", &narrow])), 1);
    let s = json_out(&run(&["score", "--recipe", "data", "--byte", &narrow, "--byte", &narrow]));
    assert!((s["score"].as_f64().unwrap() - 0.25).abs() < 1e-12);
}

#[test]
fn compare_mul_inclusion_chain() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("c.json");
    let o = run(&["compare", "--fixture", "mul-8bit", "--algos", "sns,snsfb,newsome,brute", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let c: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let row = |name: &str| c["rows"].as_array().unwrap().iter().find(|r| r["algorithm"] == name).unwrap().clone();
    assert_eq!(row("snsfb")["exact"], true);
    assert_eq!(row("snsfb")["vs_oracle"], "equal");
    assert_eq!(row("sns")["exact"], false);
    for name in ["sns", "snsfb", "newsome", "brute"] {
        assert_eq!(row(name)["sound"], true, "{name}");
    }
    assert_eq!(c["oracle_count"], "128");
    assert!(String::from_utf8(o.stdout).unwrap().contains("snsfb"));
}

#[test]
fn compare_unconstrained_all_identical() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("c.json");
    run(&["compare", "--fixture", "copy-8bit", "--out", out.to_str().unwrap()]);
    let c: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    for r in c["rows"].as_array().unwrap() {
        assert_eq!(r["vs_oracle"], "equal", "{}", r["algorithm"]);
        assert_eq!(r["count"], "256");
        assert_eq!(r["intervals"], 1);
    }
}

#[test]
fn compare_seeded_newsome_repeats() {
    let dir = TempDir::new().unwrap();
    let rows = |name: &str| {
        let out = dir.path().join(name);
        run(&["compare", "--fixture", "holes-8bit", "--algos", "newsome", "--seed", "17", "--out", out.to_str().unwrap()]);
        let c: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        c["rows"].clone()
    };
    assert_eq!(rows("a.json"), rows("b.json"));
}

#[test]
fn fixtures_listing() {
    let o = run(&["fixtures"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    for name in ["motex1-8bit", "motex2-8bit", "listing3-8bit", "mul-8bit", "holes-8bit"] {
        assert!(text.contains(name));
    }
}

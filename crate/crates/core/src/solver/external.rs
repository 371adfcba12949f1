//! External SMT-LIB2 solver, one fresh process per query.

use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, trace};

use super::query::{self, Script};
use super::{
    eval_model, Backend, Direction, FixedBitsOutcome, Model, OptOutcome, ScOutcome, SolverError, TargetQuery,
    UnknownReason, Verdict,
};
use crate::bits::FixedBits;
use crate::formula::sexp::{read_document, Atom, Sexp};
use crate::formula::{width_mask, Expr, SymbolicState};

pub struct ExternalBackend {
    command: Vec<String>,
    timeout: Duration,
}

/// What the process printed, reduced to the check-sat answer and the values.
#[derive(Debug)]
enum Answer {
    Sat(Model),
    Unsat,
    Unknown(UnknownReason),
}

impl ExternalBackend {
    pub fn new(command: Vec<String>, timeout: Duration) -> Result<Self, SolverError> {
        if command.is_empty() {
            return Err(SolverError::Config("empty solver command".into()));
        }
        Ok(ExternalBackend { command, timeout })
    }

    fn command_line(&self) -> String {
        self.command.join(" ")
    }

    fn run(&self, script: &Script) -> Result<Answer, SolverError> {
        trace!("solver query:\n{}", script.text);
        let mut child = Command::new(&self.command[0])
            .args(&self.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| SolverError::Launch { command: self.command_line(), reason: e.to_string() })?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let text = script.text.clone();
        let writer = thread::spawn(move || {
            let _ = stdin.write_all(text.as_bytes());
            let _ = stdin.write_all(b"(exit)\n");
        });
        let mut stdout = child.stdout.take().expect("piped stdout");
        let reader = thread::spawn(move || {
            let mut s = String::new();
            let _ = stdout.read_to_string(&mut s);
            s
        });
        let mut stderr = child.stderr.take().expect("piped stderr");
        let err_reader = thread::spawn(move || {
            let mut s = String::new();
            let _ = stderr.read_to_string(&mut s);
            s
        });
        let started = Instant::now();
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break Some(status),
                Ok(None) if started.elapsed() >= self.timeout => {
                    let _ = child.kill();
                    let _ = child.wait();
                    break None;
                }
                Ok(None) => thread::sleep(Duration::from_millis(2)),
                Err(e) => {
                    return Ok(Answer::Unknown(UnknownReason::ProcessFailure(e.to_string())));
                }
            }
        };
        let _ = writer.join();
        let out = reader.join().unwrap_or_default();
        let err = err_reader.join().unwrap_or_default();
        if status.is_none() {
            debug!("solver timed out after {:?}", self.timeout);
            return Ok(Answer::Unknown(UnknownReason::Timeout));
        }
        trace!("solver answer:\n{out}");
        Ok(parse_answer(&out, &err, &script.get))
    }

    fn verdict(&self, script: &Script) -> Result<Verdict, SolverError> {
        Ok(match self.run(script)? {
            Answer::Sat(m) => Verdict::Sat(m),
            Answer::Unsat => Verdict::Unsat,
            Answer::Unknown(r) => Verdict::Unknown(r),
        })
    }
}

fn literal_value(s: &Sexp) -> Option<u64> {
    match s {
        Sexp::Atom(Atom::Hex(h), _) => u64::from_str_radix(h, 16).ok(),
        Sexp::Atom(Atom::Binary(b), _) => u64::from_str_radix(b, 2).ok(),
        Sexp::Atom(Atom::Numeral(n), _) => n.parse().ok(),
        Sexp::List(items, _) => match items.as_slice() {
            [u, Sexp::Atom(Atom::Symbol(bv), _), _] if u.symbol() == Some("_") => bv.strip_prefix("bv")?.parse().ok(),
            _ => None,
        },
        Sexp::Atom(Atom::Symbol(s), _) => match s.as_str() {
            "true" => Some(1),
            "false" => Some(0),
            _ => None,
        },
        _ => None,
    }
}

fn parse_answer(out: &str, err: &str, get: &[String]) -> Answer {
    let failure = |msg: String| Answer::Unknown(UnknownReason::ProcessFailure(msg));
    let doc = match read_document(out) {
        Ok(d) => d,
        Err(e) => return failure(format!("unreadable solver output ({e}): {}", out.trim())),
    };
    let mut items = doc.items.iter();
    let status = loop {
        match items.next() {
            Some(Sexp::Atom(Atom::Symbol(s), _)) if matches!(s.as_str(), "sat" | "unsat" | "unknown") => break s.as_str(),
            Some(Sexp::List(l, _)) if l.first().and_then(|h| h.symbol()) == Some("error") => {
                return failure(format!("solver error: {}", l.get(1).map(|m| m.to_string()).unwrap_or_default()));
            }
            Some(_) => continue,
            None => {
                let detail = if err.trim().is_empty() { out.trim() } else { err.trim() };
                return failure(format!("no check-sat answer: {detail}"));
            }
        }
    };
    match status {
        "unsat" => Answer::Unsat,
        "unknown" => Answer::Unknown(UnknownReason::Unsupported("solver answered unknown".into())),
        _ => {
            let mut model = Model::new();
            if !get.is_empty() {
                let Some(Sexp::List(pairs, _)) = items.next() else {
                    return failure("sat without a value list".into());
                };
                for p in pairs {
                    match p.list() {
                        Some([name, value]) => {
                            let (Some(n), Some(v)) = (name.symbol(), literal_value(value)) else {
                                return failure(format!("unreadable value `{p}`"));
                            };
                            model.insert(n.to_string(), v);
                        }
                        _ => return failure(format!("unreadable value `{p}`")),
                    }
                }
                if let Some(missing) = get.iter().find(|g| !model.contains_key(*g)) {
                    return failure(format!("no value for `{missing}`"));
                }
            }
            Answer::Sat(model)
        }
    }
}

impl Backend for ExternalBackend {
    fn name(&self) -> &str {
        "external"
    }

    fn check_sat(&mut self, state: &SymbolicState) -> Result<Verdict, SolverError> {
        self.verdict(&query::sat(state, &[]))
    }

    fn check_range(&mut self, q: &TargetQuery) -> Result<Verdict, SolverError> {
        self.verdict(&query::range(q))
    }

    fn optimize(&mut self, q: &TargetQuery, dir: Direction) -> Result<OptOutcome, SolverError> {
        Ok(match self.run(&query::optimize(q, dir))? {
            Answer::Sat(model) => match eval_model(&model, q.target) {
                Ok(value) => OptOutcome::Optimum { value, model },
                Err(e) => OptOutcome::Unknown {
                    reason: UnknownReason::ProcessFailure(format!("incomplete model: {e}")),
                    best: None,
                },
            },
            Answer::Unsat => OptOutcome::Unknown { reason: UnknownReason::Unsat, best: None },
            Answer::Unknown(reason) => OptOutcome::Unknown { reason, best: None },
        })
    }

    fn find_distinct(&mut self, state: &SymbolicState, target: &Expr) -> Result<Verdict, SolverError> {
        self.verdict(&query::distinct(state, target))
    }

    fn sc_counterexample(&mut self, q: &TargetQuery) -> Result<ScOutcome, SolverError> {
        let script = query::sc_counterexample(q);
        Ok(match self.run(&script)? {
            Answer::Sat(m) => {
                let y = m[&script.get[0]];
                if y < q.lo || y > q.hi {
                    ScOutcome::Unknown(UnknownReason::ProcessFailure(format!("counterexample {y} outside the query")))
                } else {
                    ScOutcome::Counterexample(y)
                }
            }
            Answer::Unsat => ScOutcome::StronglyControlled,
            Answer::Unknown(r) => ScOutcome::Unknown(r),
        })
    }

    fn fixed_bits(&mut self, state: &SymbolicState, target: &Expr) -> Result<FixedBitsOutcome, SolverError> {
        let script = query::fixed_bits(state, target);
        Ok(match self.run(&script)? {
            Answer::Sat(m) => {
                let mask = m[&script.get[0]] & width_mask(target.width());
                let bits = m[&script.get[1]];
                match FixedBits::new(mask, bits) {
                    Some(fb) => FixedBitsOutcome::Found(fb),
                    None => FixedBitsOutcome::Unknown(UnknownReason::ProcessFailure(format!(
                        "bits {bits:#x} outside mask {mask:#x}"
                    ))),
                }
            }
            Answer::Unsat => FixedBitsOutcome::NoPair,
            Answer::Unknown(r) => FixedBitsOutcome::Unknown(r),
        })
    }
}

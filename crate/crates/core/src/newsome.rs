//! Sampling baseline: shrink an interval, estimate the density of feasible
//! values in it from random probes, and split at a random feasible probe
//! until the estimate is tight or the interval small.

use log::debug;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::control::{shrink, ControlDomain, ControlInterval, Shrunk};
use crate::formula::{SymbolicState, TargetSpec};
use crate::solver::{Solver, SolverError, Verdict};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityInterval {
    #[serde(with = "crate::serde_num::u64_str")]
    pub lo: u64,
    #[serde(with = "crate::serde_num::u64_str")]
    pub hi: u64,
    pub sample_count: u32,
    pub hits: u32,
    pub density_estimate: f64,
    pub confidence_interval: (f64, f64),
    /// Probes whose query came back unknown, counted as misses.
    #[serde(default)]
    pub unknowns: u32,
}

impl DensityInterval {
    pub fn len(&self) -> u128 {
        (self.hi - self.lo) as u128 + 1
    }

    /// Expected number of feasible values, `density · |I|`.
    pub fn estimated_count(&self) -> f64 {
        self.density_estimate * self.len() as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewsomeConfig {
    pub samples_per_interval: u32,
    pub confidence: f64,
    pub max_intervals: usize,
    #[serde(with = "crate::serde_num::u64_str")]
    pub rng_seed: u64,
    /// Stop refining once the confidence interval is narrower than this.
    pub target_width: f64,
}

impl Default for NewsomeConfig {
    fn default() -> Self {
        NewsomeConfig { samples_per_interval: 30, confidence: 0.95, max_intervals: 100, rng_seed: 0, target_width: 0.1 }
    }
}

impl NewsomeConfig {
    pub fn with_seed(rng_seed: u64) -> Self {
        NewsomeConfig { rng_seed, ..NewsomeConfig::default() }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(SolverError::Config(format!("confidence {} not in (0, 1)", self.confidence)));
        }
        if self.samples_per_interval == 0 || self.max_intervals == 0 {
            return Err(SolverError::Config("samples and interval budget must be positive".into()));
        }
        Ok(())
    }
}

/// Wilson score interval for `hits` successes out of `n` at the given level.
pub fn wilson_interval(hits: u32, n: u32, confidence: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(0.5 + confidence / 2.0);
    let (n, p) = (n as f64, hits as f64 / n as f64);
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // clamp rounding so that lo <= p <= hi holds exactly
    ((center - half).clamp(0.0, p), (center + half).clamp(p, 1.0))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Sampling estimate of the target's feasible values. Returns intervals in
/// increasing order; an unsat state gives none.
pub fn newsome_domain(
    solver: &mut Solver,
    state: &SymbolicState,
    target: &TargetSpec,
    config: &NewsomeConfig,
) -> Result<Vec<DensityInterval>, SolverError> {
    config.validate()?;
    let base = match target.assumption_predicate() {
        Some(p) => state.conjoin(&p)?,
        None => state.clone(),
    };
    let v = &target.expr;
    let mut out: Vec<DensityInterval> = Vec::new();
    let mut stack: Vec<(u64, u64, u64)> = target
        .assumption_intervals()
        .into_iter()
        .enumerate()
        .map(|(k, (lo, hi))| (lo, hi, splitmix64(config.rng_seed ^ k as u64)))
        .rev()
        .collect();
    while let Some((lo, hi, seed)) = stack.pop() {
        let (a, b) = match shrink(solver, &base, v, lo, hi)? {
            Shrunk::Empty => continue,
            Shrunk::Interval(a, b) => (a, b),
            Shrunk::Unknown { lo, hi, reason } => {
                debug!("bounds of [{lo}, {hi}] unknown ({reason})");
                (lo, hi)
            }
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = config.samples_per_interval;
        let (mut hits, mut unknowns) = (0u32, 0u32);
        let mut feasible = Vec::new();
        for _ in 0..n {
            let y = rng.gen_range(a..=b);
            match solver.check_value(&base, v, y)? {
                Verdict::Sat(_) => {
                    hits += 1;
                    feasible.push(y);
                }
                Verdict::Unsat => {}
                Verdict::Unknown(_) => unknowns += 1,
            }
        }
        let p = hits as f64 / n as f64;
        let ci = wilson_interval(hits, n, config.confidence);
        let len = (b - a) as u128 + 1;
        let settled = hits == n || ci.1 - ci.0 < config.target_width || len <= n as u128;
        // a split turns one pending interval into two
        let room = out.len() + stack.len() + 2 <= config.max_intervals;
        if settled || !room {
            out.push(DensityInterval {
                lo: a,
                hi: b,
                sample_count: n,
                hits,
                density_estimate: p,
                confidence_interval: ci,
                unknowns,
            });
            continue;
        }
        let y = if feasible.is_empty() { a + (b - a) / 2 } else { feasible[rng.gen_range(0..feasible.len())] };
        let (left, right) = if y == b { ((a, y - 1), (b, b)) } else { ((a, y), (y + 1, b)) };
        stack.push((right.0, right.1, splitmix64(seed.wrapping_add(2))));
        stack.push((left.0, left.1, splitmix64(seed.wrapping_add(1))));
    }
    out.sort_by_key(|d| d.lo);
    Ok(out)
}

/// The baseline's intervals as a weak domain: sampling proves nothing.
pub fn density_domain(width: u32, intervals: &[DensityInterval]) -> ControlDomain {
    ControlDomain {
        intervals: intervals.iter().map(|d| ControlInterval::weak(d.lo, d.hi)).collect(),
        ..ControlDomain::empty(width)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_smt2;
    use crate::solver::SolverConfig;

    fn run(src: &str, seed: u64) -> Vec<DensityInterval> {
        let p = parse_smt2(src).unwrap();
        let mut s = SolverConfig::internal().open().unwrap();
        newsome_domain(&mut s, &p.state, &p.target, &NewsomeConfig::with_seed(seed)).unwrap()
    }

    #[test]
    fn wilson_reference_values() {
        let (lo, hi) = wilson_interval(15, 30, 0.95);
        assert!((lo - 0.3315).abs() < 1e-3 && (hi - 0.6685).abs() < 1e-3, "{lo} {hi}");
        let (lo, hi) = wilson_interval(30, 30, 0.95);
        assert!((lo - 0.8865).abs() < 1e-3 && hi == 1.0);
        assert_eq!(wilson_interval(0, 30, 0.95).0, 0.0);
    }

    #[test]
    fn unconstrained_is_one_dense_interval() {
        let d = run("(declare-const x (_ BitVec 8)) ; ctrl-target: x width=8", 7);
        assert_eq!(d.len(), 1);
        assert_eq!((d[0].lo, d[0].hi, d[0].density_estimate, d[0].confidence_interval.1), (0, 255, 1.0, 1.0));
    }

    #[test]
    fn range_shrinks_to_bounds() {
        let d = run("(declare-const x (_ BitVec 8)) (assert (bvule #x11 x)) (assert (bvule x #x29)) ; ctrl-target: x width=8", 1);
        assert_eq!(d.len(), 1);
        assert_eq!((d[0].lo, d[0].hi, d[0].density_estimate), (17, 41, 1.0));
    }

    #[test]
    fn seeded_runs_repeat() {
        let src = "(declare-const x (_ BitVec 8)) (assert (= ((_ extract 0 0) x) #b0)) ; ctrl-target: x width=8";
        assert_eq!(run(src, 42), run(src, 42));
        let d = run(src, 42);
        assert!(d.len() > 1 && d.len() <= 100);
        assert!(d.windows(2).all(|w| w[0].hi < w[1].lo));
        assert_eq!(d[0].lo, 0);
        assert_eq!(d.last().unwrap().hi, 254);
    }

    #[test]
    fn unsat_state_is_empty() {
        assert!(run("(declare-const x (_ BitVec 8)) (assert (= x (bvadd x #x01))) ; ctrl-target: x width=8", 0).is_empty());
    }
}

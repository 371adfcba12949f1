//! Weight functions over target values and their sums and integrals.
//!
//! Sums run over integers; integrals use the antiderivative on `[i, j + 1)`
//! as a continuous stand-in for the sum over `[i, j]`. Both exclude values
//! below the weight's support.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::MetricsError;

const LN2: f64 = std::f64::consts::LN_2;

/// First address whose two high bytes are not both zero.
pub const CFH_VALID_LIMIT: u64 = 1 << 48;

/// Terms summed one by one before switching to an asymptotic tail.
const DIRECT_TERMS: u128 = 1 << 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseWeight {
    /// `1 / (ln 2 · x)`, antiderivative `log2 x`.
    Log,
    /// `1 / x²`, antiderivative `-1/x`.
    InverseSquare,
    /// `1 / √x`, antiderivative `2√x`.
    InverseSqrt,
    /// `1`, so that weighted control is a ratio of counts.
    Constant,
    /// `1` below 2^48, `0` from there on.
    CfhValid,
}

impl BaseWeight {
    pub const ALL: [BaseWeight; 5] =
        [BaseWeight::Log, BaseWeight::InverseSquare, BaseWeight::InverseSqrt, BaseWeight::Constant, BaseWeight::CfhValid];

    pub fn name(self) -> &'static str {
        match self {
            BaseWeight::Log => "log",
            BaseWeight::InverseSquare => "inverse-square",
            BaseWeight::InverseSqrt => "inverse-sqrt",
            BaseWeight::Constant => "constant",
            BaseWeight::CfhValid => "cfh-valid",
        }
    }

    pub fn support_lo(self) -> u64 {
        match self {
            BaseWeight::Log | BaseWeight::InverseSquare | BaseWeight::InverseSqrt => 1,
            BaseWeight::Constant | BaseWeight::CfhValid => 0,
        }
    }

    pub fn omega(self, x: f64) -> f64 {
        match self {
            BaseWeight::Log => 1.0 / (LN2 * x),
            BaseWeight::InverseSquare => 1.0 / (x * x),
            BaseWeight::InverseSqrt => 1.0 / x.sqrt(),
            BaseWeight::Constant => 1.0,
            BaseWeight::CfhValid => {
                if x < CFH_VALID_LIMIT as f64 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn antiderivative(self, x: f64) -> f64 {
        match self {
            BaseWeight::Log => x.log2(),
            BaseWeight::InverseSquare => -1.0 / x,
            BaseWeight::InverseSqrt => 2.0 * x.sqrt(),
            BaseWeight::Constant => x,
            BaseWeight::CfhValid => x.min(CFH_VALID_LIMIT as f64),
        }
    }

    /// First and third derivatives, for the summation tail.
    fn derivatives(self, x: f64) -> (f64, f64) {
        match self {
            BaseWeight::Log => (-1.0 / (LN2 * x * x), -6.0 / (LN2 * x.powi(4))),
            BaseWeight::InverseSquare => (-2.0 / x.powi(3), -24.0 / x.powi(5)),
            BaseWeight::InverseSqrt => (-0.5 * x.powf(-1.5), -15.0 / 8.0 * x.powf(-3.5)),
            BaseWeight::Constant | BaseWeight::CfhValid => (0.0, 0.0),
        }
    }

    /// `Ω(b) - Ω(a)` for integers `support_lo <= a <= b`, in forms that do
    /// not cancel when `a` and `b` are both close to 2^64.
    fn span(self, a: u128, b: u128) -> f64 {
        if b <= a {
            return 0.0;
        }
        let d = (b - a) as f64;
        let (af, bf) = (a as f64, b as f64);
        match self {
            BaseWeight::Log => (d / af).ln_1p() / LN2,
            BaseWeight::InverseSquare => d / af / bf,
            BaseWeight::InverseSqrt => 2.0 * d / (af.sqrt() + bf.sqrt()),
            BaseWeight::Constant => d,
            BaseWeight::CfhValid => {
                let lim = CFH_VALID_LIMIT as u128;
                (b.min(lim).saturating_sub(a.min(lim))) as f64
            }
        }
    }

    /// Integral stand-in for the sum over `[i, j]`.
    fn integral(self, i: u64, j: u64) -> f64 {
        let i = i.max(self.support_lo());
        if j < i {
            return 0.0;
        }
        self.span(i as u128, j as u128 + 1)
    }

    /// `Σ ω(n)` for `n` in `[i, j]`.
    fn sum(self, i: u64, j: u64) -> f64 {
        let i = i.max(self.support_lo());
        if j < i {
            return 0.0;
        }
        match self {
            BaseWeight::Constant | BaseWeight::CfhValid => return self.span(i as u128, j as u128 + 1),
            _ => {}
        }
        let (a, b) = (i as u128, j as u128);
        let direct_end = b.min(a + DIRECT_TERMS - 1);
        // smallest terms first
        let mut acc = Neumaier::default();
        for n in (a..=direct_end).rev() {
            acc.add(self.omega(n as f64));
        }
        if direct_end < b {
            // Euler–Maclaurin over [m, b]; with m >= 2^12 the next
            // correction is far below f64 resolution
            let m = direct_end + 1;
            let (mf, bf) = (m as f64, b as f64);
            let (d1m, d3m) = self.derivatives(mf);
            let (d1b, d3b) = self.derivatives(bf);
            acc.add(self.span(m, b));
            acc.add((self.omega(mf) + self.omega(bf)) / 2.0);
            acc.add((d1b - d1m) / 12.0);
            acc.add(-(d3b - d3m) / 720.0);
        }
        acc.total()
    }
}

#[derive(Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// One segment of a piecewise weight: `scale · base(x)` from `start` up to
/// the next segment's start.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    #[serde(with = "crate::serde_num::u64_str")]
    pub start: u64,
    pub weight: BaseWeight,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

/// Declarative piecewise weight, as loaded from a JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseSpec {
    pub name: String,
    pub segments: Vec<Segment>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Weight {
    Base(BaseWeight),
    /// `base(d(x))` with `d(x)` the distance from `x` to the nearest bound.
    Distance { bounds: Vec<u64>, base: BaseWeight },
    Piecewise(PiecewiseSpec),
}

impl From<BaseWeight> for Weight {
    fn from(b: BaseWeight) -> Self {
        Weight::Base(b)
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::Base(b) => write!(f, "{}", b.name()),
            Weight::Distance { bounds, base } => {
                let bs: Vec<String> = bounds.iter().map(|b| b.to_string()).collect();
                write!(f, "distance:{}:{}", bs.join(","), base.name())
            }
            Weight::Piecewise(p) => write!(f, "piecewise:{}", p.name),
        }
    }
}

impl FromStr for BaseWeight {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BaseWeight::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| MetricsError::BadWeight(format!("unknown weight `{s}`")))
    }
}

impl FromStr for Weight {
    type Err = MetricsError;

    /// `log`, `inverse-square`, ..., or `distance:<b1>,<b2>,...:<base>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(rest) = s.strip_prefix("distance:") {
            let (bounds, base) = rest
                .rsplit_once(':')
                .ok_or_else(|| MetricsError::BadWeight(format!("`{s}`: expected distance:<bounds>:<base>")))?;
            let bounds = bounds
                .split(',')
                .map(|b| b.trim().parse::<u64>().map_err(|_| MetricsError::BadWeight(format!("bad bound `{b}`"))))
                .collect::<Result<Vec<_>, _>>()?;
            return Weight::distance(bounds, base.parse()?);
        }
        Ok(Weight::Base(s.parse()?))
    }
}

impl Weight {
    pub fn distance(mut bounds: Vec<u64>, base: BaseWeight) -> Result<Weight, MetricsError> {
        if bounds.is_empty() {
            return Err(MetricsError::BadWeight("distance weight needs at least one bound".into()));
        }
        bounds.sort_unstable();
        bounds.dedup();
        Ok(Weight::Distance { bounds, base })
    }

    pub fn piecewise(spec: PiecewiseSpec) -> Result<Weight, MetricsError> {
        if spec.segments.is_empty() {
            return Err(MetricsError::BadWeight(format!("piecewise weight `{}` has no segments", spec.name)));
        }
        if spec.segments.windows(2).any(|w| w[0].start >= w[1].start) {
            return Err(MetricsError::BadWeight("segment starts must increase strictly".into()));
        }
        if spec.segments.iter().any(|s| !s.scale.is_finite() || s.scale < 0.0) {
            return Err(MetricsError::BadWeight("segment scales must be finite and non-negative".into()));
        }
        Ok(Weight::Piecewise(spec))
    }

    pub fn from_json(text: &str) -> Result<Weight, MetricsError> {
        let spec: PiecewiseSpec =
            serde_json::from_str(text).map_err(|e| MetricsError::BadWeight(format!("weight file: {e}")))?;
        Weight::piecewise(spec)
    }

    pub fn name(&self) -> String {
        self.to_string()
    }

    /// Smallest admissible argument; smaller values weigh nothing.
    pub fn support_lo(&self) -> u64 {
        match self {
            Weight::Base(b) => b.support_lo(),
            Weight::Distance { .. } | Weight::Piecewise(_) => 0,
        }
    }

    /// The antiderivative, for weights that have a closed form.
    pub fn antiderivative(&self, x: f64) -> Option<f64> {
        match self {
            Weight::Base(b) => Some(b.antiderivative(x)),
            _ => None,
        }
    }

    pub fn omega(&self, x: u64) -> f64 {
        match self {
            Weight::Base(b) => {
                if x < b.support_lo() {
                    0.0
                } else {
                    b.omega(x as f64)
                }
            }
            Weight::Distance { bounds, base } => {
                let d = bounds.iter().map(|b| x.abs_diff(*b)).min().expect("nonempty bounds");
                Weight::Base(*base).omega(d)
            }
            Weight::Piecewise(p) => {
                let k = p.segments.partition_point(|s| s.start <= x);
                match k.checked_sub(1) {
                    None => 0.0,
                    Some(k) => p.segments[k].scale * Weight::Base(p.segments[k].weight).omega(x),
                }
            }
        }
    }

    /// Integral stand-in for `Σ ω(n)` over `[i, j]`.
    pub fn integral(&self, i: u64, j: u64) -> f64 {
        self.decompose(i, j, &|b, lo, hi| b.integral(lo, hi))
    }

    /// Exact `Σ ω(n)` over `[i, j]` (to floating-point accuracy).
    pub fn sum(&self, i: u64, j: u64) -> f64 {
        self.decompose(i, j, &|b, lo, hi| b.sum(lo, hi))
    }

    /// Splits `[i, j]` into pieces on which the weight is a scaled base
    /// weight of a monotone reparametrization, and adds up `f` over them.
    fn decompose(&self, i: u64, j: u64, f: &dyn Fn(BaseWeight, u64, u64) -> f64) -> f64 {
        if j < i {
            return 0.0;
        }
        match self {
            Weight::Base(b) => f(*b, i, j),
            Weight::Distance { bounds, base } => {
                let mut total = 0.0;
                for (k, &b) in bounds.iter().enumerate() {
                    // values whose nearest bound is b (ties go to the lower bound)
                    let region_lo = if k == 0 { 0 } else { bounds[k - 1] + (b - bounds[k - 1]) / 2 + 1 };
                    let region_hi = match bounds.get(k + 1) {
                        Some(&next) => b + (next - b) / 2,
                        None => u64::MAX,
                    };
                    let (lo, hi) = (i.max(region_lo), j.min(region_hi));
                    if lo > hi {
                        continue;
                    }
                    // below the bound the distance decreases towards it
                    if lo < b {
                        let left_hi = hi.min(b - 1);
                        total += f(*base, b - left_hi, b - lo);
                    }
                    if hi >= b {
                        let right_lo = lo.max(b);
                        total += f(*base, right_lo - b, hi - b);
                    }
                }
                total
            }
            Weight::Piecewise(p) => {
                let mut total = 0.0;
                for (k, seg) in p.segments.iter().enumerate() {
                    let seg_hi = p.segments.get(k + 1).map_or(u64::MAX, |n| n.start - 1);
                    let (lo, hi) = (i.max(seg.start), j.min(seg_hi));
                    if lo <= hi && seg.scale > 0.0 {
                        total += seg.scale * f(seg.weight, lo, hi);
                    }
                }
                total
            }
        }
    }
}

/// The built-in weight library.
pub fn builtin_weights() -> Vec<Weight> {
    BaseWeight::ALL.into_iter().map(Weight::Base).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(w: &Weight, i: u64, j: u64) -> f64 {
        (i..=j).map(|x| w.omega(x)).sum()
    }

    #[test]
    fn log_weight_integral_is_log2() {
        let w = Weight::Base(BaseWeight::Log);
        assert!((w.integral(1, 41) - 42f64.log2()).abs() < 1e-12);
        assert!((w.integral(0, u64::MAX) - 64.0).abs() < 1e-9);
        assert_eq!(w.integral(0, 0), 0.0);
    }

    #[test]
    fn inverse_square_first_terms() {
        let w = Weight::Base(BaseWeight::InverseSquare);
        assert!((w.sum(1, 2) - 1.25).abs() < 1e-15);
        assert!((w.integral(1, 2) - (1.0 - 1.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn sums_match_brute_force() {
        for w in builtin_weights() {
            for (i, j) in [(0u64, 10u64), (1, 5000), (3, 20000), (4090, 4200)] {
                let b = brute(&w, i, j);
                let s = w.sum(i, j);
                assert!((s - b).abs() <= 1e-12 * b.abs().max(1.0), "{w} [{i},{j}]: {s} vs {b}");
            }
        }
    }

    #[test]
    fn harmonic_tail_at_full_width() {
        // H_n = ln n + γ + 1/(2n) - ...
        let gamma = 0.577_215_664_901_532_9;
        let n = u64::MAX as f64;
        let expected = (n.ln() + gamma) / LN2;
        let got = Weight::Base(BaseWeight::Log).sum(1, u64::MAX);
        assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
    }

    #[test]
    fn near_top_of_range_does_not_cancel() {
        let w = Weight::Base(BaseWeight::Log);
        let lo = u64::MAX - 295;
        let v = w.integral(lo, lo + 39);
        let expected = 40.0 / (LN2 * lo as f64);
        assert!((v / expected - 1.0).abs() < 1e-6, "{v} vs {expected}");
    }

    #[test]
    fn distance_wrapper() {
        let w: Weight = "distance:100:log".parse().unwrap();
        assert_eq!(w.omega(97), BaseWeight::Log.omega(3.0));
        assert_eq!(w.omega(100), 0.0);
        assert!((w.sum(90, 130) - brute(&w, 90, 130)).abs() < 1e-12);
        let two: Weight = "distance:10,30:constant".parse().unwrap();
        assert_eq!(two.omega(21), 9.0_f64.min(1.0));
        assert!((two.sum(0, 60) - 61.0).abs() < 1e-12);
        assert!((two.integral(0, 60) - 61.0).abs() < 1e-12);
    }

    #[test]
    fn piecewise_from_json() {
        let w = Weight::from_json(
            r#"{"name":"valid-low","segments":[{"start":"0","weight":"constant"},{"start":"16","weight":"constant","scale":0}]}"#,
        )
        .unwrap();
        assert_eq!(w.sum(0, 255), 16.0);
        assert_eq!(w.omega(15), 1.0);
        assert_eq!(w.omega(16), 0.0);
        assert!(Weight::from_json(r#"{"name":"x","segments":[]}"#).is_err());
    }
}

//! Quantitative control: plain (QC) and weighted (wQC) ratios of a domain
//! of control against the full value domain.

mod recipes;
mod weight;

pub use crate::bits::count_fixed_bits;
pub use recipes::{band, score_cfh, score_data, score_oob, Band, BandCutoffs, Recipe, ScoredParam};
pub use weight::{builtin_weights, BaseWeight, PiecewiseSpec, Segment, Weight, CFH_VALID_LIMIT};

use thiserror::Error;

use crate::control::ControlDomain;
use crate::formula::Affine;

/// Most runs an exact sum will walk when fixed bits fragment the domain.
pub const MAX_EXACT_RUNS: usize = 1 << 20;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("bad weight: {0}")]
    BadWeight(String),
    #[error("weight `{0}` has no mass on the domain")]
    ZeroMass(String),
    #[error("width mismatch: expected {expected}, found {found}")]
    WidthMismatch { expected: u32, found: u32 },
    #[error("density: {0}")]
    Density(String),
    #[error("domain too fragmented for an exact sum (more than {0} runs)")]
    TooFragmented(usize),
    #[error("{0}")]
    Input(String),
}

/// `ln |D| / ln 2^w`; zero for empty and singleton domains.
pub fn qc(domain: &ControlDomain) -> f64 {
    qc_bits(domain) / domain.width as f64
}

/// `log2 |D|`, the number of controlled bits.
pub fn qc_bits(domain: &ControlDomain) -> f64 {
    let n = domain.count();
    if n <= 1 {
        return 0.0;
    }
    (n as f64).log2()
}

/// Intervals of the domain in scoring coordinates, each with the preimage
/// bounds it came from.
fn mapped(lo: u64, hi: u64, width: u32, transform: Option<&Affine>) -> Option<((u64, u64), (u64, u64))> {
    match transform {
        None => Some(((lo, hi), (lo, hi))),
        Some(t) => t.map_interval(lo, hi, width),
    }
}

fn ratio(num: f64, den: f64, weight: &Weight) -> Result<f64, MetricsError> {
    if !(den > 0.0) {
        return Err(MetricsError::ZeroMass(weight.name()));
    }
    Ok((num / den).clamp(0.0, 1.0))
}

/// `Σ_{n ∈ D} ω(n) / Σ_{n ∈ Dom} ω(n)` over the represented set, after the
/// affine transform.
pub fn wqc_exact(domain: &ControlDomain, weight: &Weight, transform: Option<&Affine>) -> Result<f64, MetricsError> {
    let runs = domain.runs(MAX_EXACT_RUNS).ok_or(MetricsError::TooFragmented(MAX_EXACT_RUNS))?;
    let num: f64 = runs
        .iter()
        .filter_map(|r| mapped(r.lo, r.hi, domain.width, transform))
        .map(|((lo, hi), _)| weight.sum(lo, hi))
        .sum();
    ratio(num, weight.sum(0, domain.domain_max()), weight)
}

/// Interval form: each interval `[i, j]` contributes `Ω(j + 1) - Ω(i)`,
/// normalized by `Ω(2^w) - Ω(support)`. Fixed bits are ignored.
pub fn wqc_interval(domain: &ControlDomain, weight: &Weight, transform: Option<&Affine>) -> Result<f64, MetricsError> {
    let num: f64 = domain
        .intervals
        .iter()
        .filter_map(|iv| mapped(iv.lo, iv.hi, domain.width, transform))
        .map(|((lo, hi), _)| weight.integral(lo, hi))
        .sum();
    ratio(num, weight.integral(0, domain.domain_max()), weight)
}

/// Interval form scaled by each interval's density `ρ(I) / |I|`, where
/// `rho[k]` is the number of values interval `k` actually holds.
pub fn wqc_constrained(
    domain: &ControlDomain,
    weight: &Weight,
    transform: Option<&Affine>,
    rho: &[f64],
) -> Result<f64, MetricsError> {
    if rho.len() != domain.intervals.len() {
        return Err(MetricsError::Density(format!(
            "{} densities for {} intervals",
            rho.len(),
            domain.intervals.len()
        )));
    }
    let mut num = 0.0;
    for (iv, &r) in domain.intervals.iter().zip(rho) {
        let len = iv.len() as f64;
        if !(r >= 0.0) || r > len * (1.0 + 1e-12) {
            return Err(MetricsError::Density(format!("ρ = {r} for [{}, {}] of length {len}", iv.lo, iv.hi)));
        }
        if let Some(((lo, hi), _)) = mapped(iv.lo, iv.hi, domain.width, transform) {
            num += r / len * weight.integral(lo, hi);
        }
    }
    ratio(num, weight.integral(0, domain.domain_max()), weight)
}

/// Per-interval value counts implied by the domain's fixed bits.
pub fn fixed_bits_density(domain: &ControlDomain) -> Vec<f64> {
    domain.intervals.iter().map(|iv| domain.interval_count(iv) as f64).collect()
}

/// The interval form, density-scaled when the domain carries fixed bits.
pub fn wqc(domain: &ControlDomain, weight: &Weight, transform: Option<&Affine>) -> Result<f64, MetricsError> {
    match domain.fixed_bits {
        Some(_) => wqc_constrained(domain, weight, transform, &fixed_bits_density(domain)),
        None => wqc_interval(domain, weight, transform),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::FixedBits;

    fn log() -> Weight {
        Weight::Base(BaseWeight::Log)
    }

    #[test]
    fn qc_of_small_domains() {
        let d = ControlDomain::from_intervals(8, &[(17, 41)]).unwrap();
        assert!((qc_bits(&d) - 25f64.log2()).abs() < 1e-12);
        assert_eq!(qc(&ControlDomain::from_values(8, &[3])), 0.0);
        assert_eq!(qc(&ControlDomain::empty(8)), 0.0);
        assert!((qc(&ControlDomain::full(16)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_domain_is_one() {
        for w in builtin_weights() {
            for width in [8, 16, 64] {
                let d = ControlDomain::full(width);
                assert_eq!(wqc_interval(&d, &w, None).unwrap(), 1.0, "{w} {width}");
                assert_eq!(wqc_exact(&d, &w, None).unwrap(), 1.0, "{w} {width}");
            }
        }
    }

    #[test]
    fn shifted_sizes_near_zero() {
        let d = ControlDomain::from_intervals(64, &[(257, 296)]).unwrap();
        let t = Affine::shift(-256);
        let v = wqc_interval(&d, &log(), Some(&t)).unwrap();
        assert!((v - 41f64.log2() / 64.0).abs() < 1e-12);
    }

    #[test]
    fn transform_drops_values_outside() {
        let d = ControlDomain::from_intervals(8, &[(0, 9)]).unwrap();
        let t = Affine::shift(-5);
        let c = Weight::Base(BaseWeight::Constant);
        assert!((wqc_exact(&d, &c, Some(&t)).unwrap() - 5.0 / 256.0).abs() < 1e-15);
    }

    #[test]
    fn constrained_uses_fixed_bit_counts() {
        let mut d = ControlDomain::from_intervals(8, &[(0, 255)]).unwrap();
        d.fixed_bits = FixedBits::new(1, 0);
        let c = Weight::Base(BaseWeight::Constant);
        assert!((wqc(&d, &c, None).unwrap() - 0.5).abs() < 1e-15);
        assert!((wqc_exact(&d, &c, None).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(wqc_interval(&d, &c, None).unwrap(), 1.0);
        assert!(matches!(wqc_constrained(&d, &c, None, &[300.0]), Err(MetricsError::Density(_))));
        assert!(matches!(wqc_constrained(&d, &c, None, &[]), Err(MetricsError::Density(_))));
    }
}

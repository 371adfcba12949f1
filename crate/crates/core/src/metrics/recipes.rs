//! Vulnerability-class scores and their severity bands.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{qc, wqc, BaseWeight, MetricsError, Weight};
use crate::control::ControlDomain;
use crate::formula::Affine;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Recipe {
    OobWrite,
    OobRead,
    Cfh,
    Data,
}

impl Recipe {
    pub fn name(self) -> &'static str {
        match self {
            Recipe::OobWrite => "oob-write",
            Recipe::OobRead => "oob-read",
            Recipe::Cfh => "cfh",
            Recipe::Data => "data",
        }
    }

    pub fn default_cutoffs(self) -> BandCutoffs {
        match self {
            Recipe::OobWrite | Recipe::OobRead => BandCutoffs::OOB,
            Recipe::Cfh | Recipe::Data => BandCutoffs::RATIO,
        }
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Recipe {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Recipe::OobWrite, Recipe::OobRead, Recipe::Cfh, Recipe::Data]
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| MetricsError::Input(format!("unknown recipe `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Low,
    Medium,
    High,
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Band::Low => "low",
            Band::Medium => "medium",
            Band::High => "high",
        })
    }
}

/// Scores below `medium` are low, below `high` medium, the rest high.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandCutoffs {
    pub medium: f64,
    pub high: f64,
}

impl BandCutoffs {
    pub const OOB: BandCutoffs = BandCutoffs { medium: 1.0, high: 10.0 };
    pub const RATIO: BandCutoffs = BandCutoffs { medium: 0.01, high: 0.1 };
}

pub fn band(score: f64, cutoffs: BandCutoffs) -> Band {
    if score < cutoffs.medium {
        Band::Low
    } else if score < cutoffs.high {
        Band::Medium
    } else {
        Band::High
    }
}

/// One scored parameter: its domain and the shift into offset coordinates.
#[derive(Clone, Copy, Debug)]
pub struct ScoredParam<'a> {
    pub domain: &'a ControlDomain,
    pub transform: Option<Affine>,
}

impl<'a> ScoredParam<'a> {
    pub fn new(domain: &'a ControlDomain) -> Self {
        ScoredParam { domain, transform: None }
    }

    pub fn shifted(domain: &'a ControlDomain, offset: i128) -> Self {
        ScoredParam { domain, transform: Some(Affine::shift(offset)) }
    }
}

/// `(wQC(offset) + wQC(size)) · w`. A parameter that is `None` is fixed by
/// the program and contributes nothing.
pub fn score_oob(
    offset: Option<ScoredParam<'_>>,
    size: Option<ScoredParam<'_>>,
    weight: &Weight,
) -> Result<f64, MetricsError> {
    let width = match (&offset, &size) {
        (None, None) => return Err(MetricsError::Input("neither offset nor size is controlled".into())),
        (Some(o), Some(s)) if o.domain.width != s.domain.width => {
            return Err(MetricsError::WidthMismatch { expected: o.domain.width, found: s.domain.width })
        }
        (Some(p), _) | (None, Some(p)) => p.domain.width,
    };
    let part = |p: Option<ScoredParam<'_>>| match p {
        None => Ok(0.0),
        Some(p) => wqc(p.domain, weight, p.transform.as_ref()),
    };
    Ok((part(offset)? + part(size)?) * width as f64)
}

/// Weighted control of a code-pointer target under the `cfh-valid` weight,
/// normalized by the valid mass so that controlling every valid address
/// scores 1.
pub fn score_cfh(target: &ControlDomain) -> Result<f64, MetricsError> {
    wqc(target, &Weight::Base(BaseWeight::CfhValid), None)
}

/// Mean QC over up to eight controlled bytes.
pub fn score_data(bytes: &[&ControlDomain]) -> Result<f64, MetricsError> {
    if bytes.is_empty() || bytes.len() > 8 {
        return Err(MetricsError::Input(format!("data recipe takes 1 to 8 bytes, got {}", bytes.len())));
    }
    if let Some(b) = bytes.iter().find(|b| b.width != 8) {
        return Err(MetricsError::WidthMismatch { expected: 8, found: b.width });
    }
    Ok(bytes.iter().map(|b| qc(b)).sum::<f64>() / bytes.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bands_at_cutoffs() {
        assert_eq!(band(0.99, BandCutoffs::OOB), Band::Low);
        assert_eq!(band(1.0, BandCutoffs::OOB), Band::Medium);
        assert_eq!(band(10.0, BandCutoffs::OOB), Band::High);
        assert_eq!(band(0.05, BandCutoffs::RATIO), Band::Medium);
    }

    #[test]
    fn oob_with_fixed_offset() {
        let size = ControlDomain::from_intervals(64, &[(257, 296)]).unwrap();
        let s = score_oob(None, Some(ScoredParam::shifted(&size, -256)), &Weight::Base(BaseWeight::Log)).unwrap();
        assert!((s - 41f64.log2()).abs() < 1e-9);
        assert!(score_oob(None, None, &Weight::Base(BaseWeight::Log)).is_err());
    }

    #[test]
    fn cfh_full_domain_is_one() {
        assert!((score_cfh(&ControlDomain::full(64)).unwrap() - 1.0).abs() < 1e-15);
        let one_page = ControlDomain::from_intervals(64, &[(0x1000, 0x1fff)]).unwrap();
        assert!((score_cfh(&one_page).unwrap() - 4096.0 / 2f64.powi(48)).abs() < 1e-20);
        let above = ControlDomain::from_intervals(64, &[(1 << 50, (1 << 50) + 99)]).unwrap();
        assert_eq!(score_cfh(&above).unwrap(), 0.0);
    }

    #[test]
    fn data_is_mean_qc() {
        let full = ControlDomain::full(8);
        let one = ControlDomain::from_values(8, &[7]);
        assert!((score_data(&[&full, &one]).unwrap() - 0.5).abs() < 1e-12);
        assert!(score_data(&[]).is_err());
        assert!(score_data(&[&ControlDomain::full(16)]).is_err());
    }
}

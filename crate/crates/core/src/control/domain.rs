use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::{matching_runs, FixedBits};
use crate::formula::width_mask;

/// Most runs a fixed-bits constraint may be dissolved into.
pub const MAX_DISSOLVED_RUNS: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Guarantee {
    /// Every value of the interval is feasible.
    Strong,
    /// Only the bounds are known to be feasible.
    Weak,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ControlInterval {
    #[serde(with = "crate::serde_num::u64_str")]
    pub lo: u64,
    #[serde(with = "crate::serde_num::u64_str")]
    pub hi: u64,
    pub guarantee: Guarantee,
}

impl ControlInterval {
    pub fn new(lo: u64, hi: u64, guarantee: Guarantee) -> Self {
        debug_assert!(lo <= hi);
        ControlInterval { lo, hi, guarantee }
    }

    pub fn strong(lo: u64, hi: u64) -> Self {
        ControlInterval::new(lo, hi, Guarantee::Strong)
    }

    pub fn weak(lo: u64, hi: u64) -> Self {
        ControlInterval::new(lo, hi, Guarantee::Weak)
    }

    pub fn len(&self) -> u128 {
        (self.hi - self.lo) as u128 + 1
    }

    pub fn is_strong(&self) -> bool {
        self.guarantee == Guarantee::Strong
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DomainError {
    #[error("domain widths differ: {0} and {1}")]
    WidthMismatch(u32, u32),
    #[error("dissolving fixed bits would produce more than {0} intervals")]
    TooManyRuns(usize),
    #[error("malformed domain: {0}")]
    Invalid(String),
}

/// An attacker's domain of control over a target, as intervals tagged with
/// their guarantee, optionally intersected with a fixed-bits constraint.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlDomain {
    pub width: u32,
    pub intervals: Vec<ControlInterval>,
    pub fixed_bits: Option<FixedBits>,
    pub exact: bool,
    pub splits_used: u64,
    pub budget_exhausted: bool,
}

impl ControlDomain {
    pub fn empty(width: u32) -> Self {
        ControlDomain { width, intervals: Vec::new(), fixed_bits: None, exact: true, splits_used: 0, budget_exhausted: false }
    }

    pub fn full(width: u32) -> Self {
        ControlDomain { intervals: vec![ControlInterval::strong(0, width_mask(width))], ..ControlDomain::empty(width) }
    }

    /// Exact domain of an explicit value set.
    pub fn from_values(width: u32, values: &[u64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let mut intervals: Vec<ControlInterval> = Vec::new();
        for v in sorted {
            match intervals.last_mut() {
                Some(last) if last.hi.checked_add(1) == Some(v) => last.hi = v,
                _ => intervals.push(ControlInterval::strong(v, v)),
            }
        }
        ControlDomain { intervals, ..ControlDomain::empty(width) }
    }

    /// Exact domain from strong intervals.
    pub fn from_intervals(width: u32, ivs: &[(u64, u64)]) -> Result<Self, DomainError> {
        let d = ControlDomain {
            intervals: ivs.iter().map(|&(lo, hi)| ControlInterval::strong(lo, hi)).collect(),
            ..ControlDomain::empty(width)
        };
        d.validate()?;
        Ok(d)
    }

    pub fn domain_max(&self) -> u64 {
        width_mask(self.width)
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn all_strong(&self) -> bool {
        self.intervals.iter().all(|i| i.is_strong())
    }

    /// Values represented by one interval (fixed bits applied).
    pub fn interval_count(&self, iv: &ControlInterval) -> u128 {
        match self.fixed_bits {
            Some(fb) => fb.count(iv.lo, iv.hi),
            None => iv.len(),
        }
    }

    /// Size of the represented set (an over-approximation unless exact).
    pub fn count(&self) -> u128 {
        self.intervals.iter().map(|iv| self.interval_count(iv)).sum()
    }

    /// Size of the part carrying a strong guarantee.
    pub fn strong_count(&self) -> u128 {
        self.intervals.iter().filter(|iv| iv.is_strong()).map(|iv| self.interval_count(iv)).sum()
    }

    pub fn contains(&self, v: u64) -> bool {
        self.guarantee_of(v).is_some()
    }

    /// The guarantee of the interval representing `v`, if any.
    pub fn guarantee_of(&self, v: u64) -> Option<Guarantee> {
        if let Some(fb) = self.fixed_bits {
            if !fb.matches(v) {
                return None;
            }
        }
        let i = self.intervals.partition_point(|iv| iv.hi < v);
        self.intervals.get(i).filter(|iv| iv.lo <= v).map(|iv| iv.guarantee)
    }

    /// True when the represented set is the whole domain.
    pub fn is_full(&self) -> bool {
        self.count() == self.domain_max() as u128 + 1
    }

    /// Maximal runs of represented values with their guarantee, or `None`
    /// beyond `limit` runs.
    pub fn runs(&self, limit: usize) -> Option<Vec<ControlInterval>> {
        let mut out = Vec::new();
        for iv in &self.intervals {
            match self.fixed_bits {
                None => out.push(*iv),
                Some(fb) => {
                    let room = limit.checked_sub(out.len())?;
                    let runs = matching_runs(iv.lo, iv.hi, fb, room)?;
                    out.extend(runs.into_iter().map(|(lo, hi)| ControlInterval::new(lo, hi, iv.guarantee)));
                }
            }
            if out.len() > limit {
                return None;
            }
        }
        Some(out)
    }

    /// Represented values in increasing order (for small domains).
    pub fn values(&self) -> impl Iterator<Item = u64> + '_ {
        self.intervals.iter().flat_map(move |iv| {
            let fb = self.fixed_bits;
            (iv.lo..=iv.hi).filter(move |v| fb.is_none_or(|f| f.matches(*v)))
        })
    }

    /// Represented values carrying a strong guarantee.
    pub fn strong_values(&self) -> impl Iterator<Item = u64> + '_ {
        self.values().filter(|v| self.guarantee_of(*v) == Some(Guarantee::Strong))
    }

    /// Checks the structural invariants.
    pub fn validate(&self) -> Result<(), DomainError> {
        let bad = |m: String| Err(DomainError::Invalid(m));
        if !(1..=64).contains(&self.width) {
            return bad(format!("width {} outside 1..=64", self.width));
        }
        let max = self.domain_max();
        for iv in &self.intervals {
            if iv.lo > iv.hi || iv.hi > max {
                return bad(format!("interval [{}, {}] is not within [0, {max}]", iv.lo, iv.hi));
            }
        }
        for w in self.intervals.windows(2) {
            if w[0].hi >= w[1].lo {
                return bad(format!("intervals [{}, {}] and [{}, {}] overlap or are unsorted", w[0].lo, w[0].hi, w[1].lo, w[1].hi));
            }
            if w[0].hi + 1 == w[1].lo && w[0].guarantee == w[1].guarantee {
                return bad(format!("intervals [{}, {}] and [{}, {}] should be one", w[0].lo, w[0].hi, w[1].lo, w[1].hi));
            }
        }
        if let Some(fb) = self.fixed_bits {
            if fb.bits & !fb.mask != 0 || fb.mask & !max != 0 {
                return bad(format!("fixed bits {:#x}/{:#x} are inconsistent", fb.mask, fb.bits));
            }
        }
        if self.exact && (self.budget_exhausted || !self.all_strong()) {
            return bad("an exact domain must be all strong with budget left".into());
        }
        Ok(())
    }
}

/// Sorted union of closed intervals, adjacent ones joined.
fn union(mut ivs: Vec<(u64, u64)>) -> Vec<(u64, u64)> {
    ivs.sort_unstable();
    let mut out: Vec<(u64, u64)> = Vec::new();
    for (lo, hi) in ivs {
        match out.last_mut() {
            Some(last) if lo <= last.1.saturating_add(1) => last.1 = last.1.max(hi),
            _ => out.push((lo, hi)),
        }
    }
    out
}

fn dissolve(d: &ControlDomain) -> Result<Vec<ControlInterval>, DomainError> {
    d.runs(MAX_DISSOLVED_RUNS).ok_or(DomainError::TooManyRuns(MAX_DISSOLVED_RUNS))
}

/// Union of two domains of the same target, e.g. from different paths. A
/// value is strong if some input holds it strongly.
pub fn merge_domains(d1: &ControlDomain, d2: &ControlDomain) -> Result<ControlDomain, DomainError> {
    if d1.width != d2.width {
        return Err(DomainError::WidthMismatch(d1.width, d2.width));
    }
    let (fixed_bits, a, b) = if d1.fixed_bits == d2.fixed_bits {
        (d1.fixed_bits, d1.intervals.clone(), d2.intervals.clone())
    } else {
        (None, dissolve(d1)?, dissolve(d2)?)
    };
    let all: Vec<ControlInterval> = a.into_iter().chain(b).collect();
    let strong = union(all.iter().filter(|i| i.is_strong()).map(|i| (i.lo, i.hi)).collect());
    let total = union(all.iter().map(|i| (i.lo, i.hi)).collect());
    let mut intervals = Vec::new();
    let mut s = strong.iter().peekable();
    for &(lo, hi) in &total {
        // `next` is the first value of [lo, hi] not yet emitted
        let mut next = Some(lo);
        while let Some(&&(slo, shi)) = s.peek().filter(|&&&(slo, _)| slo <= hi) {
            if let Some(n) = next.filter(|n| *n < slo) {
                intervals.push(ControlInterval::weak(n, slo - 1));
            }
            intervals.push(ControlInterval::strong(slo, shi));
            next = if shi == hi { None } else { Some(shi + 1) };
            s.next();
        }
        if let Some(n) = next {
            intervals.push(ControlInterval::weak(n, hi));
        }
    }
    let exact = d1.exact && d2.exact;
    Ok(ControlDomain {
        width: d1.width,
        intervals,
        fixed_bits,
        exact,
        splits_used: d1.splits_used + d2.splits_used,
        budget_exhausted: d1.budget_exhausted || d2.budget_exhausted,
    })
}

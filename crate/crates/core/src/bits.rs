//! Arithmetic over the value set `{v : v & mask == bits}`.

use serde::{Deserialize, Serialize};

/// A fixed-bits constraint: every represented value `v` satisfies
/// `v & mask == bits`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FixedBits {
    #[serde(with = "crate::serde_num::u64_str")]
    pub mask: u64,
    #[serde(with = "crate::serde_num::u64_str")]
    pub bits: u64,
}

impl FixedBits {
    /// `None` when `bits` has a bit outside `mask`.
    pub fn new(mask: u64, bits: u64) -> Option<FixedBits> {
        (bits & !mask == 0).then_some(FixedBits { mask, bits })
    }

    pub fn matches(&self, v: u64) -> bool {
        v & self.mask == self.bits
    }

    /// True when nothing is constrained.
    pub fn is_trivial(&self) -> bool {
        self.mask == 0
    }

    /// Number of matching values in `[lo, hi]`.
    pub fn count(&self, lo: u64, hi: u64) -> u128 {
        count_fixed_bits(lo, hi, self.mask, self.bits)
    }

    pub fn next_at_or_above(&self, v: u64) -> Option<u64> {
        next_matching(v, self.mask, self.bits)
    }

    pub fn prev_at_or_below(&self, v: u64) -> Option<u64> {
        prev_matching(v, self.mask, self.bits)
    }
}

/// Matching values in `[0, n]`, by a walk over the bits of `n` from the top.
fn count_le(n: u64, mask: u64, bits: u64) -> u128 {
    let mut total: u128 = 0;
    for i in (0..64).rev() {
        let above = if i == 63 { 0 } else { !0u64 << (i + 1) };
        // every prefix above `i` must already agree with the constraint
        if (n & above & mask) != (bits & above) {
            return total;
        }
        if n >> i & 1 == 1 {
            // choose 0 at bit i, lower bits free except where fixed
            let bit_ok = mask >> i & 1 == 0 || bits >> i & 1 == 0;
            if bit_ok {
                let below = if i == 0 { 0 } else { u64::MAX >> (64 - i) };
                total += 1u128 << (below & !mask).count_ones();
            }
        }
    }
    if n & mask == bits {
        total += 1;
    }
    total
}

/// Exact number of `v` in `[lo, hi]` with `v & mask == bits`.
pub fn count_fixed_bits(lo: u64, hi: u64, mask: u64, bits: u64) -> u128 {
    if lo > hi || bits & !mask != 0 {
        return 0;
    }
    let upper = count_le(hi, mask, bits);
    let lower = if lo == 0 { 0 } else { count_le(lo - 1, mask, bits) };
    upper - lower
}

/// Smallest `x >= v` with `x & mask == bits`.
pub fn next_matching(v: u64, mask: u64, bits: u64) -> Option<u64> {
    if bits & !mask != 0 {
        return None;
    }
    if v & mask == bits {
        return Some(v);
    }
    // The answer agrees with v above some bit i where v has a 0 and the
    // answer a 1; the lowest admissible i gives the smallest answer.
    for i in 0..64u32 {
        if v >> i & 1 == 1 || (mask >> i & 1 == 1 && bits >> i & 1 == 0) {
            continue;
        }
        let above = if i == 63 { 0 } else { !0u64 << (i + 1) };
        if v & above & mask != bits & above {
            continue;
        }
        let below = if i == 0 { 0 } else { u64::MAX >> (64 - i) };
        return Some((v & above) | (1u64 << i) | (bits & below));
    }
    None
}

/// Largest `x <= v` with `x & mask == bits`.
pub fn prev_matching(v: u64, mask: u64, bits: u64) -> Option<u64> {
    // mirror image: complement maps `<=` to `>=` and flips the fixed bits
    next_matching(!v, mask, !bits & mask).map(|x| !x)
}

/// Maximal runs of consecutive matching values inside `[lo, hi]`, or `None`
/// if there are more than `limit` of them.
pub fn matching_runs(lo: u64, hi: u64, fb: FixedBits, limit: usize) -> Option<Vec<(u64, u64)>> {
    // Runs are aligned blocks of size 2^t, t = number of free low bits;
    // two adjacent blocks differ in bit t, which is fixed.
    let t = fb.mask.trailing_zeros();
    let block_mask = if t >= 64 { u64::MAX } else { (1u64 << t) - 1 };
    let mut out = Vec::new();
    let mut cur = fb.next_at_or_above(lo);
    while let Some(start) = cur {
        if start > hi {
            break;
        }
        if out.len() == limit {
            return None;
        }
        let end = (start | block_mask).min(hi);
        out.push((start, end));
        if end == u64::MAX {
            break;
        }
        cur = fb.next_at_or_above(end + 1);
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_count(lo: u64, hi: u64, mask: u64, bits: u64) -> u128 {
        (lo..=hi).filter(|v| v & mask == bits).count() as u128
    }

    #[test]
    fn count_examples() {
        assert_eq!(count_fixed_bits(0, 255, 1, 0), 128);
        assert_eq!(count_fixed_bits(0, 255, 0, 0), 256);
        assert_eq!(count_fixed_bits(3, 9, 1, 0), 3);
        assert_eq!(count_fixed_bits(0, u64::MAX, 0, 0), 1u128 << 64);
        assert_eq!(count_fixed_bits(0, u64::MAX, u64::MAX, 7), 1);
        assert_eq!(count_fixed_bits(9, 3, 0, 0), 0);
    }

    #[test]
    fn runs_of_even_values() {
        let fb = FixedBits::new(1, 0).unwrap();
        assert_eq!(matching_runs(3, 9, fb, 10), Some(vec![(4, 4), (6, 6), (8, 8)]));
        assert_eq!(matching_runs(0, 255, fb, 10), None);
        let fb = FixedBits::new(0b1100, 0b0100).unwrap();
        assert_eq!(matching_runs(0, 31, fb, 10), Some(vec![(4, 7), (20, 23)]));
    }

    proptest! {
        #[test]
        fn count_matches_enumeration(lo in 0u64..1024, len in 0u64..1024, mask in 0u64..1024, bits in 0u64..1024) {
            let bits = bits & mask;
            let hi = lo + len;
            prop_assert_eq!(count_fixed_bits(lo, hi, mask, bits), brute_count(lo, hi, mask, bits));
        }

        #[test]
        fn next_and_prev_match_enumeration(v in 0u64..4096, mask in 0u64..4096, bits in 0u64..4096) {
            let bits = bits & mask;
            // the high (unconstrained) bits make every search succeed in range
            let next = (v..).find(|x| x & mask == bits);
            prop_assert_eq!(next_matching(v, mask, bits), next);
            let prev = (0..=v).rev().find(|x| x & mask == bits);
            prop_assert_eq!(prev_matching(v, mask, bits), prev);
        }

        #[test]
        fn runs_cover_exactly(lo in 0u64..512, len in 0u64..512, mask in 0u64..512, bits in 0u64..512) {
            let fb = FixedBits::new(mask, bits & mask).unwrap();
            let hi = lo + len;
            let runs = matching_runs(lo, hi, fb, 1 << 12).unwrap();
            let flat: Vec<u64> = runs.iter().flat_map(|&(a, b)| a..=b).collect();
            let truth: Vec<u64> = (lo..=hi).filter(|v| fb.matches(*v)).collect();
            prop_assert_eq!(flat, truth);
            for w in runs.windows(2) {
                prop_assert!(w[0].1 + 1 < w[1].0);
            }
        }
    }

    #[test]
    fn next_matching_near_top() {
        assert_eq!(next_matching(u64::MAX - 1, 1, 1), Some(u64::MAX));
        assert_eq!(next_matching(u64::MAX, 1, 0), None);
        assert_eq!(prev_matching(0, 1, 1), None);
    }
}

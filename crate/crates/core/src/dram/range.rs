//! Closed-form access counts for contiguous unit ranges.
//!
//! Under a mixed-radix mapping, consecutive linear units `u -> u + 1` differ
//! in the digit at position `j` exactly when `u + 1` is a multiple of the
//! product of the radices below `j`. Since the classifier only looks at the
//! previous access (and a same-subarray predecessor always left its own row
//! open), counting multiples is enough to classify a whole range in O(log)
//! time instead of one state-machine step per unit.

use super::{AccessCounts, DramGeometry, Level, MappingPolicy};

/// Counts accesses of unit ranges under one policy and geometry, each range
/// classified from an idle chip.
#[derive(Debug, Clone, Copy)]
pub struct RangeCounter {
    /// `strides[j]` = product of the radices of digits below position `j`;
    /// `strides[3]` is one full row across all banks and subarrays.
    strides: [u64; 4],
    bank_pos: usize,
    sub_pos: usize,
    multi_bank: bool,
    multi_sub: bool,
    /// First unit index that lies in a far row.
    near_limit: u64,
}

impl RangeCounter {
    pub fn new(policy: &MappingPolicy, geometry: &DramGeometry) -> Self {
        let mut strides = [1u64; 4];
        for j in 0..3 {
            strides[j + 1] = strides[j] * policy.order[j].radix(geometry);
        }
        let pos = |level| policy.order.iter().position(|&l| l == level).unwrap();
        RangeCounter {
            strides,
            bank_pos: pos(Level::Bank),
            sub_pos: pos(Level::Subarray),
            multi_bank: geometry.banks_per_chip > 1,
            multi_sub: geometry.subarrays_per_bank > 1,
            near_limit: u64::from(geometry.rows_near) * strides[3],
        }
    }

    /// Counts of a single range `[start, start + len)`.
    pub fn range_counts(&self, start: u64, len: u64) -> AccessCounts {
        self.tiles_counts(start, len, 1)
    }

    /// Sum of the counts of `tiles` back-to-back ranges of `len` units
    /// starting at `base`, each classified independently.
    pub fn tiles_counts(&self, base: u64, len: u64, tiles: u64) -> AccessCounts {
        if len == 0 || tiles == 0 {
            return AccessCounts::default();
        }
        let near_tiles = if base >= self.near_limit {
            0
        } else {
            tiles.min((self.near_limit - base).div_ceil(len))
        };
        let mut counts = AccessCounts {
            acc_row_near: near_tiles,
            acc_row_far: tiles - near_tiles,
            ..AccessCounts::default()
        };

        // Internal transitions land on x = u + 1 in (base, base + tiles*len)
        // except at the starts of tiles 1..tiles.
        let changes = |stride: u64, below: u64| -> u64 {
            let hi = (base + tiles * len - 1).min(below.saturating_sub(1));
            multiples_in(stride, base + 1, hi) - ap_hits(base, len, 1, tiles - 1, stride, below)
        };
        let all = u64::MAX;
        if self.multi_bank {
            counts.acc_bank = changes(self.strides[self.bank_pos], all);
        }
        if self.multi_sub {
            let sub = changes(self.strides[self.sub_pos], all);
            let both = if self.multi_bank {
                changes(self.strides[self.bank_pos.max(self.sub_pos)], all)
            } else {
                0
            };
            counts.acc_subarray = sub - both;
        }
        if !self.multi_bank && !self.multi_sub {
            let rows = changes(self.strides[3], all);
            let near = changes(self.strides[3], self.near_limit);
            counts.acc_row_near += near;
            counts.acc_row_far += rows - near;
        }
        let internal = tiles * (len - 1);
        counts.acc_column = internal
            - counts.acc_bank
            - counts.acc_subarray
            - (counts.acc_row_near - near_tiles)
            - (counts.acc_row_far - (tiles - near_tiles));
        counts
    }
}

/// Multiples of `m` in `[lo, hi]`.
fn multiples_in(m: u64, lo: u64, hi: u64) -> u64 {
    if lo > hi {
        return 0;
    }
    let below = if lo == 0 { 0 } else { (lo - 1) / m + 1 };
    hi / m + 1 - below
}

/// Number of `k` in `[k_lo, k_hi]` with `base + k*step` a multiple of `m`
/// and smaller than `below`.
fn ap_hits(base: u64, step: u64, k_lo: u64, k_hi: u64, m: u64, below: u64) -> u64 {
    // Clip k so that base + k*step < below.
    if base >= below || k_lo > k_hi {
        return 0;
    }
    let k_hi = k_hi.min((below - 1 - base) / step);
    if k_lo > k_hi {
        return 0;
    }
    let (base, step, m) = (base as u128, step as u128, m as u128);
    let s = step % m;
    let b = base % m;
    let span = (k_hi - k_lo + 1) as u128;
    if s == 0 {
        return if b == 0 { span as u64 } else { 0 };
    }
    // Solve k*s = -b (mod m).
    let g = gcd(s, m);
    let target = (m - b) % m;
    if target % g != 0 {
        return 0;
    }
    let period = m / g;
    let k0 = (target / g) * mod_inverse(s / g, period) % period;
    // Count k in [k_lo, k_hi] with k = k0 (mod period).
    let first = {
        let lo = k_lo as u128;
        lo + (k0 + period - lo % period) % period
    };
    if first > k_hi as u128 {
        0
    } else {
        ((k_hi as u128 - first) / period + 1) as u64
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn mod_inverse(a: u128, m: u128) -> u128 {
    if m == 1 {
        return 0;
    }
    let (mut old_r, mut r) = (a as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    old_s.rem_euclid(m as i128) as u128
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::dram::{classify_trace, decompose, ArchKind, ArchVariant};

    fn brute(
        policy: &MappingPolicy,
        g: &DramGeometry,
        base: u64,
        len: u64,
        tiles: u64,
    ) -> AccessCounts {
        let arch = ArchVariant::new(ArchKind::Ddr3);
        (0..tiles)
            .map(|k| {
                let coords: Vec<_> = (0..len)
                    .map(|i| decompose(policy, g, base + k * len + i).unwrap())
                    .collect();
                classify_trace(&coords, &arch)
            })
            .sum()
    }

    fn geometry() -> impl Strategy<Value = DramGeometry> {
        (1u32..=4, 1u32..=4, 1u32..=3, 0u32..=3, 1u32..=5).prop_map(|(b, s, n, f, c)| {
            DramGeometry {
                channels: 1,
                ranks_per_channel: 1,
                chips_per_rank: 1,
                banks_per_chip: b,
                subarrays_per_bank: s,
                rows_near: n,
                rows_far: f,
                columns_per_row: c,
                access_unit_bytes: 8,
            }
        })
    }

    proptest! {
        #[test]
        fn matches_unit_by_unit_classification(
            g in geometry(),
            policy_ix in 0usize..6,
            base_frac in 0.0f64..1.0,
            len in 1u64..40,
            tiles in 1u64..6,
        ) {
            let policy = MappingPolicy::PRESETS[policy_ix];
            let cap = g.chip_units();
            prop_assume!(len * tiles <= cap);
            let base = ((cap - len * tiles) as f64 * base_frac) as u64;
            let counter = RangeCounter::new(&policy, &g);
            prop_assert_eq!(counter.tiles_counts(base, len, tiles), brute(&policy, &g, base, len, tiles));
        }

        #[test]
        fn ap_hits_matches_enumeration(
            base in 0u64..200, step in 1u64..50, k_lo in 0u64..10, span in 0u64..30,
            m in 1u64..64, below in 0u64..2000,
        ) {
            let k_hi = k_lo + span;
            let expected = (k_lo..=k_hi)
                .filter(|k| {
                    let x = base + k * step;
                    x % m == 0 && x < below
                })
                .count() as u64;
            prop_assert_eq!(ap_hits(base, step, k_lo, k_hi, m, below), expected);
        }
    }

    #[test]
    fn multiples_counting() {
        assert_eq!(multiples_in(4, 0, 0), 1);
        assert_eq!(multiples_in(4, 1, 3), 0);
        assert_eq!(multiples_in(4, 1, 16), 4);
        assert_eq!(multiples_in(3, 5, 4), 0);
    }

    #[test]
    fn toy_region_counts() {
        let g = DramGeometry {
            channels: 1,
            ranks_per_channel: 1,
            chips_per_rank: 1,
            banks_per_chip: 2,
            subarrays_per_bank: 2,
            rows_near: 1,
            rows_far: 1,
            columns_per_row: 4,
            access_unit_bytes: 8,
        };
        let c = RangeCounter::new(&MappingPolicy::GENERALIZED, &g);
        assert_eq!(c.range_counts(0, 16).to_array(), [12, 1, 0, 0, 3]);
        // Whole chip: one far-row crossing, all other group changes switch banks.
        assert_eq!(c.range_counts(0, 32).to_array(), [24, 1, 0, 0, 7]);
        assert_eq!(c.tiles_counts(14, 3, 2).to_array(), [3, 1, 1, 0, 1]);
    }

    #[test]
    fn huge_geometry_does_not_overflow() {
        let g = DramGeometry::tldram_2gb_x8();
        let c = RangeCounter::new(&MappingPolicy::GENERALIZED, &g);
        let cap = g.chip_units();
        let counts = c.tiles_counts(0, cap / 1024, 1024);
        assert_eq!(counts.total(), cap);
    }
}

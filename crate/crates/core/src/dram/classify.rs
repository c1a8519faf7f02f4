use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use super::{ArchVariant, PhysicalCoord, RowBufferScope, Segment};

/// Access condition of one DRAM access, relative to the access before it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AccessClass {
    /// Same bank, subarray and open row: a row-buffer hit.
    Column,
    /// Row activation in the near segment (or in a conventional array).
    RowNear,
    /// Row activation in the far segment.
    RowFar,
    /// Same bank, different subarray.
    Subarray,
    /// Different bank.
    Bank,
}

impl AccessClass {
    /// Term order of the cycle and energy sums.
    pub const ALL: [AccessClass; 5] = [
        AccessClass::Column,
        AccessClass::RowNear,
        AccessClass::RowFar,
        AccessClass::Subarray,
        AccessClass::Bank,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            AccessClass::Column => "column",
            AccessClass::RowNear => "row_near",
            AccessClass::RowFar => "row_far",
            AccessClass::Subarray => "subarray",
            AccessClass::Bank => "bank",
        }
    }
}

impl fmt::Display for AccessClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Number of accesses per condition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AccessCounts {
    pub acc_column: u64,
    pub acc_row_near: u64,
    pub acc_row_far: u64,
    pub acc_subarray: u64,
    pub acc_bank: u64,
}

impl AccessCounts {
    pub fn get(&self, class: AccessClass) -> u64 {
        match class {
            AccessClass::Column => self.acc_column,
            AccessClass::RowNear => self.acc_row_near,
            AccessClass::RowFar => self.acc_row_far,
            AccessClass::Subarray => self.acc_subarray,
            AccessClass::Bank => self.acc_bank,
        }
    }

    pub fn get_mut(&mut self, class: AccessClass) -> &mut u64 {
        match class {
            AccessClass::Column => &mut self.acc_column,
            AccessClass::RowNear => &mut self.acc_row_near,
            AccessClass::RowFar => &mut self.acc_row_far,
            AccessClass::Subarray => &mut self.acc_subarray,
            AccessClass::Bank => &mut self.acc_bank,
        }
    }

    pub fn from_array(values: [u64; 5]) -> Self {
        let mut out = AccessCounts::default();
        for class in AccessClass::ALL {
            *out.get_mut(class) = values[class.index()];
        }
        out
    }

    pub fn to_array(&self) -> [u64; 5] {
        AccessClass::ALL.map(|c| self.get(c))
    }

    pub fn total(&self) -> u64 {
        self.to_array().iter().sum()
    }

    pub fn row_activations(&self) -> u64 {
        self.acc_row_near + self.acc_row_far
    }

    pub fn scaled(&self, k: u64) -> Self {
        Self::from_array(self.to_array().map(|v| v * k))
    }
}

impl Add for AccessCounts {
    type Output = AccessCounts;

    fn add(self, rhs: Self) -> Self {
        let (a, b) = (self.to_array(), rhs.to_array());
        Self::from_array(std::array::from_fn(|i| a[i] + b[i]))
    }
}

impl AddAssign for AccessCounts {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for AccessCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(AccessCounts::default(), Add::add)
    }
}

type BankKey = (u32, u32, u32, u32);

fn bank_key(c: &PhysicalCoord) -> BankKey {
    (c.channel, c.rank, c.chip, c.bank)
}

fn activation(c: &PhysicalCoord) -> AccessClass {
    match c.segment {
        Segment::Near => AccessClass::RowNear,
        Segment::Far => AccessClass::RowFar,
    }
}

/// Open-row state of one chip, advanced one access at a time.
///
/// Each bank keeps its open `(subarray, row)` pairs in least-recently-used
/// order: at most one for per-bank row buffers, at most the variant's
/// open-subarray limit otherwise.
#[derive(Debug, Clone)]
pub struct RowBufferTracker {
    scope: RowBufferScope,
    max_open: Option<usize>,
    open: HashMap<BankKey, Vec<(u32, u32)>>,
    previous: Option<PhysicalCoord>,
}

impl RowBufferTracker {
    pub fn new(arch: &ArchVariant) -> Self {
        let max_open = match arch.row_buffer_scope {
            RowBufferScope::PerBank => Some(1),
            RowBufferScope::PerSubarray => arch.max_open_subarrays_per_bank.map(|n| n as usize),
        };
        RowBufferTracker {
            scope: arch.row_buffer_scope,
            max_open,
            open: HashMap::new(),
            previous: None,
        }
    }

    /// Classifies `coord` and makes its row the open row of its scope.
    pub fn access(&mut self, coord: &PhysicalCoord) -> AccessClass {
        let class = match self.previous {
            None => activation(coord),
            Some(prev) if bank_key(&prev) != bank_key(coord) => AccessClass::Bank,
            Some(prev) if prev.subarray != coord.subarray => AccessClass::Subarray,
            Some(_) => {
                let hit = self.open.get(&bank_key(coord)).is_some_and(|rows| {
                    rows.iter()
                        .any(|&(s, r)| s == coord.subarray && r == coord.row)
                });
                if hit {
                    AccessClass::Column
                } else {
                    activation(coord)
                }
            }
        };
        self.open_row(coord);
        self.previous = Some(*coord);
        class
    }

    fn open_row(&mut self, coord: &PhysicalCoord) {
        let rows = self.open.entry(bank_key(coord)).or_default();
        match self.scope {
            RowBufferScope::PerBank => {
                rows.clear();
            }
            RowBufferScope::PerSubarray => {
                rows.retain(|&(s, _)| s != coord.subarray);
            }
        }
        rows.push((coord.subarray, coord.row));
        if let Some(limit) = self.max_open {
            if rows.len() > limit {
                rows.remove(0);
            }
        }
    }
}

/// Classifies an ordered access stream from an idle chip.
pub fn classify_trace(accesses: &[PhysicalCoord], arch: &ArchVariant) -> AccessCounts {
    let mut tracker = RowBufferTracker::new(arch);
    let mut counts = AccessCounts::default();
    for coord in accesses {
        *counts.get_mut(tracker.access(coord)) += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dram::{map_region, ArchKind, DramGeometry, MappingCursor, MappingPolicy};

    fn toy() -> DramGeometry {
        DramGeometry {
            channels: 1,
            ranks_per_channel: 1,
            chips_per_rank: 1,
            banks_per_chip: 2,
            subarrays_per_bank: 2,
            rows_near: 1,
            rows_far: 1,
            columns_per_row: 4,
            access_unit_bytes: 8,
        }
    }

    fn coord(bank: u32, subarray: u32, row: u32, segment: Segment) -> PhysicalCoord {
        PhysicalCoord {
            channel: 0,
            rank: 0,
            chip: 0,
            bank,
            subarray,
            row,
            segment,
            column: 0,
        }
    }

    #[test]
    fn row_buffer_hit_stream() {
        let c = coord(0, 1, 0, Segment::Near);
        let counts = classify_trace(&[c; 8], &ArchVariant::new(ArchKind::Ddr3));
        assert_eq!(counts.acc_row_near, 1);
        assert_eq!(counts.acc_column, 7);
        assert_eq!(counts.total(), 8);
        let far = coord(1, 0, 1, Segment::Far);
        let counts = classify_trace(&[far; 3], &ArchVariant::new(ArchKind::TlDram));
        assert_eq!((counts.acc_row_far, counts.acc_column), (1, 2));
    }

    #[test]
    fn sequential_generalized_layout_on_toy_chip() {
        // Units 0-3 (b0,s0), 4-7 (b1,s0), 8-11 (b0,s1), 12-15 (b1,s1):
        // first access activates, the three group changes each switch bank.
        let (coords, _) = map_region(
            &MappingPolicy::GENERALIZED,
            &toy(),
            MappingCursor::default(),
            16,
        )
        .unwrap();
        let counts = classify_trace(&coords, &ArchVariant::new(ArchKind::Ddr3));
        assert_eq!(
            counts,
            AccessCounts {
                acc_column: 12,
                acc_row_near: 1,
                acc_row_far: 0,
                acc_subarray: 0,
                acc_bank: 3,
            }
        );
    }

    #[test]
    fn repeated_pass_has_no_activations_with_masa() {
        let (coords, _) = map_region(
            &MappingPolicy::GENERALIZED,
            &toy(),
            MappingCursor::default(),
            16,
        )
        .unwrap();
        let twice: Vec<_> = coords.iter().chain(coords.iter()).copied().collect();
        let masa = ArchVariant::new(ArchKind::SalpMasa);
        let one = classify_trace(&coords, &masa);
        let two = classify_trace(&twice, &masa);
        let second = AccessCounts::from_array(std::array::from_fn(|i| {
            two.to_array()[i] - one.to_array()[i]
        }));
        assert_eq!(second.row_activations(), 0);
        assert_eq!(second.total(), 16);
    }

    #[test]
    fn subarray_switch_and_conflict() {
        let a = coord(0, 0, 0, Segment::Near);
        let b = coord(0, 1, 0, Segment::Near);
        let a2 = coord(0, 0, 1, Segment::Far);
        for kind in ArchKind::ALL {
            let counts = classify_trace(&[a, b, a, a2], &ArchVariant::new(kind));
            assert_eq!(
                counts,
                AccessCounts {
                    acc_column: 0,
                    acc_row_near: 1,
                    acc_row_far: 1,
                    acc_subarray: 2,
                    acc_bank: 0,
                },
                "{kind}"
            );
        }
    }

    #[test]
    fn lru_limit_is_honoured() {
        let arch = ArchVariant::new(ArchKind::SalpMasa)
            .with_max_open(Some(2))
            .unwrap();
        let mut t = RowBufferTracker::new(&arch);
        for s in 0..3 {
            t.access(&coord(0, s, 0, Segment::Near));
        }
        assert_eq!(t.open[&(0, 0, 0, 0)], vec![(1, 0), (2, 0)]);
        t.access(&coord(0, 1, 0, Segment::Near));
        assert_eq!(t.open[&(0, 0, 0, 0)], vec![(2, 0), (1, 0)]);
        let mut unlimited = RowBufferTracker::new(&ArchVariant::new(ArchKind::SalpMasa));
        for s in 0..5 {
            unlimited.access(&coord(0, s, 0, Segment::Near));
        }
        assert_eq!(unlimited.open[&(0, 0, 0, 0)].len(), 5);
        let mut ddr3 = RowBufferTracker::new(&ArchVariant::new(ArchKind::Ddr3));
        for s in 0..3 {
            ddr3.access(&coord(0, s, 0, Segment::Near));
        }
        assert_eq!(ddr3.open[&(0, 0, 0, 0)], vec![(2, 0)]);
    }

    #[test]
    fn counts_arithmetic() {
        let a = AccessCounts::from_array([1, 2, 3, 4, 5]);
        assert_eq!((a + a).to_array(), [2, 4, 6, 8, 10]);
        assert_eq!(a.scaled(3).total(), 45);
        assert_eq!([a, a, a].into_iter().sum::<AccessCounts>(), a.scaled(3));
        assert_eq!(a.get(AccessClass::RowFar), 3);
    }
}

//! DRAM organisation, mapping policies and row-buffer classification.

mod classify;
mod mapping;
mod range;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use classify::{classify_trace, AccessClass, AccessCounts, RowBufferTracker};
pub use mapping::{
    build_layout, decompose, map_region, Layout, Level, MappingCursor, MappingPolicy,
    PhysicalCoord, Segment,
};
pub use range::RangeCounter;

/// Physical organisation of the DRAM.
///
/// Every subarray has `rows_near + rows_far` rows; `rows_far = 0` is a
/// conventional (non-tiered) array. `columns_per_row` counts access units,
/// not bytes. Mapping happens inside one chip; extra chips per rank only
/// widen the access unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DramGeometry {
    pub channels: u32,
    pub ranks_per_channel: u32,
    pub chips_per_rank: u32,
    pub banks_per_chip: u32,
    pub subarrays_per_bank: u32,
    pub rows_near: u32,
    pub rows_far: u32,
    pub columns_per_row: u32,
    pub access_unit_bytes: u64,
}

impl DramGeometry {
    pub fn validate(&self) -> Result<()> {
        for (value, what) in [
            (self.channels, "channels"),
            (self.ranks_per_channel, "ranks_per_channel"),
            (self.chips_per_rank, "chips_per_rank"),
            (self.banks_per_chip, "banks_per_chip"),
            (self.subarrays_per_bank, "subarrays_per_bank"),
            (self.rows_near, "rows_near"),
            (self.columns_per_row, "columns_per_row"),
        ] {
            if value == 0 {
                return Err(Error::InvalidGeometry(format!("{what} must be at least 1")));
            }
        }
        if self.access_unit_bytes == 0 {
            return Err(Error::InvalidGeometry(
                "access_unit_bytes must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn rows_per_subarray(&self) -> u32 {
        self.rows_near + self.rows_far
    }

    /// Access units addressable in one chip.
    pub fn chip_units(&self) -> u64 {
        u64::from(self.banks_per_chip)
            * u64::from(self.subarrays_per_bank)
            * u64::from(self.rows_per_subarray())
            * u64::from(self.columns_per_row)
    }

    /// Bytes delivered by one access across the chips of a rank.
    pub fn effective_unit_bytes(&self) -> u64 {
        self.access_unit_bytes * u64::from(self.chips_per_rank)
    }

    pub fn total_capacity_bytes(&self) -> u64 {
        u64::from(self.channels)
            * u64::from(self.ranks_per_channel)
            * u64::from(self.chips_per_rank)
            * self.chip_units()
            * self.access_unit_bytes
    }

    /// DDR3-1600 2Gb x8, one chip, 8 banks of 8 subarrays x 4096 rows,
    /// 1 KB rows read in 8-byte bursts.
    pub fn ddr3_2gb_x8() -> Self {
        DramGeometry {
            channels: 1,
            ranks_per_channel: 1,
            chips_per_rank: 1,
            banks_per_chip: 8,
            subarrays_per_bank: 8,
            rows_near: 4096,
            rows_far: 0,
            columns_per_row: 128,
            access_unit_bytes: 8,
        }
    }

    /// 2Gb x8 tiered-latency array: 32 subarrays per bank, 64 near and 960
    /// far rows each.
    pub fn tldram_2gb_x8() -> Self {
        DramGeometry {
            subarrays_per_bank: 32,
            rows_near: 64,
            rows_far: 960,
            ..Self::ddr3_2gb_x8()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ArchKind {
    Ddr3,
    Salp1,
    Salp2,
    SalpMasa,
    TlDram,
}

impl ArchKind {
    pub const ALL: [ArchKind; 5] = [
        ArchKind::Ddr3,
        ArchKind::Salp1,
        ArchKind::Salp2,
        ArchKind::SalpMasa,
        ArchKind::TlDram,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ArchKind::Ddr3 => "DDR3",
            ArchKind::Salp1 => "SALP-1",
            ArchKind::Salp2 => "SALP-2",
            ArchKind::SalpMasa => "SALP-MASA",
            ArchKind::TlDram => "TL-DRAM",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let key: String = text
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "ddr3" => Ok(ArchKind::Ddr3),
            "salp1" => Ok(ArchKind::Salp1),
            "salp2" => Ok(ArchKind::Salp2),
            "salpmasa" | "masa" => Ok(ArchKind::SalpMasa),
            "tldram" => Ok(ArchKind::TlDram),
            _ => Err(Error::UnknownName(text.to_string())),
        }
    }
}

impl fmt::Display for ArchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which structure owns a row buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowBufferScope {
    PerBank,
    PerSubarray,
}

/// Row-buffer behaviour of an architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArchVariant {
    pub kind: ArchKind,
    pub row_buffer_scope: RowBufferScope,
    /// Open subarrays per bank; `None` means unlimited.
    pub max_open_subarrays_per_bank: Option<u32>,
}

impl ArchVariant {
    pub fn new(kind: ArchKind) -> Self {
        let (row_buffer_scope, max_open) = match kind {
            ArchKind::Ddr3 => (RowBufferScope::PerBank, Some(1)),
            ArchKind::Salp1 | ArchKind::Salp2 | ArchKind::TlDram => {
                (RowBufferScope::PerSubarray, Some(1))
            }
            ArchKind::SalpMasa => (RowBufferScope::PerSubarray, None),
        };
        ArchVariant {
            kind,
            row_buffer_scope,
            max_open_subarrays_per_bank: max_open,
        }
    }

    /// Overrides the open-subarray limit of a per-subarray architecture.
    pub fn with_max_open(mut self, max_open: Option<u32>) -> Result<Self> {
        if self.row_buffer_scope == RowBufferScope::PerBank && max_open != Some(1) {
            return Err(Error::InvalidGeometry(format!(
                "{} keeps one row buffer per bank",
                self.kind
            )));
        }
        if max_open == Some(0) {
            return Err(Error::InvalidGeometry(
                "max_open_subarrays must be at least 1".into(),
            ));
        }
        self.max_open_subarrays_per_bank = max_open;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_geometries_are_two_gigabit() {
        let two_gb = 2u64 << 30;
        assert_eq!(
            DramGeometry::ddr3_2gb_x8().total_capacity_bytes() * 8,
            two_gb
        );
        assert_eq!(
            DramGeometry::tldram_2gb_x8().total_capacity_bytes() * 8,
            two_gb
        );
        assert_eq!(DramGeometry::tldram_2gb_x8().rows_per_subarray(), 1024);
    }

    #[test]
    fn capacity_formula() {
        let g = DramGeometry {
            channels: 2,
            ranks_per_channel: 2,
            chips_per_rank: 4,
            banks_per_chip: 2,
            subarrays_per_bank: 2,
            rows_near: 1,
            rows_far: 1,
            columns_per_row: 4,
            access_unit_bytes: 8,
        };
        assert_eq!(g.chip_units(), 32);
        assert_eq!(g.total_capacity_bytes(), 2 * 2 * 4 * 2 * 2 * 2 * 4 * 8);
        assert_eq!(g.effective_unit_bytes(), 32);
    }

    #[test]
    fn geometry_validation() {
        let mut g = DramGeometry::ddr3_2gb_x8();
        assert!(g.validate().is_ok());
        g.rows_far = 0;
        assert!(g.validate().is_ok());
        g.banks_per_chip = 0;
        assert!(g.validate().is_err());
        let mut g = DramGeometry::ddr3_2gb_x8();
        g.rows_near = 0;
        assert!(g.validate().is_err());
    }

    #[test]
    fn arch_variants() {
        use RowBufferScope::*;
        let v = |k| ArchVariant::new(k);
        assert_eq!(v(ArchKind::Ddr3).row_buffer_scope, PerBank);
        assert_eq!(v(ArchKind::Ddr3).max_open_subarrays_per_bank, Some(1));
        for k in [ArchKind::Salp1, ArchKind::Salp2, ArchKind::TlDram] {
            assert_eq!(v(k).row_buffer_scope, PerSubarray);
            assert_eq!(v(k).max_open_subarrays_per_bank, Some(1));
        }
        assert_eq!(v(ArchKind::SalpMasa).max_open_subarrays_per_bank, None);
        assert!(v(ArchKind::SalpMasa).with_max_open(Some(4)).is_ok());
        assert!(v(ArchKind::Ddr3).with_max_open(Some(2)).is_err());
        assert!(v(ArchKind::Salp1).with_max_open(Some(0)).is_err());
    }

    #[test]
    fn arch_names_parse() {
        for k in ArchKind::ALL {
            assert_eq!(ArchKind::parse(k.name()).unwrap(), k);
        }
        assert_eq!(ArchKind::parse("tldram").unwrap(), ArchKind::TlDram);
        assert_eq!(ArchKind::parse("SALP_MASA").unwrap(), ArchKind::SalpMasa);
        assert!(ArchKind::parse("hbm").is_err());
    }
}

use std::fmt;

use serde::{Deserialize, Serialize};

use super::DramGeometry;
use crate::workload::DataType;
use crate::{Error, Result};

/// Address levels a mapping policy orders below the row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Level {
    Column,
    Bank,
    Subarray,
}

impl Level {
    fn name(self) -> &'static str {
        match self {
            Level::Column => "column",
            Level::Bank => "bank",
            Level::Subarray => "subarray",
        }
    }

    pub(crate) fn radix(self, g: &DramGeometry) -> u64 {
        u64::from(match self {
            Level::Column => g.columns_per_row,
            Level::Bank => g.banks_per_chip,
            Level::Subarray => g.subarrays_per_bank,
        })
    }
}

/// Loop order used to place consecutive access units: `order[0]` varies
/// fastest, the row varies slowest and fills near rows before far rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MappingPolicy {
    pub order: [Level; 3],
}

impl MappingPolicy {
    /// The six permutations, numbered 1..=6.
    pub const PRESETS: [MappingPolicy; 6] = [
        MappingPolicy {
            order: [Level::Column, Level::Subarray, Level::Bank],
        },
        MappingPolicy {
            order: [Level::Subarray, Level::Column, Level::Bank],
        },
        MappingPolicy {
            order: [Level::Column, Level::Bank, Level::Subarray],
        },
        MappingPolicy {
            order: [Level::Bank, Level::Column, Level::Subarray],
        },
        MappingPolicy {
            order: [Level::Subarray, Level::Bank, Level::Column],
        },
        MappingPolicy {
            order: [Level::Bank, Level::Subarray, Level::Column],
        },
    ];

    /// Columns first, then banks, then subarrays, then rows.
    pub const GENERALIZED: MappingPolicy = Self::PRESETS[2];

    pub fn preset(number: usize) -> Result<Self> {
        number
            .checked_sub(1)
            .and_then(|i| Self::PRESETS.get(i).copied())
            .ok_or_else(|| Error::UnknownName(format!("mapping-{number}")))
    }

    pub fn new(order: [Level; 3]) -> Result<Self> {
        let distinct = order[0] != order[1] && order[1] != order[2] && order[0] != order[2];
        if !distinct {
            return Err(Error::Config(format!(
                "mapping order {order:?} must be a permutation of column, bank, subarray"
            )));
        }
        Ok(MappingPolicy { order })
    }

    /// Preset number when the order is one of the six presets (always, since
    /// there are exactly six permutations).
    pub fn number(&self) -> usize {
        Self::PRESETS
            .iter()
            .position(|p| p == self)
            .map(|i| i + 1)
            .expect("every permutation is a preset")
    }

    /// Accepts `mapping-3`, `Mapping-3`, `3` or `column,bank,subarray`.
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim().to_ascii_lowercase();
        let digits = t
            .strip_prefix("mapping")
            .map(|s| s.trim_start_matches(['-', '_', ' ']));
        if let Ok(n) = digits.unwrap_or(&t).parse::<usize>() {
            return Self::preset(n);
        }
        let levels: Vec<Level> = t
            .split(',')
            .map(|part| match part.trim() {
                "column" | "col" => Ok(Level::Column),
                "bank" => Ok(Level::Bank),
                "subarray" | "sub" => Ok(Level::Subarray),
                _ => Err(Error::UnknownName(text.to_string())),
            })
            .collect::<Result<_>>()?;
        let order: [Level; 3] = levels
            .try_into()
            .map_err(|_| Error::UnknownName(text.to_string()))?;
        Self::new(order)
    }

    pub fn describe(&self) -> String {
        let inner: Vec<&str> = self.order.iter().map(|l| l.name()).collect();
        format!("{}, row (near to far)", inner.join(", "))
    }
}

impl fmt::Display for MappingPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mapping-{}", self.number())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Segment {
    Near,
    Far,
}

/// Location of one access unit. Rows are numbered within their subarray,
/// near rows first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PhysicalCoord {
    pub channel: u32,
    pub rank: u32,
    pub chip: u32,
    pub bank: u32,
    pub subarray: u32,
    pub row: u32,
    pub segment: Segment,
    pub column: u32,
}

/// Mixed-radix decomposition of `unit_index` within one chip.
pub fn decompose(
    policy: &MappingPolicy,
    geometry: &DramGeometry,
    unit_index: u64,
) -> Result<PhysicalCoord> {
    let capacity = geometry.chip_units();
    if unit_index >= capacity {
        return Err(Error::CapacityExceeded {
            needed: unit_index + 1,
            capacity,
        });
    }
    let mut rest = unit_index;
    let mut digits = [0u32; 3];
    for (slot, level) in policy.order.iter().enumerate() {
        let radix = level.radix(geometry);
        digits[slot] = (rest % radix) as u32;
        rest /= radix;
    }
    let digit = |want: Level| {
        let slot = policy.order.iter().position(|&l| l == want).unwrap();
        digits[slot]
    };
    let row = rest as u32;
    Ok(PhysicalCoord {
        channel: 0,
        rank: 0,
        chip: 0,
        bank: digit(Level::Bank),
        subarray: digit(Level::Subarray),
        row,
        segment: if row < geometry.rows_near {
            Segment::Near
        } else {
            Segment::Far
        },
        column: digit(Level::Column),
    })
}

/// Next unmapped linear unit of a region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct MappingCursor {
    pub next_unit: u64,
}

impl MappingCursor {
    pub fn at(next_unit: u64) -> Self {
        MappingCursor { next_unit }
    }
}

/// Places `n_units` consecutive units starting at the cursor.
pub fn map_region(
    policy: &MappingPolicy,
    geometry: &DramGeometry,
    cursor: MappingCursor,
    n_units: u64,
) -> Result<(Vec<PhysicalCoord>, MappingCursor)> {
    let end = cursor.next_unit + n_units;
    let capacity = geometry.chip_units();
    if end > capacity {
        return Err(Error::CapacityExceeded {
            needed: end,
            capacity,
        });
    }
    let coords = (cursor.next_unit..end)
        .map(|u| decompose(policy, geometry, u))
        .collect::<Result<Vec<_>>>()?;
    Ok((coords, MappingCursor::at(end)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutRegion {
    pub data_type: DataType,
    /// Linear unit index of the region's first unit.
    pub base: u64,
    pub coords: Vec<PhysicalCoord>,
}

/// Coordinates of every data-type region of a layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub regions: Vec<LayoutRegion>,
}

impl Layout {
    pub fn region(&self, data_type: DataType) -> Option<&LayoutRegion> {
        self.regions.iter().find(|r| r.data_type == data_type)
    }
}

/// Maps the regions back to back, in the order given, each with its own
/// cursor.
pub fn build_layout(
    regions: &[(DataType, u64)],
    policy: &MappingPolicy,
    geometry: &DramGeometry,
) -> Result<Layout> {
    let needed: u64 = regions.iter().map(|(_, n)| n).sum();
    let capacity = geometry.chip_units();
    if needed > capacity {
        return Err(Error::CapacityExceeded { needed, capacity });
    }
    let mut base = 0;
    let mut out = Vec::with_capacity(regions.len());
    for &(data_type, n_units) in regions {
        let (coords, next) = map_region(policy, geometry, MappingCursor::at(base), n_units)?;
        out.push(LayoutRegion {
            data_type,
            base,
            coords,
        });
        base = next.next_unit;
    }
    Ok(Layout { regions: out })
}

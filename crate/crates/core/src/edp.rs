//! Latency, energy and energy-delay product of classified DRAM accesses.
//!
//! Per tile, latency is the dot product of the five access counts with the
//! profile's per-condition cycles, and energy the dot product with the
//! per-condition energies. A layer's EDP is the product of its summed
//! latency and summed energy (not a sum of per-tile products).

use serde::{Deserialize, Serialize};

use crate::dram::{AccessClass, AccessCounts, ArchKind};
use crate::{Error, Result};

/// Cycles and energy per access condition of one architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostProfile {
    pub arch: ArchKind,
    /// DRAM clock cycles, indexed by [`AccessClass::index`].
    pub cycles: [u64; 5],
    /// Nanojoules, indexed by [`AccessClass::index`].
    pub energy_nj: [f64; 5],
    pub provenance: String,
}

/// Cheapest to most expensive access condition for a sane profile.
pub const COST_ORDER: [AccessClass; 5] = [
    AccessClass::Column,
    AccessClass::Bank,
    AccessClass::Subarray,
    AccessClass::RowNear,
    AccessClass::RowFar,
];

impl CostProfile {
    /// Profile with positive, finite costs; ordering is checked separately
    /// by [`CostProfile::check_ordering`].
    pub fn new(arch: ArchKind, cycles: [u64; 5], energy_nj: [f64; 5]) -> Result<Self> {
        for class in AccessClass::ALL {
            let c = cycles[class.index()];
            let e = energy_nj[class.index()];
            if c == 0 {
                return Err(Error::InvalidProfile(format!(
                    "{arch}: cycles for {class} must be positive"
                )));
            }
            if !(e.is_finite() && e > 0.0) {
                return Err(Error::InvalidProfile(format!(
                    "{arch}: energy for {class} must be positive, got {e}"
                )));
            }
        }
        Ok(CostProfile {
            arch,
            cycles,
            energy_nj,
            provenance: String::new(),
        })
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }

    pub fn cycles_of(&self, class: AccessClass) -> u64 {
        self.cycles[class.index()]
    }

    pub fn energy_of(&self, class: AccessClass) -> f64 {
        self.energy_nj[class.index()]
    }

    /// Checks column <= bank <= subarray <= row_near <= row_far for both
    /// cycles and energy.
    pub fn check_ordering(&self) -> Result<()> {
        for pair in COST_ORDER.windows(2) {
            let (lo, hi) = (pair[0], pair[1]);
            if self.cycles_of(lo) > self.cycles_of(hi) {
                return Err(Error::InvalidProfile(format!(
                    "{}: cycles of {lo} ({}) exceed cycles of {hi} ({})",
                    self.arch,
                    self.cycles_of(lo),
                    self.cycles_of(hi)
                )));
            }
            if self.energy_of(lo) > self.energy_of(hi) {
                return Err(Error::InvalidProfile(format!(
                    "{}: energy of {lo} ({}) exceeds energy of {hi} ({})",
                    self.arch,
                    self.energy_of(lo),
                    self.energy_of(hi)
                )));
            }
        }
        Ok(())
    }

    /// Multiplies every cycle count by `k`.
    pub fn scale_cycles(&self, k: u64) -> Self {
        CostProfile {
            cycles: self.cycles.map(|c| c * k),
            ..self.clone()
        }
    }

    pub fn scale_energy(&self, k: f64) -> Self {
        CostProfile {
            energy_nj: self.energy_nj.map(|e| e * k),
            ..self.clone()
        }
    }
}

pub fn cycles_for_counts(counts: &AccessCounts, profile: &CostProfile) -> u64 {
    AccessClass::ALL
        .iter()
        .map(|&c| counts.get(c) * profile.cycles_of(c))
        .sum()
}

pub fn energy_for_counts(counts: &AccessCounts, profile: &CostProfile) -> f64 {
    let mut total = 0.0;
    for class in AccessClass::ALL {
        total += counts.get(class) as f64 * profile.energy_of(class);
    }
    total
}

/// Latency, energy and EDP of one layer.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EdpResult {
    pub latency_cycles: u64,
    pub energy_nj: f64,
    /// `latency_cycles * energy_nj`, in cycle-nJ.
    pub edp: f64,
}

impl EdpResult {
    pub fn new(latency_cycles: u64, energy_nj: f64) -> Self {
        EdpResult {
            latency_cycles,
            energy_nj,
            edp: latency_cycles as f64 * energy_nj,
        }
    }
}

pub fn layer_edp(per_tile_counts: &[AccessCounts], profile: &CostProfile) -> EdpResult {
    let mut latency = 0;
    let mut energy = 0.0;
    for counts in per_tile_counts {
        latency += cycles_for_counts(counts, profile);
        energy += energy_for_counts(counts, profile);
    }
    EdpResult::new(latency, energy)
}

/// Totals over the layers of a network.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NetworkEdp {
    pub total_edp: f64,
    pub total_latency_cycles: u64,
    pub total_energy_nj: f64,
    pub layers: usize,
}

/// Sums per-layer results. Floating-point terms are added in ascending order
/// so the totals do not depend on layer order.
pub fn network_edp(per_layer: &[EdpResult]) -> NetworkEdp {
    let sorted_sum = |mut values: Vec<f64>| {
        values.sort_by(f64::total_cmp);
        values.into_iter().sum::<f64>()
    };
    NetworkEdp {
        total_edp: sorted_sum(per_layer.iter().map(|r| r.edp).collect()),
        total_latency_cycles: per_layer.iter().map(|r| r.latency_cycles).sum(),
        total_energy_nj: sorted_sum(per_layer.iter().map(|r| r.energy_nj).collect()),
        layers: per_layer.len(),
    }
}

//! Exhaustive design-space exploration over partitions, schedules and
//! mapping policies, swept per architecture.
//!
//! Two evaluators compute the same [`PointEvaluation`]:
//!
//! * [`evaluate_point`] counts accesses in closed form from the fetch plan
//!   and [`RangeCounter`]; cost is independent of tensor sizes.
//! * [`evaluate_point_reference`] materialises the tile trace, lays every
//!   tile out unit by unit and runs the row-buffer classifier over it.
//!
//! Each tile transfer is classified starting from an idle chip (row-buffer
//! state does not carry over from the previous transfer). The reference
//! evaluator can also carry state across a whole layer, for comparison.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dram::{
    build_layout, classify_trace, AccessCounts, ArchVariant, DramGeometry, MappingPolicy,
    PhysicalCoord, RangeCounter, RowBufferTracker,
};
use crate::edp::{
    cycles_for_counts, energy_for_counts, network_edp, CostProfile, EdpResult, NetworkEdp,
};
use crate::workload::{
    enumerate_partitions, generate_tile_trace, select_adaptive_schedule, tile_byte_sizes,
    BufferConfig, DataType, FetchPlan, Granularity, LayerShape, Reuse, ScheduleScheme, TileBytes,
    TileIndex, TilingConfig, TrafficSummary,
};
use crate::{Error, Result};

/// One architecture of the outer sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub name: String,
    pub variant: ArchVariant,
    pub geometry: DramGeometry,
    pub profile: CostProfile,
}

impl ArchConfig {
    pub fn new(
        name: impl Into<String>,
        variant: ArchVariant,
        geometry: DramGeometry,
        profile: CostProfile,
    ) -> Result<Self> {
        geometry.validate()?;
        if profile.arch != variant.kind {
            return Err(Error::InvalidProfile(format!(
                "profile is for {}, architecture is {}",
                profile.arch, variant.kind
            )));
        }
        Ok(ArchConfig {
            name: name.into(),
            variant,
            geometry,
            profile,
        })
    }

    fn unit_bytes(&self) -> u64 {
        self.geometry.effective_unit_bytes()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DesignPoint {
    pub tiling: TilingConfig,
    pub schedule: Reuse,
    pub mapping: MappingPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointEvaluation {
    pub counts: AccessCounts,
    pub edp: EdpResult,
    pub traffic: TrafficSummary,
}

/// Row-buffer state handling between consecutive tile transfers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum RowStateScope {
    /// Every transfer starts from an idle chip (the model used everywhere).
    #[default]
    PerTile,
    /// State carries from one transfer to the next within the layer.
    Layer,
}

/// Prices aggregated counts. Latency and energy are linear in the counts, so
/// this equals summing per-tile values.
pub fn price(counts: &AccessCounts, profile: &CostProfile) -> EdpResult {
    EdpResult::new(
        cycles_for_counts(counts, profile),
        energy_for_counts(counts, profile),
    )
}

fn check_buffers(layer: &LayerShape, bytes: &TileBytes, buffers: &BufferConfig) -> Result<()> {
    match bytes.first_overflow(buffers) {
        Some((data_type, needed)) => Err(Error::BufferOverflow {
            layer: layer.name.clone(),
            data_type,
            needed,
            capacity: buffers.capacity(data_type),
        }),
        None => Ok(()),
    }
}

/// Units per tile and tile count of the ifms, wghs and ofms regions.
fn region_shapes(plan: &FetchPlan, bytes: &TileBytes, unit_bytes: u64) -> [(u64, u64); 3] {
    DataType::ALL.map(|d| (bytes.get(d).div_ceil(unit_bytes), plan.tiles[d.index()]))
}

fn check_capacity(shapes: &[(u64, u64); 3], geometry: &DramGeometry) -> Result<()> {
    let needed = shapes
        .iter()
        .try_fold(0u64, |acc, &(units, tiles)| {
            acc.checked_add(units.checked_mul(tiles)?)
        })
        .unwrap_or(u64::MAX);
    let capacity = geometry.chip_units();
    if needed > capacity {
        return Err(Error::CapacityExceeded { needed, capacity });
    }
    Ok(())
}

/// Closed-form evaluation of one design point.
pub fn evaluate_point(
    layer: &LayerShape,
    buffers: &BufferConfig,
    point: &DesignPoint,
    arch: &ArchConfig,
) -> Result<PointEvaluation> {
    let bytes = tile_byte_sizes(layer, &point.tiling);
    check_buffers(layer, &bytes, buffers)?;
    let plan = FetchPlan::new(layer, &point.tiling, point.schedule);
    let shapes = region_shapes(&plan, &bytes, arch.unit_bytes());
    check_capacity(&shapes, &arch.geometry)?;

    let counter = RangeCounter::new(&point.mapping, &arch.geometry);
    let mut counts = AccessCounts::default();
    let mut base = 0;
    for d in DataType::ALL {
        let (units, tiles) = shapes[d.index()];
        let per_pass = counter.tiles_counts(base, units, tiles);
        counts += per_pass.scaled(plan.events_per_tile(d));
        base += units * tiles;
    }
    Ok(PointEvaluation {
        counts,
        edp: price(&counts, &arch.profile),
        traffic: TrafficSummary::from_plan(&plan, &bytes, arch.unit_bytes()),
    })
}

/// Trace-driven evaluation: tiles are laid out in first-fetch order inside
/// their region and every transfer's access units are classified in trace
/// order.
pub fn evaluate_point_reference(
    layer: &LayerShape,
    buffers: &BufferConfig,
    point: &DesignPoint,
    arch: &ArchConfig,
    scope: RowStateScope,
) -> Result<PointEvaluation> {
    let bytes = tile_byte_sizes(layer, &point.tiling);
    check_buffers(layer, &bytes, buffers)?;
    let plan = FetchPlan::new(layer, &point.tiling, point.schedule);
    let unit_bytes = arch.unit_bytes();
    let shapes = region_shapes(&plan, &bytes, unit_bytes);
    let regions = DataType::ALL.map(|d| {
        let (units, tiles) = shapes[d.index()];
        (d, units * tiles)
    });
    let layout = build_layout(&regions, &point.mapping, &arch.geometry)?;

    let trace = generate_tile_trace(layer, &point.tiling, point.schedule);
    let mut slots: [Vec<TileIndex>; 3] = Default::default();
    for ev in &trace {
        let seen = &mut slots[ev.data_type.index()];
        if !seen.contains(&ev.tile) {
            seen.push(ev.tile);
        }
    }

    let mut tracker = RowBufferTracker::new(&arch.variant);
    let mut per_tile = Vec::with_capacity(trace.len());
    for ev in &trace {
        let d = ev.data_type.index();
        let units = shapes[d].0 as usize;
        let slot = slots[d].iter().position(|t| *t == ev.tile).unwrap();
        let coords: &[PhysicalCoord] = &layout.regions[d].coords[slot * units..(slot + 1) * units];
        let counts = match scope {
            RowStateScope::PerTile => classify_trace(coords, &arch.variant),
            RowStateScope::Layer => {
                let mut c = AccessCounts::default();
                for coord in coords {
                    *c.get_mut(tracker.access(coord)) += 1;
                }
                c
            }
        };
        per_tile.push(counts);
    }
    Ok(PointEvaluation {
        counts: per_tile.iter().copied().sum(),
        edp: crate::edp::layer_edp(&per_tile, &arch.profile),
        traffic: crate::workload::count_dram_traffic(&trace, unit_bytes),
    })
}

/// Search-space and reporting options of [`explore`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploreOptions {
    pub granularity: Granularity,
    pub schedules: Vec<ScheduleScheme>,
    pub policies: Vec<MappingPolicy>,
    /// Keep every evaluated point, not just the winners.
    pub keep_full_sweep: bool,
    /// Report layers without feasible partitions instead of failing.
    pub skip_infeasible_layers: bool,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        ExploreOptions {
            granularity: Granularity::Divisors,
            schedules: ScheduleScheme::ALL.to_vec(),
            policies: MappingPolicy::PRESETS.to_vec(),
            keep_full_sweep: false,
            skip_infeasible_layers: false,
        }
    }
}

/// An evaluated point, with the schedule as requested and as resolved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub layer: usize,
    pub requested: ScheduleScheme,
    pub point: DesignPoint,
    pub eval: PointEvaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerWinner {
    pub layer: usize,
    pub layer_name: String,
    pub requested: ScheduleScheme,
    pub point: DesignPoint,
    pub eval: PointEvaluation,
    /// Feasible points evaluated for this layer.
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedLayer {
    pub layer: usize,
    pub layer_name: String,
    pub reason: String,
}

/// Outcome of the exploration for one architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchOutcome {
    pub arch: String,
    pub winners: Vec<LayerWinner>,
    pub skipped: Vec<SkippedLayer>,
    pub total: NetworkEdp,
    /// Every evaluated point when `keep_full_sweep` is set, else empty.
    pub sweep: Vec<SweepRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DseResult {
    pub per_arch: Vec<ArchOutcome>,
    /// Index into `per_arch` of the lowest network EDP (first on ties).
    pub best_arch: Option<usize>,
}

/// Points of one layer in search order: partitions ascending, then the
/// requested schedules, then the policies.
pub fn layer_points(
    layer: &LayerShape,
    buffers: &BufferConfig,
    unit_bytes: u64,
    options: &ExploreOptions,
) -> Result<Vec<(ScheduleScheme, DesignPoint)>> {
    let partitions = enumerate_partitions(layer, buffers, options.granularity)?;
    let mut points =
        Vec::with_capacity(partitions.len() * options.schedules.len() * options.policies.len());
    for tiling in partitions {
        for &requested in &options.schedules {
            let schedule = requested
                .fixed()
                .unwrap_or_else(|| select_adaptive_schedule(layer, &tiling, unit_bytes));
            for &mapping in &options.policies {
                points.push((
                    requested,
                    DesignPoint {
                        tiling,
                        schedule,
                        mapping,
                    },
                ));
            }
        }
    }
    Ok(points)
}

fn explore_layer(
    index: usize,
    layer: &LayerShape,
    buffers: &BufferConfig,
    arch: &ArchConfig,
    options: &ExploreOptions,
) -> Result<(LayerWinner, Vec<SweepRow>)> {
    let points = layer_points(layer, buffers, arch.unit_bytes(), options)?;
    let evals: Vec<Result<PointEvaluation>> = points
        .par_iter()
        .map(|(_, p)| evaluate_point(layer, buffers, p, arch))
        .collect();

    let mut winner: Option<LayerWinner> = None;
    let mut sweep = Vec::new();
    for ((requested, point), eval) in points.into_iter().zip(evals) {
        let eval = eval?;
        if options.keep_full_sweep {
            sweep.push(SweepRow {
                layer: index,
                requested,
                point,
                eval,
            });
        }
        // Ties go to the later point.
        if winner
            .as_ref()
            .is_none_or(|w| eval.edp.edp <= w.eval.edp.edp)
        {
            let points = winner.as_ref().map_or(0, |w| w.points);
            winner = Some(LayerWinner {
                layer: index,
                layer_name: layer.name.clone(),
                requested,
                point,
                eval,
                points,
            });
        }
        if let Some(w) = winner.as_mut() {
            w.points += 1;
        }
    }
    let winner = winner.ok_or_else(|| {
        Error::Config(format!(
            "layer {}: empty schedule or policy selection",
            layer.name
        ))
    })?;
    Ok((winner, sweep))
}

/// Runs the exhaustive search for every architecture.
pub fn explore(
    network: &[LayerShape],
    buffers: &BufferConfig,
    archs: &[ArchConfig],
    options: &ExploreOptions,
) -> Result<DseResult> {
    if network.is_empty() || archs.is_empty() {
        return Err(Error::Config(
            "network and architecture list must be non-empty".into(),
        ));
    }
    if options.schedules.is_empty() || options.policies.is_empty() {
        return Err(Error::Config(
            "schedule and policy selections must be non-empty".into(),
        ));
    }
    let mut per_arch = Vec::with_capacity(archs.len());
    for arch in archs {
        let mut outcome = ArchOutcome {
            arch: arch.name.clone(),
            winners: Vec::new(),
            skipped: Vec::new(),
            total: NetworkEdp::default(),
            sweep: Vec::new(),
        };
        for (index, layer) in network.iter().enumerate() {
            match explore_layer(index, layer, buffers, arch, options) {
                Ok((winner, sweep)) => {
                    outcome.winners.push(winner);
                    outcome.sweep.extend(sweep);
                }
                Err(e @ Error::EmptyPartitionSpace { .. }) if options.skip_infeasible_layers => {
                    outcome.skipped.push(SkippedLayer {
                        layer: index,
                        layer_name: layer.name.clone(),
                        reason: e.to_string(),
                    });
                }
                Err(e) => return Err(e),
            }
        }
        let results: Vec<EdpResult> = outcome.winners.iter().map(|w| w.eval.edp).collect();
        outcome.total = network_edp(&results);
        per_arch.push(outcome);
    }
    let best_arch = per_arch
        .iter()
        .enumerate()
        .filter(|(_, o)| !o.winners.is_empty())
        .min_by(|a, b| a.1.total.total_edp.total_cmp(&b.1.total.total_edp))
        .map(|(i, _)| i);
    Ok(DseResult {
        per_arch,
        best_arch,
    })
}

/// One cell of the layer x policy table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyCell {
    pub layer: usize,
    pub mapping: MappingPolicy,
    /// Best point for this policy (ties to the later partition).
    pub point: DesignPoint,
    pub eval: PointEvaluation,
}

/// Best EDP of every (layer, policy) pair under one architecture and
/// schedule. Cells are ordered by layer, then policy.
pub fn compare_policies(
    network: &[LayerShape],
    buffers: &BufferConfig,
    arch: &ArchConfig,
    schedule: ScheduleScheme,
    policies: &[MappingPolicy],
    granularity: Granularity,
) -> Result<Vec<PolicyCell>> {
    let mut cells = Vec::with_capacity(network.len() * policies.len());
    for (index, layer) in network.iter().enumerate() {
        let options = ExploreOptions {
            granularity,
            schedules: vec![schedule],
            policies: policies.to_vec(),
            keep_full_sweep: true,
            skip_infeasible_layers: false,
        };
        let (_, sweep) = explore_layer(index, layer, buffers, arch, &options)?;
        for &mapping in policies {
            let best = sweep
                .iter()
                .filter(|r| r.point.mapping == mapping)
                .reduce(|best, r| {
                    if r.eval.edp.edp <= best.eval.edp.edp {
                        r
                    } else {
                        best
                    }
                })
                .expect("every policy has at least one point");
            cells.push(PolicyCell {
                layer: index,
                mapping,
                point: best.point,
                eval: best.eval,
            });
        }
    }
    Ok(cells)
}

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{tile_byte_sizes, DataType, LayerShape, Reuse, TileBytes, TilingConfig};

const M: usize = 0;
const C: usize = 1;
const H: usize = 2;
const W: usize = 3;

/// Tile loops each data type's index depends on.
fn loops_of(data_type: DataType) -> &'static [usize] {
    match data_type {
        DataType::Ifms => &[C, H, W],
        DataType::Wghs => &[M, C],
        DataType::Ofms => &[M, H, W],
    }
}

/// Outer-to-inner loop order: the reused type's loops first, the rest in
/// m, c, h, w order.
fn loop_order(reuse: Reuse) -> [usize; 4] {
    match reuse {
        Reuse::Ifms => [C, H, W, M],
        Reuse::Wghs => [M, C, H, W],
        Reuse::Ofms => [M, H, W, C],
    }
}

/// Order in which the data types are serviced inside one loop iteration.
fn service_order(reuse: Reuse) -> [DataType; 3] {
    match reuse {
        Reuse::Ifms => [DataType::Ifms, DataType::Wghs, DataType::Ofms],
        Reuse::Wghs => [DataType::Wghs, DataType::Ifms, DataType::Ofms],
        Reuse::Ofms => [DataType::Ofms, DataType::Ifms, DataType::Wghs],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Read,
    Write,
}

/// Tile coordinate over the `(m, c, h, w)` tile loops. Loops a data type
/// does not depend on are zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TileIndex {
    pub m: u32,
    pub c: u32,
    pub h: u32,
    pub w: u32,
}

impl TileIndex {
    fn of(data_type: DataType, iter: &[u32; 4]) -> Self {
        let mut idx = [0u32; 4];
        for &l in loops_of(data_type) {
            idx[l] = iter[l];
        }
        TileIndex {
            m: idx[M],
            c: idx[C],
            h: idx[H],
            w: idx[W],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TileEvent {
    pub data_type: DataType,
    pub tile: TileIndex,
    pub direction: Direction,
    pub n_bytes: u64,
}

/// Ordered DRAM tile transfers of one layer under a concrete schedule.
///
/// Ifms and wghs tiles are read whenever they replace the resident tile.
/// An ofms tile is written back when evicted (and at the end of the layer)
/// and read back first if it was resident before, carrying partial sums.
pub fn generate_tile_trace(
    layer: &LayerShape,
    tiling: &TilingConfig,
    reuse: Reuse,
) -> Vec<TileEvent> {
    let bytes = tile_byte_sizes(layer, tiling);
    let trips = tiling.trip_counts(layer);
    let order = loop_order(reuse);
    let services = service_order(reuse);

    let mut resident: [Option<TileIndex>; 3] = [None; 3];
    let mut ofms_seen = HashSet::new();
    let mut events = Vec::new();
    let mut iter = [0u32; 4];
    loop {
        for data_type in services {
            let tile = TileIndex::of(data_type, &iter);
            let slot = &mut resident[data_type.index()];
            if *slot == Some(tile) {
                continue;
            }
            let n_bytes = bytes.get(data_type);
            if data_type == DataType::Ofms {
                if let Some(old) = *slot {
                    events.push(TileEvent {
                        data_type,
                        tile: old,
                        direction: Direction::Write,
                        n_bytes,
                    });
                }
                if !ofms_seen.insert(tile) {
                    events.push(TileEvent {
                        data_type,
                        tile,
                        direction: Direction::Read,
                        n_bytes,
                    });
                }
            } else {
                events.push(TileEvent {
                    data_type,
                    tile,
                    direction: Direction::Read,
                    n_bytes,
                });
            }
            *slot = Some(tile);
        }

        // Odometer step, innermost loop fastest.
        let mut level = 4;
        loop {
            if level == 0 {
                if let Some(old) = resident[DataType::Ofms.index()] {
                    events.push(TileEvent {
                        data_type: DataType::Ofms,
                        tile: old,
                        direction: Direction::Write,
                        n_bytes: bytes.ofms,
                    });
                }
                return events;
            }
            level -= 1;
            let l = order[level];
            iter[l] += 1;
            if iter[l] < trips[l] {
                break;
            }
            iter[l] = 0;
        }
    }
}

/// Closed-form view of a schedule: every tile of a data type becomes
/// resident the same number of times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchPlan {
    /// Distinct tiles per data type, indexed by [`DataType::index`].
    pub tiles: [u64; 3],
    /// Residencies of each tile per data type.
    pub residencies: [u64; 3],
}

impl FetchPlan {
    pub fn new(layer: &LayerShape, tiling: &TilingConfig, reuse: Reuse) -> Self {
        let trips = tiling.trip_counts(layer).map(u64::from);
        let order = loop_order(reuse);
        let mut tiles = [1u64; 3];
        let mut residencies = [1u64; 3];
        for data_type in DataType::ALL {
            let own = loops_of(data_type);
            tiles[data_type.index()] = own.iter().map(|&l| trips[l]).product();
            // The tile changes on every step of a loop at or outside the
            // innermost non-trivial loop it depends on.
            let innermost = order.iter().rposition(|l| own.contains(l) && trips[*l] > 1);
            if let Some(pos) = innermost {
                residencies[data_type.index()] = order[..=pos]
                    .iter()
                    .filter(|l| !own.contains(l))
                    .map(|&l| trips[l])
                    .product();
            }
        }
        FetchPlan { tiles, residencies }
    }

    pub fn read_events(&self, data_type: DataType) -> u64 {
        let i = data_type.index();
        match data_type {
            DataType::Ofms => self.tiles[i] * (self.residencies[i] - 1),
            _ => self.tiles[i] * self.residencies[i],
        }
    }

    pub fn write_events(&self, data_type: DataType) -> u64 {
        let i = data_type.index();
        match data_type {
            DataType::Ofms => self.tiles[i] * self.residencies[i],
            _ => 0,
        }
    }

    /// Transfers per distinct tile (reads plus writes).
    pub fn events_per_tile(&self, data_type: DataType) -> u64 {
        let r = self.residencies[data_type.index()];
        match data_type {
            DataType::Ofms => 2 * r - 1,
            _ => r,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeTraffic {
    pub read_events: u64,
    pub write_events: u64,
    pub read_bytes: u64,
    pub write_bytes: u64,
    /// DRAM accesses: each transfer rounded up to whole access units.
    pub accesses: u64,
}

impl TypeTraffic {
    pub fn bytes(&self) -> u64 {
        self.read_bytes + self.write_bytes
    }
}

/// DRAM traffic of a layer, per data type.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficSummary {
    pub per_type: [TypeTraffic; 3],
}

impl TrafficSummary {
    pub fn get(&self, data_type: DataType) -> &TypeTraffic {
        &self.per_type[data_type.index()]
    }

    pub fn total_accesses(&self) -> u64 {
        self.per_type.iter().map(|t| t.accesses).sum()
    }

    pub fn total_bytes(&self) -> u64 {
        self.per_type.iter().map(TypeTraffic::bytes).sum()
    }

    /// Same totals as `count_dram_traffic(generate_tile_trace(..))`, without
    /// materialising the trace.
    pub fn from_plan(plan: &FetchPlan, bytes: &TileBytes, access_unit_bytes: u64) -> Self {
        let mut out = TrafficSummary::default();
        for data_type in DataType::ALL {
            let n = bytes.get(data_type);
            let reads = plan.read_events(data_type);
            let writes = plan.write_events(data_type);
            out.per_type[data_type.index()] = TypeTraffic {
                read_events: reads,
                write_events: writes,
                read_bytes: reads * n,
                write_bytes: writes * n,
                accesses: (reads + writes) * n.div_ceil(access_unit_bytes),
            };
        }
        out
    }
}

pub fn count_dram_traffic(trace: &[TileEvent], access_unit_bytes: u64) -> TrafficSummary {
    let mut out = TrafficSummary::default();
    for ev in trace {
        let t = &mut out.per_type[ev.data_type.index()];
        match ev.direction {
            Direction::Read => {
                t.read_events += 1;
                t.read_bytes += ev.n_bytes;
            }
            Direction::Write => {
                t.write_events += 1;
                t.write_bytes += ev.n_bytes;
            }
        }
        t.accesses += ev.n_bytes.div_ceil(access_unit_bytes);
    }
    out
}

/// Concrete schedule with the fewest DRAM accesses; ties go to the first of
/// ifms, wghs, ofms.
pub fn select_adaptive_schedule(
    layer: &LayerShape,
    tiling: &TilingConfig,
    access_unit_bytes: u64,
) -> Reuse {
    let bytes = tile_byte_sizes(layer, tiling);
    let mut best = Reuse::Ifms;
    let mut best_accesses = u64::MAX;
    for reuse in Reuse::ALL {
        let plan = FetchPlan::new(layer, tiling, reuse);
        let accesses = TrafficSummary::from_plan(&plan, &bytes, access_unit_bytes).total_accesses();
        if accesses < best_accesses {
            best = reuse;
            best_accesses = accesses;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use proptest::prelude::*;

    use super::*;

    fn layer_2c() -> LayerShape {
        LayerShape::conv("two-c", 4, (3, 3), 2, (3, 3), 1).unwrap()
    }

    fn summary(events: &[TileEvent]) -> Vec<(DataType, Direction)> {
        events.iter().map(|e| (e.data_type, e.direction)).collect()
    }

    #[test]
    fn single_tile_layer_has_three_events() {
        let l = LayerShape::conv("one", 2, (4, 4), 3, (3, 3), 1).unwrap();
        let t = TilingConfig::full(&l);
        use DataType::*;
        use Direction::*;
        let expect = [
            (Reuse::Ifms, vec![(Ifms, Read), (Wghs, Read), (Ofms, Write)]),
            (Reuse::Wghs, vec![(Wghs, Read), (Ifms, Read), (Ofms, Write)]),
            (Reuse::Ofms, vec![(Ifms, Read), (Wghs, Read), (Ofms, Write)]),
        ];
        for (reuse, events) in expect {
            assert_eq!(summary(&generate_tile_trace(&l, &t, reuse)), events);
        }
    }

    #[test]
    fn two_c_tiles_ofms_reuse() {
        // Loop order m, h, w, c with only c iterating twice: the ofms tile
        // stays resident, ifms and wghs stream once per c tile.
        let l = layer_2c();
        let t = TilingConfig::new(&l, 2, 2, 1, 1).unwrap();
        let trace = generate_tile_trace(&l, &t, Reuse::Ofms);
        use DataType::*;
        use Direction::*;
        assert_eq!(
            summary(&trace),
            vec![
                (Ifms, Read),
                (Wghs, Read),
                (Ifms, Read),
                (Wghs, Read),
                (Ofms, Write)
            ]
        );
        let b = tile_byte_sizes(&l, &t);
        let traffic = count_dram_traffic(&trace, 1);
        assert_eq!(traffic.total_bytes(), 2 * b.ifms + 2 * b.wghs + b.ofms);
    }

    #[test]
    fn wghs_reuse_round_trips_partial_sums() {
        // c = 2 tiles, w = 2 tiles, loop order m, c, h, w. Hand unrolled:
        // (c0,w0) R I00 R W0 (new O0)
        // (c0,w1) R I01 W O0 (new O1)
        // (c1,w0) R W1 R I10 W O1 R O0
        // (c1,w1) R I11 W O0 R O1
        // end     W O1
        let l = LayerShape::conv("rt", 4, (3, 4), 2, (3, 3), 1).unwrap();
        let t = TilingConfig::new(&l, 2, 2, 1, 1).unwrap();
        assert_eq!(t.trip_counts(&l), [1, 2, 1, 2]);
        let trace = generate_tile_trace(&l, &t, Reuse::Wghs);
        use DataType::*;
        use Direction::*;
        assert_eq!(
            summary(&trace),
            vec![
                (Wghs, Read),
                (Ifms, Read),
                (Ifms, Read),
                (Ofms, Write),
                (Wghs, Read),
                (Ifms, Read),
                (Ofms, Write),
                (Ofms, Read),
                (Ifms, Read),
                (Ofms, Write),
                (Ofms, Read),
                (Ofms, Write),
            ]
        );
        let traffic = count_dram_traffic(&trace, 1);
        assert_eq!(traffic.get(Wghs).read_events, 2);
        assert_eq!(traffic.get(Ofms).write_events, 4);
        assert_eq!(traffic.get(Ofms).read_events, 2);
        // Every ofms write is an eviction (or the final flush).
        let plan = FetchPlan::new(&l, &t, Reuse::Wghs);
        assert_eq!(plan.residencies[Ofms.index()], 2);
    }

    #[test]
    fn traffic_counts_round_up_to_access_units() {
        assert_eq!(count_dram_traffic(&[], 8), TrafficSummary::default());
        let ev = TileEvent {
            data_type: DataType::Ifms,
            tile: TileIndex {
                m: 0,
                c: 0,
                h: 0,
                w: 0,
            },
            direction: Direction::Read,
            n_bytes: 64,
        };
        assert_eq!(count_dram_traffic(&[ev], 8).total_accesses(), 8);
        let odd = TileEvent { n_bytes: 65, ..ev };
        assert_eq!(count_dram_traffic(&[odd], 8).total_accesses(), 9);
    }

    #[test]
    fn adaptive_single_tile_ties_to_ifms() {
        let l = LayerShape::conv("one", 2, (4, 4), 3, (3, 3), 1).unwrap();
        assert_eq!(
            select_adaptive_schedule(&l, &TilingConfig::full(&l), 8),
            Reuse::Ifms
        );
    }

    fn accesses_by_trace(l: &LayerShape, t: &TilingConfig, unit: u64) -> [u64; 3] {
        Reuse::ALL.map(|r| count_dram_traffic(&generate_tile_trace(l, t, r), unit).total_accesses())
    }

    #[test]
    fn adaptive_prefers_ofms_with_many_c_tiles_and_tiny_weights() {
        // 1x1 filters, 16 c tiles, 4 spatial tiles: ofms-reuse avoids
        // re-reading partial sums.
        let l = LayerShape::conv("deep", 16, (8, 8), 4, (1, 1), 1).unwrap();
        let t = TilingConfig::new(&l, 4, 1, 4, 4).unwrap();
        let acc = accesses_by_trace(&l, &t, 1);
        assert!(acc[2] < acc[0] && acc[2] < acc[1], "{acc:?}");
        assert_eq!(select_adaptive_schedule(&l, &t, 1), Reuse::Ofms);
    }

    #[test]
    fn adaptive_prefers_wghs_with_huge_weights() {
        let l = LayerShape::conv("fat", 8, (6, 6), 64, (3, 3), 1).unwrap();
        let t = TilingConfig::new(&l, 8, 8, 2, 2).unwrap();
        assert_eq!(t.trip_counts(&l)[1], 1);
        let acc = accesses_by_trace(&l, &t, 1);
        assert!(acc[1] <= acc[0] && acc[1] <= acc[2], "{acc:?}");
        assert_eq!(select_adaptive_schedule(&l, &t, 1), Reuse::Wghs);
    }

    fn small_case() -> impl Strategy<Value = (LayerShape, TilingConfig, u64)> {
        (
            1u32..=3,
            1u32..=3,
            1u32..=3,
            1u32..=3,
            1u32..=3,
            1u32..=3,
            1u32..=2,
            1u32..=3,
        )
            .prop_flat_map(|(nm, nc, nh, nw, tm, tc, stride, p)| {
                (
                    Just((nm, nc, nh, nw, tm, tc, stride, p)),
                    1u32..=2,
                    1u32..=2,
                    1u64..=16,
                )
            })
            .prop_map(|((nm, nc, nh, nw, tm, tc, stride, p), th, tw, unit)| {
                let h_out = nh * th;
                let w_out = nw * tw;
                let h_in = (h_out - 1) * stride + p;
                let w_in = (w_out - 1) * stride + p;
                let l = LayerShape::conv("prop", nc * tc, (h_in, w_in), nm * tm, (p, p), stride)
                    .unwrap();
                let t = TilingConfig::new(&l, tm, tc, th, tw).unwrap();
                (l, t, unit)
            })
    }

    proptest! {
        #[test]
        fn plan_matches_explicit_trace((l, t, unit) in small_case()) {
            let bytes = tile_byte_sizes(&l, &t);
            for reuse in Reuse::ALL {
                let trace = generate_tile_trace(&l, &t, reuse);
                let plan = FetchPlan::new(&l, &t, reuse);
                prop_assert_eq!(count_dram_traffic(&trace, unit), TrafficSummary::from_plan(&plan, &bytes, unit));
            }
        }

        #[test]
        fn trace_invariants((l, t, unit) in small_case()) {
            let bytes = tile_byte_sizes(&l, &t);
            let trips = t.trip_counts(&l).map(u64::from);
            for reuse in Reuse::ALL {
                let trace = generate_tile_trace(&l, &t, reuse);
                prop_assert_eq!(&trace, &generate_tile_trace(&l, &t, reuse));
                prop_assert!(trace.iter().all(|e| e.n_bytes > 0));

                // Each ofms write is preceded by at most one read of that tile
                // since its previous write.
                let mut pending: HashMap<TileIndex, u32> = HashMap::new();
                for e in trace.iter().filter(|e| e.data_type == DataType::Ofms) {
                    let n = pending.entry(e.tile).or_default();
                    match e.direction {
                        Direction::Read => { *n += 1; prop_assert!(*n <= 1); }
                        Direction::Write => *n = 0,
                    }
                }

                // Lower bound: every used input, every weight and every output
                // moves at least once.
                let traffic = count_dram_traffic(&trace, unit);
                // Rows (columns) touched by some filter window; windows skip
                // input when stride > p.
                let touched = |out: u32, f: u32| u64::from(((out - 1) * l.stride + f).min(out * f));
                let used_in = u64::from(l.c_in) * touched(l.h_out, l.p) * touched(l.w_out, l.q);
                prop_assert!(traffic.get(DataType::Ifms).read_bytes >= used_in);
                prop_assert!(traffic.get(DataType::Wghs).read_bytes >= l.wghs_bytes());
                prop_assert!(traffic.get(DataType::Ofms).write_bytes >= l.ofms_bytes());

                // The resident type is fetched exactly once per distinct tile.
                let rt = reuse.data_type();
                let distinct: u64 = match rt {
                    DataType::Ifms => trips[1] * trips[2] * trips[3],
                    DataType::Wghs => trips[0] * trips[1],
                    DataType::Ofms => trips[0] * trips[2] * trips[3],
                };
                let fetched = match rt {
                    DataType::Ofms => traffic.get(rt).write_events,
                    _ => traffic.get(rt).read_events,
                };
                prop_assert_eq!(fetched, distinct);
                if rt == DataType::Ofms {
                    prop_assert_eq!(traffic.get(rt).read_events, 0);
                }
                prop_assert_eq!(traffic.get(rt).bytes(), distinct * bytes.get(rt));
            }
        }

        #[test]
        fn adaptive_is_minimum((l, t, unit) in small_case()) {
            let acc = accesses_by_trace(&l, &t, unit);
            let chosen = select_adaptive_schedule(&l, &t, unit);
            let chosen_acc = acc[chosen as usize];
            prop_assert_eq!(chosen_acc, *acc.iter().min().unwrap());
            // First minimum in ifms, wghs, ofms order.
            prop_assert_eq!(acc.iter().position(|&a| a == chosen_acc).unwrap(), chosen as usize);
        }

        #[test]
        fn full_tiling_moves_each_tensor_once((l, _t, unit) in small_case()) {
            let full = TilingConfig::full(&l);
            let bytes = tile_byte_sizes(&l, &full);
            for reuse in Reuse::ALL {
                let traffic = count_dram_traffic(&generate_tile_trace(&l, &full, reuse), unit);
                prop_assert_eq!(traffic.total_bytes(), bytes.ifms + bytes.wghs + bytes.ofms);
                prop_assert_eq!(bytes.wghs, l.wghs_bytes());
                prop_assert_eq!(bytes.ofms, l.ofms_bytes());
            }
        }
    }
}

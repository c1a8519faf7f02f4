//! Convolution layers, tile partitionings and the DRAM tile traffic a
//! schedule produces.
//!
//! A layer is processed as a nest of four tile loops (output channels `m`,
//! input channels `c`, output rows `h`, output columns `w`). Each iteration
//! needs one ifms tile `(c, h, w)`, one wghs tile `(m, c)` and one ofms tile
//! `(m, h, w)`; the on-chip buffers hold exactly one tile per data type, so a
//! tile is fetched whenever the iteration's tile index differs from the
//! resident one.

mod partition;
mod trace;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use partition::{enumerate_partitions, tile_byte_sizes, Granularity, TileBytes};
pub use trace::{
    count_dram_traffic, generate_tile_trace, select_adaptive_schedule, Direction, FetchPlan,
    TileEvent, TileIndex, TrafficSummary, TypeTraffic,
};

/// The three tensors moved between DRAM and the accelerator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DataType {
    Ifms,
    Wghs,
    Ofms,
}

impl DataType {
    pub const ALL: [DataType; 3] = [DataType::Ifms, DataType::Wghs, DataType::Ofms];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            DataType::Ifms => "ifms",
            DataType::Wghs => "wghs",
            DataType::Ofms => "ofms",
        }
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Shape of one convolution (or fully-connected) layer.
///
/// Convolutions are unpadded; padded layers are described with pre-padded
/// `h_in`/`w_in`. A fully-connected layer is a convolution whose filter
/// covers the whole input (`p = h_in`, `q = w_in`, one output pixel).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerShape {
    pub name: String,
    pub c_in: u32,
    pub h_in: u32,
    pub w_in: u32,
    pub m_out: u32,
    pub p: u32,
    pub q: u32,
    pub stride: u32,
    pub h_out: u32,
    pub w_out: u32,
    pub element_bytes: u32,
    /// Fraction of weight bytes actually stored (1.0 for dense layers).
    pub weight_density: f64,
}

impl LayerShape {
    /// Builds a validated convolution layer with 1-byte elements.
    pub fn conv(
        name: impl Into<String>,
        c_in: u32,
        (h_in, w_in): (u32, u32),
        m_out: u32,
        (p, q): (u32, u32),
        stride: u32,
    ) -> Result<Self> {
        derive_output_dims(LayerShape {
            name: name.into(),
            c_in,
            h_in,
            w_in,
            m_out,
            p,
            q,
            stride,
            h_out: 0,
            w_out: 0,
            element_bytes: 1,
            weight_density: 1.0,
        })
    }

    /// Fully-connected layer folded into a 1x1-output convolution.
    pub fn fully_connected(
        name: impl Into<String>,
        c_in: u32,
        (h_in, w_in): (u32, u32),
        m_out: u32,
    ) -> Result<Self> {
        Self::conv(name, c_in, (h_in, w_in), m_out, (h_in, w_in), 1)
    }

    pub fn with_element_bytes(mut self, element_bytes: u32) -> Result<Self> {
        self.element_bytes = element_bytes;
        derive_output_dims(self)
    }

    pub fn with_weight_density(mut self, density: f64) -> Result<Self> {
        self.weight_density = density;
        derive_output_dims(self)
    }

    pub fn ifms_bytes(&self) -> u64 {
        u64::from(self.c_in) * u64::from(self.h_in) * u64::from(self.w_in) * self.elem()
    }

    pub fn wghs_bytes(&self) -> u64 {
        let raw = u64::from(self.m_out)
            * u64::from(self.c_in)
            * u64::from(self.p)
            * u64::from(self.q)
            * self.elem();
        scale_bytes(raw, self.weight_density)
    }

    pub fn ofms_bytes(&self) -> u64 {
        u64::from(self.m_out) * u64::from(self.h_out) * u64::from(self.w_out) * self.elem()
    }

    pub(crate) fn elem(&self) -> u64 {
        u64::from(self.element_bytes)
    }

    fn invalid(&self, reason: impl Into<String>) -> Error {
        Error::InvalidLayer {
            layer: self.name.clone(),
            reason: reason.into(),
        }
    }
}

/// Effective size of `raw` bytes stored at `density`, never below one byte.
pub(crate) fn scale_bytes(raw: u64, density: f64) -> u64 {
    if density >= 1.0 {
        raw
    } else {
        ((raw as f64 * density).ceil() as u64).max(1)
    }
}

/// Validates `layer` and fills `h_out`/`w_out` with the unpadded output size.
pub fn derive_output_dims(mut layer: LayerShape) -> Result<LayerShape> {
    for (value, what) in [
        (layer.c_in, "c_in"),
        (layer.h_in, "h_in"),
        (layer.w_in, "w_in"),
        (layer.m_out, "m_out"),
        (layer.p, "p"),
        (layer.q, "q"),
        (layer.stride, "stride"),
        (layer.element_bytes, "element_bytes"),
    ] {
        if value == 0 {
            return Err(layer.invalid(format!("{what} must be at least 1")));
        }
    }
    if layer.p > layer.h_in {
        return Err(layer.invalid(format!(
            "filter height {} exceeds input height {}",
            layer.p, layer.h_in
        )));
    }
    if layer.q > layer.w_in {
        return Err(layer.invalid(format!(
            "filter width {} exceeds input width {}",
            layer.q, layer.w_in
        )));
    }
    if !(layer.weight_density > 0.0 && layer.weight_density <= 1.0) {
        return Err(layer.invalid(format!(
            "weight_density {} outside (0, 1]",
            layer.weight_density
        )));
    }
    layer.h_out = (layer.h_in - layer.p) / layer.stride + 1;
    layer.w_out = (layer.w_in - layer.q) / layer.stride + 1;
    Ok(layer)
}

/// Tile step sizes of the four outer loops. `t_p`/`t_q` always equal the
/// filter size: weight tiles are never split spatially.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TilingConfig {
    pub t_m: u32,
    pub t_c: u32,
    pub t_h: u32,
    pub t_w: u32,
    pub t_p: u32,
    pub t_q: u32,
}

impl TilingConfig {
    /// Validated tiling. Every step must divide its dimension so that all
    /// tiles of a data type have the same size.
    pub fn new(layer: &LayerShape, t_m: u32, t_c: u32, t_h: u32, t_w: u32) -> Result<Self> {
        for (t, dim, what) in [
            (t_m, layer.m_out, "t_m"),
            (t_c, layer.c_in, "t_c"),
            (t_h, layer.h_out, "t_h"),
            (t_w, layer.w_out, "t_w"),
        ] {
            if t == 0 || t > dim {
                return Err(Error::InvalidTiling {
                    layer: layer.name.clone(),
                    reason: format!("{what}={t} outside 1..={dim}"),
                });
            }
            if dim % t != 0 {
                return Err(Error::InvalidTiling {
                    layer: layer.name.clone(),
                    reason: format!("{what}={t} does not divide {dim}"),
                });
            }
        }
        Ok(Self::unchecked(layer, t_m, t_c, t_h, t_w))
    }

    /// The whole layer as one tile per data type.
    pub fn full(layer: &LayerShape) -> Self {
        Self::unchecked(layer, layer.m_out, layer.c_in, layer.h_out, layer.w_out)
    }

    pub(crate) fn unchecked(layer: &LayerShape, t_m: u32, t_c: u32, t_h: u32, t_w: u32) -> Self {
        TilingConfig {
            t_m,
            t_c,
            t_h,
            t_w,
            t_p: layer.p,
            t_q: layer.q,
        }
    }

    /// Trip counts of the tile loops `[m, c, h, w]`.
    pub fn trip_counts(&self, layer: &LayerShape) -> [u32; 4] {
        [
            layer.m_out / self.t_m,
            layer.c_in / self.t_c,
            layer.h_out / self.t_h,
            layer.w_out / self.t_w,
        ]
    }
}

/// Capacities of the three on-chip buffers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BufferConfig {
    pub ib_bytes: u64,
    pub wb_bytes: u64,
    pub ob_bytes: u64,
}

impl BufferConfig {
    pub fn new(ib_bytes: u64, wb_bytes: u64, ob_bytes: u64) -> Result<Self> {
        if ib_bytes == 0 || wb_bytes == 0 || ob_bytes == 0 {
            return Err(Error::InvalidBuffers(format!(
                "capacities must be positive (iB={ib_bytes}, wB={wb_bytes}, oB={ob_bytes})"
            )));
        }
        Ok(BufferConfig {
            ib_bytes,
            wb_bytes,
            ob_bytes,
        })
    }

    /// 64 KB per buffer.
    pub fn default_accelerator() -> Self {
        BufferConfig {
            ib_bytes: 64 * 1024,
            wb_bytes: 64 * 1024,
            ob_bytes: 64 * 1024,
        }
    }

    pub fn capacity(&self, data_type: DataType) -> u64 {
        match data_type {
            DataType::Ifms => self.ib_bytes,
            DataType::Wghs => self.wb_bytes,
            DataType::Ofms => self.ob_bytes,
        }
    }
}

/// Which data type stays resident while the others stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Reuse {
    Ifms,
    Wghs,
    Ofms,
}

impl Reuse {
    /// Tie-break order of adaptive selection.
    pub const ALL: [Reuse; 3] = [Reuse::Ifms, Reuse::Wghs, Reuse::Ofms];

    pub fn data_type(self) -> DataType {
        match self {
            Reuse::Ifms => DataType::Ifms,
            Reuse::Wghs => DataType::Wghs,
            Reuse::Ofms => DataType::Ofms,
        }
    }

    pub fn scheme(self) -> ScheduleScheme {
        match self {
            Reuse::Ifms => ScheduleScheme::IfmsReuse,
            Reuse::Wghs => ScheduleScheme::WghsReuse,
            Reuse::Ofms => ScheduleScheme::OfmsReuse,
        }
    }
}

impl fmt::Display for Reuse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.scheme().fmt(f)
    }
}

/// Scheduling scheme as requested by the user; `AdaptiveReuse` is resolved
/// per layer and tiling with [`select_adaptive_schedule`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScheduleScheme {
    IfmsReuse,
    WghsReuse,
    OfmsReuse,
    AdaptiveReuse,
}

impl ScheduleScheme {
    pub const ALL: [ScheduleScheme; 4] = [
        ScheduleScheme::IfmsReuse,
        ScheduleScheme::WghsReuse,
        ScheduleScheme::OfmsReuse,
        ScheduleScheme::AdaptiveReuse,
    ];

    pub fn fixed(self) -> Option<Reuse> {
        match self {
            ScheduleScheme::IfmsReuse => Some(Reuse::Ifms),
            ScheduleScheme::WghsReuse => Some(Reuse::Wghs),
            ScheduleScheme::OfmsReuse => Some(Reuse::Ofms),
            ScheduleScheme::AdaptiveReuse => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScheduleScheme::IfmsReuse => "ifms-reuse",
            ScheduleScheme::WghsReuse => "wghs-reuse",
            ScheduleScheme::OfmsReuse => "ofms-reuse",
            ScheduleScheme::AdaptiveReuse => "adaptive-reuse",
        }
    }

    /// Accepts `ifms-reuse`, `ifms`, `adaptive`, ... (case-insensitive).
    pub fn parse(text: &str) -> Result<Self> {
        let lower = text.trim().to_ascii_lowercase();
        let stem = lower.strip_suffix("-reuse").unwrap_or(&lower);
        match stem {
            "ifms" => Ok(ScheduleScheme::IfmsReuse),
            "wghs" => Ok(ScheduleScheme::WghsReuse),
            "ofms" => Ok(ScheduleScheme::OfmsReuse),
            "adaptive" => Ok(ScheduleScheme::AdaptiveReuse),
            _ => Err(Error::UnknownName(text.to_string())),
        }
    }
}

impl fmt::Display for ScheduleScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

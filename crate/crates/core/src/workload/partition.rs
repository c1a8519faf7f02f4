use serde::{Deserialize, Serialize};

use super::{scale_bytes, BufferConfig, DataType, LayerShape, TilingConfig};
use crate::{Error, Result};

/// Bytes of one tile of each data type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileBytes {
    pub ifms: u64,
    pub wghs: u64,
    pub ofms: u64,
}

impl TileBytes {
    pub fn get(&self, data_type: DataType) -> u64 {
        match data_type {
            DataType::Ifms => self.ifms,
            DataType::Wghs => self.wghs,
            DataType::Ofms => self.ofms,
        }
    }

    /// First data type whose tile does not fit, with its size.
    pub fn first_overflow(&self, buffers: &BufferConfig) -> Option<(DataType, u64)> {
        DataType::ALL
            .into_iter()
            .find(|&d| self.get(d) > buffers.capacity(d))
            .map(|d| (d, self.get(d)))
    }
}

/// Tile sizes in bytes. The ifms tile includes the input halo needed by the
/// filter window: `((t_h - 1) * s + p) x ((t_w - 1) * s + q)` pixels per
/// channel.
pub fn tile_byte_sizes(layer: &LayerShape, tiling: &TilingConfig) -> TileBytes {
    let e = layer.elem();
    let s = u64::from(layer.stride);
    let in_h = (u64::from(tiling.t_h) - 1) * s + u64::from(tiling.t_p);
    let in_w = (u64::from(tiling.t_w) - 1) * s + u64::from(tiling.t_q);
    let wghs_raw = u64::from(tiling.t_m)
        * u64::from(tiling.t_c)
        * u64::from(tiling.t_p)
        * u64::from(tiling.t_q)
        * e;
    TileBytes {
        ifms: u64::from(tiling.t_c) * in_h * in_w * e,
        wghs: scale_bytes(wghs_raw, layer.weight_density),
        ofms: u64::from(tiling.t_m) * u64::from(tiling.t_h) * u64::from(tiling.t_w) * e,
    }
}

/// Tile-size lattice explored per dimension.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Granularity {
    /// Every divisor of the dimension.
    #[default]
    Divisors,
    /// Power-of-two divisors, plus the full dimension.
    PowersOfTwo,
}

impl Granularity {
    pub fn parse(text: &str) -> Result<Self> {
        match text.trim().to_ascii_lowercase().as_str() {
            "divisors" | "divisor" => Ok(Granularity::Divisors),
            "pow2" | "powers-of-two" | "power-of-two" => Ok(Granularity::PowersOfTwo),
            _ => Err(Error::UnknownName(text.to_string())),
        }
    }

    fn steps(self, dim: u32) -> Vec<u32> {
        let divisors = divisors(dim);
        match self {
            Granularity::Divisors => divisors,
            Granularity::PowersOfTwo => divisors
                .into_iter()
                .filter(|&d| d.is_power_of_two() || d == dim)
                .collect(),
        }
    }
}

fn divisors(n: u32) -> Vec<u32> {
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d = 1;
    while d * d <= n {
        if n.is_multiple_of(d) {
            small.push(d);
            if d != n / d {
                large.push(n / d);
            }
        }
        d += 1;
    }
    small.extend(large.into_iter().rev());
    small
}

/// All tilings on the lattice whose three tiles fit their buffers, in
/// ascending lexicographic `(t_m, t_c, t_h, t_w)` order.
pub fn enumerate_partitions(
    layer: &LayerShape,
    buffers: &BufferConfig,
    granularity: Granularity,
) -> Result<Vec<TilingConfig>> {
    let minimal = TilingConfig::unchecked(layer, 1, 1, 1, 1);
    if let Some((data_type, needed)) = tile_byte_sizes(layer, &minimal).first_overflow(buffers) {
        return Err(Error::EmptyPartitionSpace {
            layer: layer.name.clone(),
            data_type,
            needed,
            capacity: buffers.capacity(data_type),
        });
    }

    let ms = granularity.steps(layer.m_out);
    let cs = granularity.steps(layer.c_in);
    let hs = granularity.steps(layer.h_out);
    let ws = granularity.steps(layer.w_out);
    let mut out = Vec::new();
    for &t_m in &ms {
        for &t_c in &cs {
            for &t_h in &hs {
                for &t_w in &ws {
                    let tiling = TilingConfig::unchecked(layer, t_m, t_c, t_h, t_w);
                    if tile_byte_sizes(layer, &tiling)
                        .first_overflow(buffers)
                        .is_none()
                    {
                        out.push(tiling);
                    }
                }
            }
        }
    }
    Ok(out)
}

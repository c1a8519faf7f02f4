//! TOML file formats.
//!
//! Network file:
//!
//! ```toml
//! name = "toy"
//! element_bytes = 1          # default for every layer
//!
//! [buffers]                  # optional, defaults to 64 KiB each
//! ib_bytes = 256
//! wb_bytes = 256
//! ob_bytes = 256
//!
//! [[layer]]
//! name = "conv1"
//! c_in = 2
//! h_in = 6
//! w_in = 6
//! m_out = 4
//! p = 3                      # q defaults to p, stride to 1
//!
//! [[layer]]
//! name = "fc"
//! kind = "fc"                # filter covers the whole input
//! c_in = 4
//! h_in = 4
//! w_in = 4
//! m_out = 10
//! weight_density = 0.5
//! ```
//!
//! Geometry file: `kind` plus the [`DramGeometry`] fields (`channels`,
//! `ranks_per_channel`, `chips_per_rank` default to 1, `rows_far` to 0) and
//! an optional `max_open_subarrays` (integer or `"all"`).
//!
//! Profile file: `arch`, `provenance`, and `[cycles]` / `[energy_nj]` tables
//! keyed by `column`, `row_near`, `row_far`, `subarray`, `bank`.
//!
//! Design file: `[[point]]` entries with `layer`, `t_m`, `t_c`, `t_h`,
//! `t_w`, `schedule` and `mapping`.

use std::path::Path;

use serde::Deserialize;

use crate::dram::{ArchKind, ArchVariant, DramGeometry, MappingPolicy};
use crate::edp::CostProfile;
use crate::workload::{BufferConfig, LayerShape, ScheduleScheme, TilingConfig};
use crate::{Error, Result};

fn parse_toml<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

/// Reads a file, naming it in any error.
pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn with_path<T>(path: &Path, result: Result<T>) -> Result<T> {
    result.map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
enum LayerKind {
    #[default]
    Conv,
    Fc,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerRecord {
    name: String,
    #[serde(default)]
    kind: LayerKind,
    c_in: u32,
    h_in: u32,
    w_in: u32,
    m_out: u32,
    p: Option<u32>,
    q: Option<u32>,
    stride: Option<u32>,
    element_bytes: Option<u32>,
    weight_density: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BufferRecord {
    ib_bytes: u64,
    wb_bytes: u64,
    ob_bytes: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    name: Option<String>,
    element_bytes: Option<u32>,
    buffers: Option<BufferRecord>,
    #[serde(default)]
    layer: Vec<LayerRecord>,
}

/// A parsed network file.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub name: String,
    pub layers: Vec<LayerShape>,
    /// Buffers declared in the file, if any.
    pub buffers: Option<BufferConfig>,
}

pub fn parse_network(text: &str) -> Result<Network> {
    let file: NetworkFile = parse_toml(text)?;
    if file.layer.is_empty() {
        return Err(Error::Config("network has no [[layer]] entries".into()));
    }
    let mut layers = Vec::with_capacity(file.layer.len());
    for rec in file.layer {
        if layers.iter().any(|l: &LayerShape| l.name == rec.name) {
            return Err(Error::Config(format!("duplicate layer name {}", rec.name)));
        }
        let mut layer = match rec.kind {
            LayerKind::Conv => {
                if rec.p.is_none() {
                    return Err(Error::Config(format!("layer {}: missing p", rec.name)));
                }
                let p = rec.p.unwrap();
                LayerShape::conv(
                    rec.name,
                    rec.c_in,
                    (rec.h_in, rec.w_in),
                    rec.m_out,
                    (p, rec.q.unwrap_or(p)),
                    rec.stride.unwrap_or(1),
                )?
            }
            LayerKind::Fc => {
                if rec.p.is_some() || rec.q.is_some() || rec.stride.is_some() {
                    return Err(Error::Config(format!(
                        "layer {}: fc layers take no p, q or stride",
                        rec.name
                    )));
                }
                LayerShape::fully_connected(rec.name, rec.c_in, (rec.h_in, rec.w_in), rec.m_out)?
            }
        };
        if let Some(bytes) = rec.element_bytes.or(file.element_bytes) {
            layer = layer.with_element_bytes(bytes)?;
        }
        if let Some(density) = rec.weight_density {
            layer = layer.with_weight_density(density)?;
        }
        layers.push(layer);
    }
    let buffers = file
        .buffers
        .map(|b| BufferConfig::new(b.ib_bytes, b.wb_bytes, b.ob_bytes))
        .transpose()?;
    Ok(Network {
        name: file.name.unwrap_or_else(|| "network".into()),
        layers,
        buffers,
    })
}

pub fn load_network(path: &Path) -> Result<Network> {
    with_path(path, parse_network(&read_file(path)?))
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OpenLimit {
    Count(u32),
    Word(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometryFile {
    name: Option<String>,
    kind: String,
    #[serde(default = "one")]
    channels: u32,
    #[serde(default = "one")]
    ranks_per_channel: u32,
    #[serde(default = "one")]
    chips_per_rank: u32,
    banks_per_chip: u32,
    subarrays_per_bank: u32,
    rows_near: u32,
    #[serde(default)]
    rows_far: u32,
    columns_per_row: u32,
    access_unit_bytes: u64,
    max_open_subarrays: Option<OpenLimit>,
}

fn one() -> u32 {
    1
}

/// A parsed geometry file: display name, architecture and organisation.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometrySpec {
    pub name: String,
    pub variant: ArchVariant,
    pub geometry: DramGeometry,
}

pub fn parse_geometry(text: &str) -> Result<GeometrySpec> {
    let file: GeometryFile = parse_toml(text)?;
    let kind = ArchKind::parse(&file.kind)?;
    let geometry = DramGeometry {
        channels: file.channels,
        ranks_per_channel: file.ranks_per_channel,
        chips_per_rank: file.chips_per_rank,
        banks_per_chip: file.banks_per_chip,
        subarrays_per_bank: file.subarrays_per_bank,
        rows_near: file.rows_near,
        rows_far: file.rows_far,
        columns_per_row: file.columns_per_row,
        access_unit_bytes: file.access_unit_bytes,
    };
    geometry.validate()?;
    let mut variant = ArchVariant::new(kind);
    if let Some(limit) = file.max_open_subarrays {
        let limit = match limit {
            OpenLimit::Count(n) => Some(n),
            OpenLimit::Word(w) if w.eq_ignore_ascii_case("all") => None,
            OpenLimit::Word(w) => {
                return Err(Error::Config(format!(
                    "max_open_subarrays must be a count or \"all\", got {w:?}"
                )))
            }
        };
        variant = variant.with_max_open(limit)?;
    }
    Ok(GeometrySpec {
        name: file.name.unwrap_or_else(|| kind.name().to_string()),
        variant,
        geometry,
    })
}

pub fn load_geometry(path: &Path) -> Result<GeometrySpec> {
    with_path(path, parse_geometry(&read_file(path)?))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostTable<T> {
    column: T,
    row_near: T,
    row_far: T,
    subarray: T,
    bank: T,
}

impl<T: Copy> CostTable<T> {
    /// In [`crate::dram::AccessClass`] index order.
    fn to_array(&self) -> [T; 5] {
        [
            self.column,
            self.row_near,
            self.row_far,
            self.subarray,
            self.bank,
        ]
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    arch: String,
    #[serde(default)]
    provenance: String,
    cycles: CostTable<u64>,
    energy_nj: CostTable<f64>,
}

/// Parses a profile; the ordering check runs unless `allow_unordered`.
pub fn parse_profile(text: &str, allow_unordered: bool) -> Result<CostProfile> {
    let file: ProfileFile = parse_toml(text)?;
    let profile = CostProfile::new(
        ArchKind::parse(&file.arch)?,
        file.cycles.to_array(),
        file.energy_nj.to_array(),
    )?
    .with_provenance(file.provenance);
    if !allow_unordered {
        profile.check_ordering()?;
    }
    Ok(profile)
}

pub fn load_profile(path: &Path, allow_unordered: bool) -> Result<CostProfile> {
    with_path(path, parse_profile(&read_file(path)?, allow_unordered))
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum MappingField {
    Number(usize),
    Name(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointRecord {
    layer: String,
    t_m: u32,
    t_c: u32,
    t_h: u32,
    t_w: u32,
    schedule: String,
    mapping: MappingField,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DesignFile {
    #[serde(default)]
    point: Vec<PointRecord>,
}

/// A design-file entry resolved against its network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannedPoint {
    pub layer: usize,
    pub tiling: TilingConfig,
    pub schedule: ScheduleScheme,
    pub mapping: MappingPolicy,
}

/// Parses a design file; every layer of `network` needs exactly one point.
pub fn parse_design(text: &str, network: &Network) -> Result<Vec<PlannedPoint>> {
    let file: DesignFile = parse_toml(text)?;
    let mut planned: Vec<Option<PlannedPoint>> = vec![None; network.layers.len()];
    for rec in file.point {
        let index = network
            .layers
            .iter()
            .position(|l| l.name == rec.layer)
            .ok_or_else(|| Error::Config(format!("design names unknown layer {}", rec.layer)))?;
        if planned[index].is_some() {
            return Err(Error::Config(format!(
                "layer {} has two design points",
                rec.layer
            )));
        }
        let layer = &network.layers[index];
        let mapping = match rec.mapping {
            MappingField::Number(n) => MappingPolicy::preset(n)?,
            MappingField::Name(s) => MappingPolicy::parse(&s)?,
        };
        planned[index] = Some(PlannedPoint {
            layer: index,
            tiling: TilingConfig::new(layer, rec.t_m, rec.t_c, rec.t_h, rec.t_w)?,
            schedule: ScheduleScheme::parse(&rec.schedule)?,
            mapping,
        });
    }
    planned
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            p.ok_or_else(|| {
                Error::Config(format!(
                    "no design point for layer {}",
                    network.layers[i].name
                ))
            })
        })
        .collect()
}

pub fn load_design(path: &Path, network: &Network) -> Result<Vec<PlannedPoint>> {
    with_path(path, parse_design(&read_file(path)?, network))
}

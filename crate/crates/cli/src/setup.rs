//! Turns command-line file arguments into engine inputs.

use std::path::{Path, PathBuf};

use dram_edp::config::{load_geometry, load_network, load_profile, Network};
use dram_edp::dram::MappingPolicy;
use dram_edp::dse::ArchConfig;
use dram_edp::edp::CostProfile;
use dram_edp::workload::{BufferConfig, ScheduleScheme};
use dram_edp::{Error, Result};

/// Buffer sizes given on the command line; each overrides the network file.
#[derive(Debug, Clone, Copy, Default)]
pub struct BufferArgs {
    pub ib_bytes: Option<u64>,
    pub wb_bytes: Option<u64>,
    pub ob_bytes: Option<u64>,
}

pub fn buffers(network: &Network, args: BufferArgs) -> Result<BufferConfig> {
    let base = network
        .buffers
        .unwrap_or_else(BufferConfig::default_accelerator);
    BufferConfig::new(
        args.ib_bytes.unwrap_or(base.ib_bytes),
        args.wb_bytes.unwrap_or(base.wb_bytes),
        args.ob_bytes.unwrap_or(base.ob_bytes),
    )
}

pub fn network(path: &Path) -> Result<Network> {
    load_network(path)
}

/// Pairs every geometry file with the profile of the same architecture kind.
pub fn architectures(
    geometries: &[PathBuf],
    profiles: &[PathBuf],
    allow_unordered: bool,
) -> Result<Vec<ArchConfig>> {
    let profiles: Vec<CostProfile> = profiles
        .iter()
        .map(|p| load_profile(p, allow_unordered))
        .collect::<Result<_>>()?;
    for (i, p) in profiles.iter().enumerate() {
        if profiles[..i].iter().any(|q| q.arch == p.arch) {
            return Err(Error::Config(format!("two profiles given for {}", p.arch)));
        }
    }
    geometries
        .iter()
        .map(|path| {
            let spec = load_geometry(path)?;
            let profile = profiles
                .iter()
                .find(|p| p.arch == spec.variant.kind)
                .ok_or_else(|| {
                    Error::Config(format!(
                        "{}: no profile given for {}",
                        path.display(),
                        spec.variant.kind
                    ))
                })?;
            ArchConfig::new(spec.name, spec.variant, spec.geometry, profile.clone())
        })
        .collect()
}

/// Parses a comma-separated list, or `all`.
pub fn schedules(list: &str) -> Result<Vec<ScheduleScheme>> {
    if list.trim().eq_ignore_ascii_case("all") {
        return Ok(ScheduleScheme::ALL.to_vec());
    }
    non_empty(
        list.split(',')
            .map(ScheduleScheme::parse)
            .collect::<Result<_>>()?,
        "schedule",
    )
}

pub fn policies(list: &str) -> Result<Vec<MappingPolicy>> {
    if list.trim().eq_ignore_ascii_case("all") {
        return Ok(MappingPolicy::PRESETS.to_vec());
    }
    // Either preset names ("1,3,Mapping-5") or one explicit order.
    if let Ok(explicit) = MappingPolicy::parse(list) {
        return Ok(vec![explicit]);
    }
    non_empty(
        list.split(',')
            .map(MappingPolicy::parse)
            .collect::<Result<_>>()?,
        "policy",
    )
}

fn non_empty<T>(items: Vec<T>, what: &str) -> Result<Vec<T>> {
    if items.is_empty() {
        return Err(Error::Config(format!("empty {what} selection")));
    }
    Ok(items)
}

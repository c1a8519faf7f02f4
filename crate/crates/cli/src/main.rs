//! `dram-edp`: evaluate, explore and compare DRAM mappings of CNN layers.
//!
//! Exit codes: 0 success, 1 usage or parse error, 2 infeasible tiling or
//! partition space, 3 DRAM capacity exceeded.

mod report;
mod setup;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use dram_edp::config::{load_design, load_profile};
use dram_edp::dse::{compare_policies, evaluate_point, explore, DesignPoint, ExploreOptions};
use dram_edp::workload::{select_adaptive_schedule, Granularity};
use dram_edp::Error;

use report::{write_rows, CompareRow, EvaluateRow, ExploreRow, Format, Row};
use setup::BufferArgs;

#[derive(Parser)]
#[command(
    name = "dram-edp",
    version,
    about = "DRAM mapping EDP explorer for tiled CNN layers"
)]
struct Cli {
    /// Worker threads for point evaluation (default: all cores).
    #[arg(long, global = true, env = "DRAM_EDP_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one design point per layer, as given in a design file.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Design file with one [[point]] per layer.
        #[arg(long)]
        design: PathBuf,
    },
    /// Search partitions x schedules x policies for the minimum-EDP point.
    Explore {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        search: Search,
        /// Schedules to search (comma-separated, or `all`).
        #[arg(long, default_value = "all")]
        schedules: String,
        /// Also write every evaluated point to this file.
        #[arg(long, value_name = "PATH")]
        keep_full_sweep: Option<PathBuf>,
        /// Report layers without a feasible partition instead of failing.
        #[arg(long)]
        skip_infeasible_layers: bool,
    },
    /// Best EDP of every layer under every policy (long-form table).
    Compare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        search: Search,
        /// Schedules to compare under (comma-separated, or `all`).
        #[arg(long, default_value = "adaptive")]
        schedules: String,
    },
    /// Cost-profile utilities.
    Profiles {
        #[command(subcommand)]
        command: ProfilesCommand,
    },
}

#[derive(Subcommand)]
enum ProfilesCommand {
    /// Check that profile files parse and satisfy the cost ordering.
    Validate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        allow_unordered_profile: bool,
    },
}

#[derive(Args)]
struct Common {
    /// Network description (TOML).
    #[arg(long)]
    network: PathBuf,
    /// Geometry file per architecture; repeat for an architecture sweep.
    #[arg(long = "geometry", required = true)]
    geometries: Vec<PathBuf>,
    /// Cost-profile files; each geometry uses the profile of its kind.
    #[arg(long = "profile", required = true)]
    profiles: Vec<PathBuf>,
    /// Accept profiles whose costs are not ordered column <= bank <=
    /// subarray <= row_near <= row_far.
    #[arg(long)]
    allow_unordered_profile: bool,
    #[arg(long)]
    ib_bytes: Option<u64>,
    #[arg(long)]
    wb_bytes: Option<u64>,
    #[arg(long)]
    ob_bytes: Option<u64>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct Search {
    /// Mapping policies (e.g. `1,3,5`, `Mapping-3`, or `all`).
    #[arg(long, default_value = "all")]
    policies: String,
    /// Tile-size lattice: `divisors` or `pow2`.
    #[arg(long, default_value = "divisors")]
    granularity: String,
}

impl Common {
    fn buffer_args(&self) -> BufferArgs {
        BufferArgs {
            ib_bytes: self.ib_bytes,
            wb_bytes: self.wb_bytes,
            ob_bytes: self.ob_bytes,
        }
    }
}

fn emit<R: Row>(rows: &[R], format: Format, output: Option<&Path>) -> anyhow::Result<()> {
    match output {
        Some(path) => {
            let file =
                File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
            let mut w = BufWriter::new(file);
            write_rows(rows, format, &mut w)?;
            w.flush()?;
        }
        None => write_rows(rows, format, io::stdout().lock())?,
    }
    Ok(())
}

fn cmd_evaluate(common: &Common, design: &Path) -> anyhow::Result<()> {
    let network = setup::network(&common.network)?;
    let buffers = setup::buffers(&network, common.buffer_args())?;
    let archs = setup::architectures(
        &common.geometries,
        &common.profiles,
        common.allow_unordered_profile,
    )?;
    let planned = load_design(design, &network)?;
    let mut rows = Vec::new();
    for arch in &archs {
        for p in &planned {
            let layer = &network.layers[p.layer];
            let schedule = p.schedule.fixed().unwrap_or_else(|| {
                select_adaptive_schedule(layer, &p.tiling, arch.geometry.effective_unit_bytes())
            });
            let point = DesignPoint {
                tiling: p.tiling,
                schedule,
                mapping: p.mapping,
            };
            let eval = evaluate_point(layer, &buffers, &point, arch)?;
            rows.push(EvaluateRow::new(&layer.name, &arch.name, &point, &eval));
        }
    }
    emit(&rows, common.format, common.output.as_deref())
}

fn cmd_explore(
    common: &Common,
    search: &Search,
    schedules: &str,
    sweep_path: Option<&Path>,
    skip_infeasible_layers: bool,
) -> anyhow::Result<()> {
    let network = setup::network(&common.network)?;
    let buffers = setup::buffers(&network, common.buffer_args())?;
    let archs = setup::architectures(
        &common.geometries,
        &common.profiles,
        common.allow_unordered_profile,
    )?;
    let options = ExploreOptions {
        granularity: Granularity::parse(&search.granularity)?,
        schedules: setup::schedules(schedules)?,
        policies: setup::policies(&search.policies)?,
        keep_full_sweep: sweep_path.is_some(),
        skip_infeasible_layers,
    };
    let result = explore(&network.layers, &buffers, &archs, &options)?;

    let mut rows = Vec::new();
    let mut sweep = Vec::new();
    for outcome in &result.per_arch {
        for skipped in &outcome.skipped {
            eprintln!("warning: {}: skipped: {}", outcome.arch, skipped.reason);
        }
        for w in &outcome.winners {
            rows.push(ExploreRow::point(
                &w.layer_name,
                &outcome.arch,
                &w.point,
                &w.eval,
            ));
        }
        rows.push(ExploreRow::total(&outcome.arch, &outcome.total));
        for s in &outcome.sweep {
            let name = &network.layers[s.layer].name;
            sweep.push(ExploreRow::point(name, &outcome.arch, &s.point, &s.eval));
        }
    }
    emit(&rows, common.format, common.output.as_deref())?;
    if let Some(path) = sweep_path {
        emit(&sweep, common.format, Some(path))?;
    }
    if let Some(best) = result.best_arch {
        if result.per_arch.len() > 1 {
            eprintln!("lowest network EDP: {}", result.per_arch[best].arch);
        }
    }
    Ok(())
}

fn cmd_compare(common: &Common, search: &Search, schedules: &str) -> anyhow::Result<()> {
    let network = setup::network(&common.network)?;
    let buffers = setup::buffers(&network, common.buffer_args())?;
    let archs = setup::architectures(
        &common.geometries,
        &common.profiles,
        common.allow_unordered_profile,
    )?;
    let granularity = Granularity::parse(&search.granularity)?;
    let policies = setup::policies(&search.policies)?;
    let mut rows = Vec::new();
    for arch in &archs {
        for schedule in setup::schedules(schedules)? {
            let cells = compare_policies(
                &network.layers,
                &buffers,
                arch,
                schedule,
                &policies,
                granularity,
            )?;
            rows.extend(cells.iter().map(|c| CompareRow {
                layer: network.layers[c.layer].name.clone(),
                arch: arch.name.clone(),
                schedule: schedule.to_string(),
                policy: c.mapping.to_string(),
                edp: c.eval.edp.edp,
            }));
        }
    }
    emit(&rows, common.format, common.output.as_deref())
}

fn cmd_validate(files: &[PathBuf], allow_unordered: bool) -> anyhow::Result<()> {
    let mut first_error = None;
    for path in files {
        match load_profile(path, allow_unordered) {
            Ok(p) => println!("ok  {}  {}", path.display(), p.arch),
            Err(e) => {
                println!("bad {}  {e}", path.display());
                first_error.get_or_insert(e);
            }
        }
    }
    match first_error {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::BufferOverflow { .. } | Error::EmptyPartitionSpace { .. }) => 2,
        Some(Error::CapacityExceeded { .. }) => 3,
        _ => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot start worker pool")?;
    }
    match &cli.command {
        Command::Evaluate { common, design } => cmd_evaluate(common, design),
        Command::Explore {
            common,
            search,
            schedules,
            keep_full_sweep,
            skip_infeasible_layers,
        } => cmd_explore(
            common,
            search,
            schedules,
            keep_full_sweep.as_deref(),
            *skip_infeasible_layers,
        ),
        Command::Compare {
            common,
            search,
            schedules,
        } => cmd_compare(common, search, schedules),
        Command::Profiles {
            command:
                ProfilesCommand::Validate {
                    files,
                    allow_unordered_profile,
                },
        } => cmd_validate(files, *allow_unordered_profile),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

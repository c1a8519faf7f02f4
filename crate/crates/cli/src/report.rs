//! Report rows and their CSV / JSON / table renderings.
//!
//! CSV and table cells print floating-point values with 6 significant
//! digits; JSON carries the full double.

use std::io::Write;

use clap::ValueEnum;
use serde::Serialize;

use dram_edp::dse::{DesignPoint, PointEvaluation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Table,
}

pub fn sig6(x: f64) -> String {
    format!("{x:.5e}")
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub trait Row: Serialize {
    const HEADER: &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

/// One evaluated design point with its access breakdown.
#[derive(Debug, Clone, Serialize)]
pub struct EvaluateRow {
    pub layer: String,
    pub arch: String,
    pub policy: String,
    pub schedule: String,
    pub t_m: u32,
    pub t_c: u32,
    pub t_h: u32,
    pub t_w: u32,
    pub acc_column: u64,
    pub acc_row_near: u64,
    pub acc_row_far: u64,
    pub acc_subarray: u64,
    pub acc_bank: u64,
    pub latency_cycles: u64,
    #[serde(rename = "energy_nJ")]
    pub energy_nj: f64,
    pub edp: f64,
}

impl EvaluateRow {
    pub fn new(layer: &str, arch: &str, point: &DesignPoint, eval: &PointEvaluation) -> Self {
        let c = eval.counts;
        EvaluateRow {
            layer: layer.to_string(),
            arch: arch.to_string(),
            policy: point.mapping.to_string(),
            schedule: point.schedule.to_string(),
            t_m: point.tiling.t_m,
            t_c: point.tiling.t_c,
            t_h: point.tiling.t_h,
            t_w: point.tiling.t_w,
            acc_column: c.acc_column,
            acc_row_near: c.acc_row_near,
            acc_row_far: c.acc_row_far,
            acc_subarray: c.acc_subarray,
            acc_bank: c.acc_bank,
            latency_cycles: eval.edp.latency_cycles,
            energy_nj: eval.edp.energy_nj,
            edp: eval.edp.edp,
        }
    }
}

impl Row for EvaluateRow {
    const HEADER: &'static [&'static str] = &[
        "layer",
        "arch",
        "policy",
        "schedule",
        "t_m",
        "t_c",
        "t_h",
        "t_w",
        "acc_column",
        "acc_row_near",
        "acc_row_far",
        "acc_subarray",
        "acc_bank",
        "latency_cycles",
        "energy_nJ",
        "edp",
    ];

    fn fields(&self) -> Vec<String> {
        vec![
            self.layer.clone(),
            self.arch.clone(),
            self.policy.clone(),
            self.schedule.clone(),
            self.t_m.to_string(),
            self.t_c.to_string(),
            self.t_h.to_string(),
            self.t_w.to_string(),
            self.acc_column.to_string(),
            self.acc_row_near.to_string(),
            self.acc_row_far.to_string(),
            self.acc_subarray.to_string(),
            self.acc_bank.to_string(),
            self.latency_cycles.to_string(),
            sig6(self.energy_nj),
            sig6(self.edp),
        ]
    }
}

/// A per-layer winner, a sweep point, or (with `layer = "TOTAL"` and no
/// point fields) a network total.
#[derive(Debug, Clone, Serialize)]
pub struct ExploreRow {
    pub layer: String,
    pub arch: String,
    pub policy: Option<String>,
    pub schedule: Option<String>,
    pub t_m: Option<u32>,
    pub t_c: Option<u32>,
    pub t_h: Option<u32>,
    pub t_w: Option<u32>,
    pub latency_cycles: u64,
    #[serde(rename = "energy_nJ")]
    pub energy_nj: f64,
    pub edp: f64,
}

impl ExploreRow {
    pub fn point(layer: &str, arch: &str, point: &DesignPoint, eval: &PointEvaluation) -> Self {
        ExploreRow {
            layer: layer.to_string(),
            arch: arch.to_string(),
            policy: Some(point.mapping.to_string()),
            schedule: Some(point.schedule.to_string()),
            t_m: Some(point.tiling.t_m),
            t_c: Some(point.tiling.t_c),
            t_h: Some(point.tiling.t_h),
            t_w: Some(point.tiling.t_w),
            latency_cycles: eval.edp.latency_cycles,
            energy_nj: eval.edp.energy_nj,
            edp: eval.edp.edp,
        }
    }

    pub fn total(arch: &str, total: &dram_edp::edp::NetworkEdp) -> Self {
        ExploreRow {
            layer: "TOTAL".into(),
            arch: arch.to_string(),
            policy: None,
            schedule: None,
            t_m: None,
            t_c: None,
            t_h: None,
            t_w: None,
            latency_cycles: total.total_latency_cycles,
            energy_nj: total.total_energy_nj,
            edp: total.total_edp,
        }
    }
}

impl Row for ExploreRow {
    const HEADER: &'static [&'static str] = &[
        "layer",
        "arch",
        "policy",
        "schedule",
        "t_m",
        "t_c",
        "t_h",
        "t_w",
        "latency_cycles",
        "energy_nJ",
        "edp",
    ];

    fn fields(&self) -> Vec<String> {
        vec![
            self.layer.clone(),
            self.arch.clone(),
            opt(self.policy.clone()),
            opt(self.schedule.clone()),
            opt(self.t_m),
            opt(self.t_c),
            opt(self.t_h),
            opt(self.t_w),
            self.latency_cycles.to_string(),
            sig6(self.energy_nj),
            sig6(self.edp),
        ]
    }
}

/// One cell of the long-form layer x policy table.
#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub layer: String,
    pub arch: String,
    pub schedule: String,
    pub policy: String,
    pub edp: f64,
}

impl Row for CompareRow {
    const HEADER: &'static [&'static str] = &["layer", "arch", "schedule", "policy", "edp"];

    fn fields(&self) -> Vec<String> {
        vec![
            self.layer.clone(),
            self.arch.clone(),
            self.schedule.clone(),
            self.policy.clone(),
            sig6(self.edp),
        ]
    }
}

pub fn write_rows<R: Row, W: Write>(rows: &[R], format: Format, out: W) -> anyhow::Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(R::HEADER)?;
            for row in rows {
                w.write_record(row.fields())?;
            }
            w.flush()?;
        }
        Format::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, rows)?;
            writeln!(out)?;
        }
        Format::Table => write_table(rows, out)?,
    }
    Ok(())
}

fn write_table<R: Row, W: Write>(rows: &[R], mut out: W) -> std::io::Result<()> {
    let cells: Vec<Vec<String>> = rows.iter().map(Row::fields).collect();
    let widths: Vec<usize> = R::HEADER
        .iter()
        .enumerate()
        .map(|(i, h)| cells.iter().map(|r| r[i].len()).fold(h.len(), usize::max))
        .collect();
    let line = |fields: Vec<&str>| {
        let padded: Vec<String> = fields
            .iter()
            .zip(&widths)
            .map(|(f, w)| format!("{f:<w$}"))
            .collect();
        padded.join("  ").trim_end().to_string()
    };
    writeln!(out, "{}", line(R::HEADER.to_vec()))?;
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    writeln!(out, "{}", rule.join("  "))?;
    for r in &cells {
        writeln!(out, "{}", line(r.iter().map(String::as_str).collect()))?;
    }
    Ok(())
}

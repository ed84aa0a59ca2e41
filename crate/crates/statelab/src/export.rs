//! Plot-ready CSV exports from telemetry.
//!
//! Three table families:
//!
//! * `rank_vs_step.csv` — long format, one row per (head, step), with the
//!   analytic `min(t, d)` bound alongside the measured ranks;
//! * `scatter_{t1}_{t2}.csv` — per step pair, one row per head with the
//!   (x, y) coordinates of its rank and norm, annotated with the
//!   cosine/Spearman metrics as `#` comment lines;
//! * `heatmap.csv` — one row per (layer, head) with window-mean effective
//!   rank and nuclear norm.
//!
//! Floats are written in shortest round-trip form, so re-ingesting a table
//! reproduces the original values bit for bit.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::dynamics::ConsistencyRow;
use crate::error::CliError;
use crate::telemetry::{snapshots_by_head, TelemetryRecord};

fn opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => "undefined".into(),
    }
}

/// Long-format rank/norm trajectory table with the rank bound column.
pub fn rank_vs_step_csv(records: &[TelemetryRecord]) -> Result<String, CliError> {
    let mut out = String::from(
        "step,head_id,effective_rank,algebraic_rank,nuclear_norm,spectral_norm,rank_bound\n",
    );
    let (heads, series) = match snapshots_by_head(records) {
        Ok(x) => x,
        Err(_) if records.is_empty() => return Ok(out), // empty table, header only
        Err(e) => return Err(e),
    };
    for (h, snaps) in heads.iter().zip(&series) {
        let d = h.d_k.min(h.d_v);
        for s in snaps {
            let bound = s.step.min(d);
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                s.step,
                h.head_id,
                s.effective_rank,
                s.algebraic_rank,
                s.nuclear_norm,
                s.spectral_norm,
                bound
            )
            .expect("string write");
        }
    }
    Ok(out)
}

/// Scatter table for one step pair, annotated with its consistency metrics.
pub fn scatter_csv(row: &ConsistencyRow) -> String {
    let mut out = String::new();
    writeln!(out, "# pair={}:{}", row.pair.0, row.pair.1).unwrap();
    writeln!(
        out,
        "# rank_spearman={} rank_cosine={} norm_spearman={} norm_cosine={}",
        opt(row.rank_spearman),
        opt(row.rank_cosine),
        opt(row.norm_spearman),
        opt(row.norm_cosine)
    )
    .unwrap();
    out.push_str("head_id,rank_x,rank_y,norm_x,norm_y\n");
    for p in &row.scatter {
        writeln!(
            out,
            "{},{},{},{},{}",
            p.head_id, p.rank_x, p.rank_y, p.norm_x, p.norm_y
        )
        .unwrap();
    }
    out
}

/// Per-(layer, head) mean telemetry for heatmap rendering.
pub fn heatmap_csv(records: &[TelemetryRecord]) -> Result<String, CliError> {
    let mut out = String::from("layer_id,head_id,mean_effective_rank,mean_nuclear_norm\n");
    let (heads, series) = match snapshots_by_head(records) {
        Ok(x) => x,
        Err(_) if records.is_empty() => return Ok(out),
        Err(e) => return Err(e),
    };
    for (h, snaps) in heads.iter().zip(&series) {
        if snaps.is_empty() {
            continue;
        }
        let n = snaps.len() as f64;
        let mean_rank: f64 = snaps.iter().map(|s| s.effective_rank as f64).sum::<f64>() / n;
        let mean_norm: f64 = snaps.iter().map(|s| s.nuclear_norm).sum::<f64>() / n;
        writeln!(out, "{},{},{},{}", h.layer_id, h.head_id, mean_rank, mean_norm)
            .expect("string write");
    }
    Ok(out)
}

/// Parsed scatter file: the step pair and the per-head points.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterTable {
    pub pair: (usize, usize),
    pub points: Vec<crate::dynamics::HeadPoint>,
}

/// Re-ingest a scatter CSV; used by the round-trip checks.
pub fn read_scatter_csv(text: &str) -> Result<ScatterTable, CliError> {
    let mut pair = None;
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let parse_err = |msg: String| CliError::Telemetry { line: i + 1, msg };
        if let Some(rest) = line.strip_prefix("# pair=") {
            let (a, b) = rest
                .split_once(':')
                .ok_or_else(|| parse_err(format!("bad pair annotation '{rest}'")))?;
            pair = Some((
                a.trim().parse().map_err(|e| parse_err(format!("{e}")))?,
                b.trim().parse().map_err(|e| parse_err(format!("{e}")))?,
            ));
            continue;
        }
        if line.starts_with('#') || line.starts_with("head_id") || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(parse_err(format!("expected 5 fields, got {}", fields.len())));
        }
        let f = |j: usize| -> Result<f64, CliError> {
            fields[j]
                .trim()
                .parse()
                .map_err(|e| CliError::Telemetry {
                    line: i + 1,
                    msg: format!("field {j}: {e}"),
                })
        };
        points.push(crate::dynamics::HeadPoint {
            head_id: fields[0]
                .trim()
                .parse()
                .map_err(|e| parse_err(format!("head_id: {e}")))?,
            rank_x: f(1)?,
            rank_y: f(2)?,
            norm_x: f(3)?,
            norm_y: f(4)?,
        });
    }
    Ok(ScatterTable {
        pair: pair.ok_or_else(|| CliError::Telemetry {
            line: 0,
            msg: "scatter file missing '# pair=' annotation".into(),
        })?,
        points,
    })
}

/// Write all export tables for a telemetry file.  Returns the paths written.
pub fn export_all(
    records: &[TelemetryRecord],
    rows: &[ConsistencyRow],
    out_dir: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let p = out_dir.join("rank_vs_step.csv");
    std::fs::write(&p, rank_vs_step_csv(records)?)?;
    written.push(p);

    for row in rows {
        let p = out_dir.join(format!("scatter_{}_{}.csv", row.pair.0, row.pair.1));
        std::fs::write(&p, scatter_csv(row))?;
        written.push(p);
    }

    let p = out_dir.join("heatmap.csv");
    std::fs::write(&p, heatmap_csv(records)?)?;
    written.push(p);

    Ok(written)
}

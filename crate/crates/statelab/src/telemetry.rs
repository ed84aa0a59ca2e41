//! Line-delimited telemetry records.
//!
//! One UTF-8 JSON object per line, append-only, every row self-describing
//! through its `record` tag.  Numeric fields use shortest round-trip
//! encoding, so re-ingested values are bit-identical and re-verification
//! stays inside the stated tolerances.  Nothing time-dependent is written:
//! identical (config, seed) produce byte-identical files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{ConsistencyRow, StabilityCertificate};
use crate::error::CliError;
use crate::pruning::SaturationReport;
use crate::spectral::SpectralSnapshot;
use crate::state::{HeadConfig, UpdateRule};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadMeta {
    pub head_id: usize,
    pub d_k: usize,
    pub d_v: usize,
    pub rule: UpdateRule,
}

impl From<&HeadConfig> for HeadMeta {
    fn from(c: &HeadConfig) -> Self {
        Self {
            head_id: c.head_id,
            d_k: c.d_k,
            d_v: c.d_v,
            rule: c.rule,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaRecord {
    pub schema_version: u32,
    pub experiment: String,
    pub seed: u64,
    /// Generator algorithm identifier; replays must match it.
    pub rng: String,
    pub layer_id: usize,
    pub stream: String,
    pub length: usize,
    pub relative_eps: f64,
    pub heads: Vec<HeadMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub layer_id: usize,
    pub head_id: usize,
    pub step: usize,
    pub effective_rank: usize,
    pub algebraic_rank: usize,
    pub nuclear_norm: f64,
    pub spectral_norm: f64,
    pub top_k_singular_values: Vec<f64>,
}

impl SnapshotRecord {
    pub fn from_snapshot(snap: &SpectralSnapshot, layer_id: usize, top_k: usize) -> Self {
        let k = top_k.min(snap.singular_values.len());
        Self {
            layer_id,
            head_id: snap.head_id,
            step: snap.step,
            effective_rank: snap.effective_rank,
            algebraic_rank: snap.algebraic_rank,
            nuclear_norm: snap.nuclear_norm,
            spectral_norm: snap.spectral_norm,
            top_k_singular_values: snap.singular_values[..k].to_vec(),
        }
    }

    /// Rebuild an in-memory snapshot.  The spectrum may be truncated, but
    /// the precomputed rank and norm fields carry everything the verifiers
    /// read.
    pub fn to_snapshot(&self, dims: (usize, usize)) -> SpectralSnapshot {
        SpectralSnapshot {
            step: self.step,
            head_id: self.head_id,
            dims,
            singular_values: self.top_k_singular_values.clone(),
            effective_rank: self.effective_rank,
            algebraic_rank: self.algebraic_rank,
            nuclear_norm: self.nuclear_norm,
            spectral_norm: self.spectral_norm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum TelemetryRecord {
    Meta(MetaRecord),
    Snapshot(SnapshotRecord),
    Certificate(StabilityCertificate),
    Report(ConsistencyRow),
    Saturation(SaturationReport),
}

/// Write records as JSONL.
pub fn write_records(path: &Path, records: &[TelemetryRecord]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)
            .map_err(|e| CliError::Config(format!("telemetry encode: {e}")))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Read a JSONL telemetry file, reporting the offending line on parse errors.
pub fn read_records(path: &Path) -> Result<Vec<TelemetryRecord>, CliError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| CliError::Telemetry {
            line: i + 1,
            msg: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Pull the meta row (required, first by convention but searched anywhere).
pub fn find_meta(records: &[TelemetryRecord]) -> Result<&MetaRecord, CliError> {
    records
        .iter()
        .find_map(|r| match r {
            TelemetryRecord::Meta(m) => Some(m),
            _ => None,
        })
        .ok_or_else(|| CliError::Telemetry {
            line: 0,
            msg: "no meta record found".into(),
        })
}

/// Reassemble per-head snapshot series (ordered by step) and the head
/// configs from a telemetry file.
pub fn snapshots_by_head(
    records: &[TelemetryRecord],
) -> Result<(Vec<HeadConfig>, Vec<Vec<SpectralSnapshot>>), CliError> {
    let meta = find_meta(records)?;
    let heads: Vec<HeadConfig> = meta
        .heads
        .iter()
        .map(|h| {
            HeadConfig::new(h.d_k, h.d_v, h.rule, h.head_id, meta.layer_id)
                .map_err(|e| CliError::Telemetry {
                    line: 0,
                    msg: format!("bad head meta: {e}"),
                })
        })
        .collect::<Result<_, _>>()?;
    let mut series: Vec<Vec<SpectralSnapshot>> = vec![Vec::new(); heads.len()];
    for r in records {
        if let TelemetryRecord::Snapshot(s) = r {
            let idx = heads
                .iter()
                .position(|h| h.head_id == s.head_id)
                .ok_or_else(|| CliError::Telemetry {
                    line: 0,
                    msg: format!("snapshot row for unknown head {}", s.head_id),
                })?;
            series[idx].push(s.to_snapshot((heads[idx].d_k, heads[idx].d_v)));
        }
    }
    for s in &mut series {
        s.sort_by_key(|snap| snap.step);
    }
    Ok((heads, series))
}

//! Library entry points behind the CLI subcommands.
//!
//! `simulate` runs every head of the configured layer (in parallel) and
//! writes snapshot telemetry.  `verify` builds trajectories — either from a
//! fresh in-memory run or from an existing telemetry file — and evaluates
//! the selected stability certificates; checks that need raw streams
//! (span-bound, lipschitz-increment) are capability errors in telemetry
//! mode.  `prune` scores saturation over the averaging window, selects the
//! mask, and emits the report plus a derived config without the pruned
//! heads.  `export` renders plot-ready CSV tables.

use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;
use crate::datagen;
use crate::dynamics::{
    self, consistency_report, ConsistencyRow, LayerRun, LayerTrajectory, MonotonicityAudit,
    RankKind, StabilityCertificate, TheoremKind,
};
use crate::error::CliError;
use crate::export;
use crate::pruning::{self, SaturationReport};
use crate::telemetry::{
    self, HeadMeta, MetaRecord, SnapshotRecord, TelemetryRecord, SCHEMA_VERSION,
};

/// A finished in-memory simulation plus its serialized records.
pub struct SimulationOutput {
    pub records: Vec<TelemetryRecord>,
    pub run: LayerRun,
}

/// Simulate the configured layer and build its telemetry records.
pub fn simulate(cfg: &ExperimentConfig) -> Result<SimulationOutput, CliError> {
    let heads = cfg.head_configs()?;
    let spec = cfg.stream_spec()?;
    let schedule = cfg.schedule()?;
    let tol = cfg.rank_tolerance()?;
    let run = dynamics::run_layer(&heads, &spec, &schedule, &tol)?;

    let top_k = if cfg.output.full_spectrum {
        usize::MAX
    } else {
        cfg.output.top_k
    };
    let mut records = Vec::with_capacity(1 + run.snapshots.iter().map(Vec::len).sum::<usize>());
    records.push(TelemetryRecord::Meta(MetaRecord {
        schema_version: SCHEMA_VERSION,
        experiment: cfg.experiment.id.clone(),
        seed: cfg.experiment.seed,
        rng: datagen::RNG_ALGORITHM.into(),
        layer_id: cfg.layer.layer_id,
        stream: cfg.stream.kind.clone(),
        length: cfg.stream.length,
        relative_eps: cfg.tolerance.relative_eps,
        heads: run.heads.iter().map(HeadMeta::from).collect(),
    }));
    // rows ordered by (head_id, step): heads are already id-sorted per config
    for snaps in &run.snapshots {
        for s in snaps {
            records.push(TelemetryRecord::Snapshot(SnapshotRecord::from_snapshot(
                s,
                cfg.layer.layer_id,
                top_k,
            )));
        }
    }
    Ok(SimulationOutput { records, run })
}

pub struct SimulateOutcome {
    pub telemetry_path: PathBuf,
    pub snapshot_rows: usize,
}

/// `simulate` subcommand: run and write the telemetry file.
pub fn cmd_simulate(
    cfg: &ExperimentConfig,
    out_override: Option<&Path>,
) -> Result<SimulateOutcome, CliError> {
    let out = simulate(cfg)?;
    let dir = out_override.map(Path::to_path_buf).unwrap_or_else(|| cfg.out_dir());
    let path = dir.join(&cfg.output.telemetry);
    telemetry::write_records(&path, &out.records)?;
    Ok(SimulateOutcome {
        telemetry_path: path,
        snapshot_rows: out.records.len() - 1,
    })
}

/// Everything `verify` needs: trajectories by rank kind, and streams when
/// the run was fresh.
struct VerifySource {
    effective: LayerTrajectory,
    algebraic: LayerTrajectory,
    streams: Option<Vec<Vec<crate::state::KVEvent>>>,
}

fn load_source(cfg: &ExperimentConfig, telemetry_path: Option<&Path>) -> Result<VerifySource, CliError> {
    match telemetry_path {
        Some(path) => {
            let records = telemetry::read_records(path)?;
            let (heads, series) = telemetry::snapshots_by_head(&records)?;
            Ok(VerifySource {
                effective: dynamics::build_trajectory(&heads, &series, RankKind::Effective)?,
                algebraic: dynamics::build_trajectory(&heads, &series, RankKind::Algebraic)?,
                streams: None,
            })
        }
        None => {
            let out = simulate(cfg)?;
            Ok(VerifySource {
                effective: out.run.trajectory(RankKind::Effective)?,
                algebraic: out.run.trajectory(RankKind::Algebraic)?,
                streams: Some(out.run.streams),
            })
        }
    }
}

pub struct VerifyOutcome {
    pub certificates: Vec<StabilityCertificate>,
    /// Human-readable context: precondition audits, measured bounds.
    pub notes: Vec<String>,
    pub all_passed: bool,
    /// Where the certificate rows were written.
    pub certificates_path: Option<PathBuf>,
}

fn audit_note(kind: &str, audit: &MonotonicityAudit) -> String {
    if audit.is_clean() {
        format!("{kind}-rank monotonicity: clean (no dips)")
    } else {
        format!(
            "{kind}-rank monotonicity: {} dip(s) audited (reported, not failed)",
            audit.dips.len()
        )
    }
}

/// `verify` subcommand: evaluate the selected certificates and write them
/// as certificate rows next to the other outputs.
pub fn cmd_verify(
    cfg: &ExperimentConfig,
    telemetry_path: Option<&Path>,
    out_override: Option<&Path>,
) -> Result<VerifyOutcome, CliError> {
    let theorems = cfg.theorems()?;
    if theorems.is_empty() {
        return Err(CliError::Config("verify.theorems must be nonempty".into()));
    }
    let source = load_source(cfg, telemetry_path)?;
    let mut certificates = Vec::new();
    let mut notes = Vec::new();

    let need_streams = |check: &str| -> Result<&Vec<Vec<crate::state::KVEvent>>, CliError> {
        source.streams.as_ref().ok_or_else(|| CliError::MissingStreams {
            check: check.into(),
        })
    };

    for kind in theorems {
        match kind {
            TheoremKind::RankBound => {
                certificates.push(dynamics::verify_rank_bound(&source.algebraic));
            }
            TheoremKind::StepGrowth => {
                certificates.push(dynamics::verify_step_growth(&source.algebraic));
            }
            TheoremKind::SpanBound => {
                let streams = need_streams("span-bound")?;
                let (cert, trackers) = dynamics::verify_span_bound(streams, &source.algebraic)?;
                let bounds: Vec<usize> = trackers.iter().map(|t| t.intrinsic_bound()).collect();
                notes.push(format!("span-bound: intrinsic per-head ceilings {bounds:?}"));
                certificates.push(cert);
            }
            TheoremKind::RecursiveCosine => {
                let out = dynamics::verify_recursive_cosine(&source.algebraic, cfg.verify.cos_eps)?;
                notes.push(audit_note("algebraic", &out.audit));
                certificates.push(out.certificate);
                // the effective-rank trajectory is audited, never failed
                match dynamics::verify_recursive_cosine(&source.effective, cfg.verify.cos_eps) {
                    Ok(eff) => notes.push(audit_note("effective", &eff.audit)),
                    Err(e) => notes.push(format!("effective-rank audit unavailable: {e}")),
                }
            }
            TheoremKind::MonotoneSupport => {
                let out = dynamics::verify_recursive_cosine(&source.algebraic, cfg.verify.cos_eps)?;
                certificates.push(out.support_certificate);
            }
            TheoremKind::NormStability => {
                let out = dynamics::verify_norm_stability(&source.effective, cfg.verify.norm_bound)?;
                notes.push(format!(
                    "norm-stability: B = {} ({}), final r_t = {:.3e}",
                    out.bound_used,
                    if cfg.verify.norm_bound.is_some() {
                        "supplied"
                    } else {
                        "measured tightest"
                    },
                    out.relative_steps.last().copied().unwrap_or(f64::NAN),
                ));
                certificates.push(out.certificate);
            }
            TheoremKind::LipschitzIncrement => {
                let streams = need_streams("lipschitz-increment")?;
                certificates.push(dynamics::verify_lipschitz_increment(
                    streams,
                    &source.effective,
                )?);
            }
            TheoremKind::ToyCollinearity => {
                certificates.push(dynamics::verify_toy_collinearity(&source.effective)?);
            }
        }
    }

    let all_passed = certificates.iter().all(|c| c.passed);
    let dir = out_override.map(Path::to_path_buf).unwrap_or_else(|| cfg.out_dir());
    let certificates_path = dir.join("certificates.jsonl");
    let rows: Vec<TelemetryRecord> = certificates
        .iter()
        .cloned()
        .map(TelemetryRecord::Certificate)
        .collect();
    telemetry::write_records(&certificates_path, &rows)?;
    Ok(VerifyOutcome {
        certificates,
        notes,
        all_passed,
        certificates_path: Some(certificates_path),
    })
}

pub struct PruneOutcome {
    pub report: SaturationReport,
    pub high_rank: Vec<usize>,
    pub low_rank: Vec<usize>,
    pub report_path: PathBuf,
    pub pruned_config_path: PathBuf,
}

/// `prune` subcommand: saturation scores, mask, memory accounting, and the
/// derived config with masked heads removed.
pub fn cmd_prune(
    cfg: &ExperimentConfig,
    telemetry_path: &Path,
    out_override: Option<&Path>,
) -> Result<PruneOutcome, CliError> {
    let records = telemetry::read_records(telemetry_path)?;
    let (heads, series) = telemetry::snapshots_by_head(&records)?;
    let traj = dynamics::build_trajectory(&heads, &series, RankKind::Effective)?;
    let sat_cfg = cfg.saturation_config()?;
    let report = pruning::select_prune(pruning::saturation_scores(&traj, &sat_cfg)?, &sat_cfg);
    let (high_rank, low_rank) =
        pruning::rank_group_split(&traj, sat_cfg.window, cfg.saturation.threshold_ratio)?;

    let survivors: Vec<usize> = report
        .head_ids
        .iter()
        .zip(&report.prune_mask)
        .filter(|(_, &m)| !m)
        .map(|(&id, _)| id)
        .collect();
    let derived = cfg.with_surviving_heads(survivors);

    let dir = out_override.map(Path::to_path_buf).unwrap_or_else(|| cfg.out_dir());
    std::fs::create_dir_all(&dir)?;
    let report_path = dir.join("saturation.jsonl");
    telemetry::write_records(&report_path, &[TelemetryRecord::Saturation(report.clone())])?;
    let pruned_config_path = dir.join("pruned_config.toml");
    std::fs::write(&pruned_config_path, derived.to_toml())?;

    Ok(PruneOutcome {
        report,
        high_rank,
        low_rank,
        report_path,
        pruned_config_path,
    })
}

/// Default scatter pairs: the standard consistency steps when recorded,
/// otherwise spread over the recorded range.
pub fn default_pairs(steps: &[usize]) -> Vec<(usize, usize)> {
    let standard = [64usize, 128, 192];
    if standard.iter().all(|s| steps.contains(s)) {
        return vec![(64, 128), (128, 192)];
    }
    match steps.len() {
        0 | 1 => vec![],
        2 => vec![(steps[0], steps[1])],
        n => vec![(steps[0], steps[n / 2]), (steps[n / 2], steps[n - 1])],
    }
}

/// `export` subcommand: CSV tables plus the consistency report rows.
pub fn cmd_export(
    telemetry_path: &Path,
    pairs: Option<Vec<(usize, usize)>>,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    let records = telemetry::read_records(telemetry_path)?;
    let rows: Vec<ConsistencyRow> = if records.is_empty() {
        Vec::new()
    } else {
        let (heads, series) = telemetry::snapshots_by_head(&records)?;
        if series.iter().all(|s| s.is_empty()) {
            Vec::new()
        } else {
            let traj = dynamics::build_trajectory(&heads, &series, RankKind::Effective)?;
            let pairs = pairs.unwrap_or_else(|| default_pairs(traj.steps()));
            consistency_report(&traj, &pairs)?
        }
    };
    let mut written = export::export_all(&records, &rows, out_dir)?;
    let reports_path = out_dir.join("reports.jsonl");
    let report_rows: Vec<TelemetryRecord> =
        rows.into_iter().map(TelemetryRecord::Report).collect();
    telemetry::write_records(&reports_path, &report_rows)?;
    written.push(reports_path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(toml: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(toml).unwrap()
    }

    const SMOKE: &str = r#"
        [experiment]
        id = "smoke"
        seed = 9

        [layer]
        heads = 2
        d_k = 4

        [stream]
        kind = "gaussian"
        length = 8
    "#;

    #[test]
    fn simulate_emits_meta_plus_snapshot_rows() {
        let out = simulate(&cfg(SMOKE)).unwrap();
        // 2 heads x 8 steps + meta
        assert_eq!(out.records.len(), 1 + 16);
        assert!(matches!(out.records[0], TelemetryRecord::Meta(_)));
        let bytes_a = serde_json::to_string(&out.records).unwrap();
        let bytes_b = serde_json::to_string(&simulate(&cfg(SMOKE)).unwrap().records).unwrap();
        assert_eq!(bytes_a, bytes_b, "simulation is deterministic");
    }

    #[test]
    fn full_spectrum_flag_stores_every_singular_value() {
        let truncated = simulate(&cfg(SMOKE)).unwrap();
        let full = simulate(&cfg(&(SMOKE.to_string() + "\n[output]\nfull_spectrum = true\n"))).unwrap();
        let spectra = |out: &SimulationOutput| -> Vec<usize> {
            out.records
                .iter()
                .filter_map(|r| match r {
                    TelemetryRecord::Snapshot(s) => Some(s.top_k_singular_values.len()),
                    _ => None,
                })
                .collect()
        };
        assert!(spectra(&truncated).iter().all(|&n| n == 4)); // d = 4 < top_k = 8
        assert!(spectra(&full).iter().all(|&n| n == 4));
        let short = simulate(&cfg(&SMOKE.replace("d_k = 4", "d_k = 12"))).unwrap();
        assert!(spectra(&short).iter().all(|&n| n == 8)); // truncated to top_k
        let wide = simulate(
            &cfg(&(SMOKE.replace("d_k = 4", "d_k = 12") + "\n[output]\nfull_spectrum = true\n")),
        )
        .unwrap();
        assert!(spectra(&wide).iter().all(|&n| n == 12));
    }

    #[test]
    fn verify_fresh_run_has_stream_capabilities() {
        let text = SMOKE.to_string()
            + "\n[verify]\ntheorems = [\"rank-bound\", \"span-bound\", \"lipschitz-increment\"]\n";
        let dir = std::env::temp_dir().join("statelab-cmd-test-fresh");
        let out = cmd_verify(&cfg(&text), None, Some(&dir)).unwrap();
        assert!(out.all_passed);
        assert_eq!(out.certificates.len(), 3);
    }

    #[test]
    fn verify_from_telemetry_rejects_stream_checks() {
        let dir = std::env::temp_dir().join("statelab-cmd-test-span");
        let c = cfg(&(SMOKE.to_string() + "\n[verify]\ntheorems = [\"span-bound\"]\n"));
        let sim = cmd_simulate(&c, Some(&dir)).unwrap();
        match cmd_verify(&c, Some(&sim.telemetry_path), Some(&dir)) {
            Err(CliError::MissingStreams { check }) => assert_eq!(check, "span-bound"),
            other => panic!("expected capability error, got {:?}", other.map(|o| o.all_passed)),
        }
    }

    #[test]
    fn default_pair_selection() {
        assert_eq!(
            default_pairs(&[64, 128, 192, 256]),
            vec![(64, 128), (128, 192)]
        );
        assert_eq!(default_pairs(&[10, 20]), vec![(10, 20)]);
        assert_eq!(default_pairs(&[5]), vec![]);
        assert_eq!(
            default_pairs(&[1, 2, 3, 4, 5]),
            vec![(1, 3), (3, 5)]
        );
    }
}

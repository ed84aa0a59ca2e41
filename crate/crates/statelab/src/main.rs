//! Thin CLI over the statelab library.
//!
//! Exit codes are the machine contract for CI gating:
//! 0 = success / all certificates pass, 1 = certificate violation,
//! 2 = configuration or capability error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use statelab::commands;
use statelab::config::{parse_pairs_flag, parse_schedule_flag, ExperimentConfig, OUT_DIR_ENV};
use statelab::error::CliError;

#[derive(Parser)]
#[command(
    name = "statelab",
    version,
    about = "Spectral telemetry, stability certificates, and rank-norm pruning for linear-attention state matrices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every head of the configured layer and write snapshot telemetry
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides config and STATELAB_OUT_DIR)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config seed
        #[arg(long)]
        seed: Option<u64>,
        /// Snapshot schedule: 'every:N' or a comma-separated step list
        #[arg(long)]
        schedule: Option<String>,
    },
    /// Evaluate stability certificates on a fresh run or a telemetry file
    Verify {
        #[arg(long)]
        config: PathBuf,
        /// Verify this telemetry file instead of running fresh (stream-based
        /// checks are unavailable in this mode)
        #[arg(long)]
        telemetry: Option<PathBuf>,
        /// Comma-separated theorem list (overrides config)
        #[arg(long)]
        theorems: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        schedule: Option<String>,
        /// Directory for the certificate rows
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Saturation scores, prune mask, memory savings, derived config
    Prune {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        telemetry: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit plot-ready CSV tables from a telemetry file
    Export {
        #[arg(long)]
        telemetry: PathBuf,
        /// Output format (only csv)
        #[arg(long, default_value = "csv")]
        format: String,
        /// Scatter step pairs, e.g. 64:128,128:192
        #[arg(long)]
        pairs: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(
    path: &Path,
    seed: Option<u64>,
    schedule: Option<&str>,
) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(seed) = seed {
        cfg.experiment.seed = seed;
    }
    if let Some(s) = schedule {
        cfg.snapshots = parse_schedule_flag(s)?;
        cfg.schedule()?; // revalidate against the stream length
    }
    Ok(cfg)
}

fn run() -> Result<bool, CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate {
            config,
            out,
            seed,
            schedule,
        } => {
            let cfg = load_config(&config, seed, schedule.as_deref())?;
            let outcome = commands::cmd_simulate(&cfg, out.as_deref())?;
            println!(
                "wrote {} snapshot rows to {}",
                outcome.snapshot_rows,
                outcome.telemetry_path.display()
            );
            Ok(true)
        }
        Command::Verify {
            config,
            telemetry,
            theorems,
            seed,
            schedule,
            out,
        } => {
            let mut cfg = load_config(&config, seed, schedule.as_deref())?;
            if let Some(list) = theorems {
                cfg.verify.theorems = list.split(',').map(|s| s.trim().to_string()).collect();
            }
            let outcome = commands::cmd_verify(&cfg, telemetry.as_deref(), out.as_deref())?;
            for cert in &outcome.certificates {
                println!(
                    "{:<22} {}  worst margin {:+.6e}  (checks: {}, violations: {})",
                    cert.theorem.name(),
                    if cert.passed { "PASS" } else { "FAIL" },
                    cert.worst_margin,
                    cert.checks,
                    cert.violations.len()
                );
                for v in cert.violations.iter().take(5) {
                    match v.head {
                        Some(h) => println!(
                            "  violation at step {}, head {}: observed {} vs bound {}",
                            v.step, h, v.observed, v.bound
                        ),
                        None => println!(
                            "  violation at step {}: observed {} vs bound {}",
                            v.step, v.observed, v.bound
                        ),
                    }
                }
            }
            for note in &outcome.notes {
                println!("note: {note}");
            }
            if let Some(p) = &outcome.certificates_path {
                println!("certificates: {}", p.display());
            }
            Ok(outcome.all_passed)
        }
        Command::Prune {
            config,
            telemetry,
            out,
        } => {
            let cfg = load_config(&config, None, None)?;
            let outcome = commands::cmd_prune(&cfg, &telemetry, out.as_deref())?;
            println!(
                "pruned {} of {} heads: {:?}",
                outcome.report.pruned_head_ids().len(),
                outcome.report.head_ids.len(),
                outcome.report.pruned_head_ids()
            );
            println!("memory savings: {:.1}%", outcome.report.memory_savings * 100.0);
            println!(
                "rank groups at threshold: high={:?} low={:?}",
                outcome.high_rank, outcome.low_rank
            );
            println!("report: {}", outcome.report_path.display());
            println!("derived config: {}", outcome.pruned_config_path.display());
            Ok(true)
        }
        Command::Export {
            telemetry,
            format,
            pairs,
            out,
        } => {
            if format != "csv" {
                return Err(CliError::Config(format!(
                    "--format: unknown format '{format}' (only csv)"
                )));
            }
            let pairs = pairs.as_deref().map(parse_pairs_flag).transpose()?;
            let out_dir = out.unwrap_or_else(|| {
                std::env::var(OUT_DIR_ENV)
                    .ok()
                    .filter(|s| !s.is_empty())
                    .map(PathBuf::from)
                    .unwrap_or_else(|| PathBuf::from("out"))
            });
            let written = commands::cmd_export(&telemetry, pairs, &out_dir)?;
            for p in written {
                println!("wrote {}", p.display());
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

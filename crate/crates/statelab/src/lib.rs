//! statelab — a simulation and verification lab for the recurrent state
//! matrices of linear-attention heads.
//!
//! Linear-attention heads compress context into a fixed-size state matrix
//! updated by rank-one writes.  This crate runs those update rules on
//! synthetic key/value streams, tracks the spectral telemetry (effective
//! rank, nuclear norm) per head, certifies the stability properties that
//! govern layer-level rank and norm vectors, and implements joint rank-norm
//! pruning with transparent memory accounting.
//!
//! ## Modules
//!
//! * [`state`] — update rules (standard, gated, delta) and readout for one head
//! * [`spectral`] — singular values, effective rank, nuclear norm, cosine, Spearman
//! * [`datagen`] — seeded synthetic stream generators for each input regime
//! * [`dynamics`] — layer trajectories and stability certificates
//! * [`pruning`] — saturation scores, head selection, memory savings
//! * [`config`] / [`telemetry`] / [`export`] / [`commands`] — experiment
//!   configuration, line-delimited telemetry, CSV export, CLI entry points
//!
//! ## Examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run --release --example rank_bound          # state-rank upper bound sweep
//! cargo run --release --example delta_rule          # both delta-update forms agree
//! cargo run --release --example subspace_bounds     # key/value span ceilings
//! cargo run --release --example periodic_loop       # repetitive inputs cap rank
//! cargo run --release --example stratification     # high/low-rank head bifurcation
//! cargo run --release --example consistency         # temporal consistency metrics
//! cargo run --release --example norm_stability      # norm-vector directional stability
//! cargo run --release --example toy_model           # exact collinearity oracle
//! cargo run --release --example prune_heads         # joint rank-norm pruning
//! ```
//!
//! The `statelab` binary drives the same machinery from declarative TOML
//! configs: `statelab simulate|verify|prune|export`.

pub mod config;
pub mod commands;
pub mod datagen;
pub mod dynamics;
pub mod error;
pub mod export;
pub mod pruning;
pub mod spectral;
pub mod state;
pub mod telemetry;

pub use error::{CliError, DatagenError, DynamicsError, PruneError, SpectralError, StateError};

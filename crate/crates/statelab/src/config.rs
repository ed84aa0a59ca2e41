//! Declarative experiment configuration.
//!
//! One TOML file describes a whole experiment: the layer (head count, dims,
//! update rule), the input stream, the snapshot schedule, tolerances, the
//! verification selection, saturation scoring, and output paths.  Every
//! field has a documented default; a minimal config is just
//!
//! ```toml
//! [experiment]
//! id = "smoke"
//!
//! [layer]
//! heads = 1
//! d_k = 4
//!
//! [stream]
//! kind = "gaussian"
//! length = 8
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datagen::{FactorSchedule, ScalarSchedule, StreamKind, StreamSpec};
use crate::dynamics::TheoremKind;
use crate::error::CliError;
use crate::pruning::SaturationConfig;
use crate::spectral::RankTolerance;
use crate::state::{HeadConfig, UpdateRule};

/// Environment variable overriding the output directory.
pub const OUT_DIR_ENV: &str = "STATELAB_OUT_DIR";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub layer: LayerSection,
    pub stream: StreamSection,
    #[serde(default)]
    pub snapshots: SnapshotSection,
    #[serde(default)]
    pub tolerance: ToleranceSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub saturation: SaturationSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub id: String,
    /// Master seed; per-head streams derive from it.  Default 0.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSection {
    #[serde(default)]
    pub layer_id: usize,
    /// Number of heads.  Ignored when `head_ids` is given.
    #[serde(default)]
    pub heads: usize,
    /// Explicit head ids (used by pruned configs so survivors keep their
    /// original streams).  Default: 0..heads.
    #[serde(default)]
    pub head_ids: Option<Vec<usize>>,
    pub d_k: usize,
    /// Default: d_k (square states).
    #[serde(default)]
    pub d_v: Option<usize>,
    /// "standard" | "gated" | "deltanet".  Default "standard".
    #[serde(default = "default_rule")]
    pub rule: String,
}

fn default_rule() -> String {
    "standard".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamSection {
    /// "gaussian" | "subspace" | "periodic" | "toy" | "mixture".
    pub kind: String,
    pub length: usize,
    /// subspace: span dimensions of keys / values.
    #[serde(default)]
    pub m_k: Option<usize>,
    #[serde(default)]
    pub m_v: Option<usize>,
    /// periodic: number of distinct events (the period).
    #[serde(default)]
    pub unique: Option<usize>,
    /// toy: per-head (a_h, b_h); default (1, 1) for every head.
    #[serde(default)]
    pub scales: Option<Vec<(f64, f64)>>,
    /// toy: constant global factors.  Default 1.0 each.
    #[serde(default)]
    pub factor_alpha: Option<f64>,
    #[serde(default)]
    pub factor_beta: Option<f64>,
    /// mixture: head counts per group and the low-group span dims.
    #[serde(default)]
    pub full_span: Option<usize>,
    #[serde(default)]
    pub low_rank: Option<usize>,
    #[serde(default)]
    pub low_m_k: Option<usize>,
    #[serde(default)]
    pub low_m_v: Option<usize>,
    /// Constant retention gate per event.  Default 1.0.
    #[serde(default)]
    pub gate: Option<f64>,
    /// Constant write strength per event.  Default 1.0.
    #[serde(default)]
    pub lr: Option<f64>,
    /// L2-normalize keys.  Default: true iff the rule is "deltanet" (the
    /// delta projection step is a contraction only for unit-scale keys).
    #[serde(default)]
    pub normalize_keys: Option<bool>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotSection {
    /// Record every Nth step.  Default 1 (every step).
    #[serde(default)]
    pub every: Option<usize>,
    /// Explicit 1-based steps; overrides `every`.
    #[serde(default)]
    pub steps: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSection {
    /// Effective-rank threshold (fraction of the top singular value).
    pub relative_eps: f64,
}

impl Default for ToleranceSection {
    fn default() -> Self {
        Self {
            relative_eps: RankTolerance::DEFAULT_EPS,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    /// Kebab-case theorem names; see `statelab verify --help` for the list.
    #[serde(default = "default_theorems")]
    pub theorems: Vec<String>,
    /// Cosine slack for the recursive-stability check.  Default 0.1.
    #[serde(default = "default_cos_eps")]
    pub cos_eps: f64,
    /// Explicit increment bound B for norm stability.  Default: the
    /// tightest valid constant measured from the trajectory.
    #[serde(default)]
    pub norm_bound: Option<f64>,
}

fn default_theorems() -> Vec<String> {
    vec!["rank-bound".into()]
}

fn default_cos_eps() -> f64 {
    0.1
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            theorems: default_theorems(),
            cos_eps: default_cos_eps(),
            norm_bound: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaturationSection {
    /// Mixing weight of the rank term.  Default 0.5 (equal weighting).
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Averaging window [t_lo, t_hi].  Default: [min(d, T), T], the
    /// post-growth regime.
    #[serde(default)]
    pub window: Option<(usize, usize)>,
    /// Fraction of heads to prune.  Default 0.0.
    #[serde(default)]
    pub prune_fraction: f64,
    /// Mean-rank/d threshold for the high/low rank group split.  Default 0.9.
    #[serde(default = "default_threshold_ratio")]
    pub threshold_ratio: f64,
}

fn default_alpha() -> f64 {
    0.5
}

fn default_threshold_ratio() -> f64 {
    0.9
}

impl Default for SaturationSection {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            window: None,
            prune_fraction: 0.0,
            threshold_ratio: default_threshold_ratio(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Output directory.  Overridden by `STATELAB_OUT_DIR`, then `--out`.
    #[serde(default = "default_out_dir")]
    pub dir: String,
    #[serde(default = "default_telemetry_name")]
    pub telemetry: String,
    /// Singular values stored per snapshot row.  Default 8.
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    /// Store the full spectrum instead of the top k.
    #[serde(default)]
    pub full_spectrum: bool,
}

fn default_out_dir() -> String {
    "out".into()
}

fn default_telemetry_name() -> String {
    "telemetry.jsonl".into()
}

fn default_top_k() -> usize {
    8
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_out_dir(),
            telemetry: default_telemetry_name(),
            top_k: default_top_k(),
            full_spectrum: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    fn validate(&self) -> Result<(), CliError> {
        self.rule()?;
        self.head_configs()?;
        self.stream_spec()?;
        self.rank_tolerance()?;
        self.theorems()?;
        if self.stream.length == 0 {
            return Err(CliError::Config("stream.length must be >= 1".into()));
        }
        Ok(())
    }

    pub fn rule(&self) -> Result<UpdateRule, CliError> {
        match self.layer.rule.as_str() {
            "standard" => Ok(UpdateRule::StandardLinear),
            "gated" => Ok(UpdateRule::GatedLinear),
            "deltanet" => Ok(UpdateRule::DeltaNet),
            other => Err(CliError::Config(format!(
                "layer.rule: unknown rule '{other}' (expected standard | gated | deltanet)"
            ))),
        }
    }

    pub fn d_v(&self) -> usize {
        self.layer.d_v.unwrap_or(self.layer.d_k)
    }

    /// Head ids this experiment simulates (survivor subsets keep their ids).
    pub fn head_ids(&self) -> Vec<usize> {
        match &self.layer.head_ids {
            Some(ids) => ids.clone(),
            None => (0..self.layer.heads).collect(),
        }
    }

    pub fn head_configs(&self) -> Result<Vec<HeadConfig>, CliError> {
        let rule = self.rule()?;
        let ids = self.head_ids();
        if ids.is_empty() {
            return Err(CliError::Config(
                "layer.heads must be >= 1 (or layer.head_ids nonempty)".into(),
            ));
        }
        ids.iter()
            .map(|&h| {
                HeadConfig::new(self.layer.d_k, self.d_v(), rule, h, self.layer.layer_id)
                    .map_err(|e| CliError::Config(format!("layer: {e}")))
            })
            .collect()
    }

    /// Total number of heads the stream spec must parameterize (the max head
    /// id + 1, so pruned configs still address the original streams).
    fn stream_head_count(&self) -> usize {
        self.head_ids().iter().copied().max().map_or(0, |m| m + 1)
    }

    pub fn stream_spec(&self) -> Result<StreamSpec, CliError> {
        let s = &self.stream;
        let kind = match s.kind.as_str() {
            "gaussian" => StreamKind::Gaussian,
            "subspace" => StreamKind::SubspaceConstrained {
                m_k: s.m_k.ok_or_else(|| missing("stream.m_k", "subspace"))?,
                m_v: s.m_v.ok_or_else(|| missing("stream.m_v", "subspace"))?,
            },
            "periodic" => StreamKind::PeriodicLoop {
                unique: s.unique.ok_or_else(|| missing("stream.unique", "periodic"))?,
            },
            "toy" => {
                let scales = s
                    .scales
                    .clone()
                    .unwrap_or_else(|| vec![(1.0, 1.0); self.stream_head_count()]);
                StreamKind::ToyModel {
                    scales,
                    factors: FactorSchedule::Constant {
                        alpha: s.factor_alpha.unwrap_or(1.0),
                        beta: s.factor_beta.unwrap_or(1.0),
                    },
                }
            }
            "mixture" => {
                let full = s.full_span.ok_or_else(|| missing("stream.full_span", "mixture"))?;
                let low = s.low_rank.ok_or_else(|| missing("stream.low_rank", "mixture"))?;
                if full + low != self.stream_head_count() {
                    return Err(CliError::Config(format!(
                        "stream: full_span + low_rank = {} must cover the {} head ids",
                        full + low,
                        self.stream_head_count()
                    )));
                }
                let mut labels = vec![true; full];
                labels.resize(full + low, false);
                StreamKind::Mixture {
                    labels,
                    low_m_k: s.low_m_k.ok_or_else(|| missing("stream.low_m_k", "mixture"))?,
                    low_m_v: s.low_m_v.ok_or_else(|| missing("stream.low_m_v", "mixture"))?,
                }
            }
            other => {
                return Err(CliError::Config(format!(
                    "stream.kind: unknown kind '{other}' (expected gaussian | subspace | periodic | toy | mixture)"
                )))
            }
        };
        let normalize = s
            .normalize_keys
            .unwrap_or(self.rule()? == UpdateRule::DeltaNet);
        let mut spec = StreamSpec::new(
            kind,
            s.length,
            self.experiment.seed,
            self.layer.d_k,
            self.d_v(),
        );
        spec.gate = ScalarSchedule::Constant(s.gate.unwrap_or(1.0));
        spec.lr = ScalarSchedule::Constant(s.lr.unwrap_or(1.0));
        spec.normalize_keys = normalize;
        Ok(spec)
    }

    /// Resolve the snapshot schedule over a stream of length T.
    pub fn schedule(&self) -> Result<Vec<usize>, CliError> {
        let t = self.stream.length;
        if let Some(steps) = &self.snapshots.steps {
            let mut steps = steps.clone();
            steps.sort_unstable();
            steps.dedup();
            if steps.iter().any(|&s| s == 0 || s > t) {
                return Err(CliError::Config(format!(
                    "snapshots.steps must lie in 1..={t}"
                )));
            }
            return Ok(steps);
        }
        let every = self.snapshots.every.unwrap_or(1);
        if every == 0 {
            return Err(CliError::Config("snapshots.every must be >= 1".into()));
        }
        Ok((1..=t).filter(|s| s % every == 0 || *s == t).collect())
    }

    pub fn rank_tolerance(&self) -> Result<RankTolerance, CliError> {
        RankTolerance::new(self.tolerance.relative_eps)
            .map_err(|e| CliError::Config(format!("tolerance: {e}")))
    }

    pub fn theorems(&self) -> Result<Vec<TheoremKind>, CliError> {
        self.verify
            .theorems
            .iter()
            .map(|name| {
                TheoremKind::parse(name).ok_or_else(|| {
                    CliError::Config(format!(
                        "verify.theorems: unknown theorem '{name}' (expected one of {})",
                        TheoremKind::ALL.map(|k| k.name()).join(", ")
                    ))
                })
            })
            .collect()
    }

    /// Saturation config with the documented window default: the post-growth
    /// regime [min(d, T), T].
    pub fn saturation_config(&self) -> Result<SaturationConfig, CliError> {
        let t = self.stream.length;
        let d = self.layer.d_k.min(self.d_v());
        let window = self.saturation.window.unwrap_or((d.min(t), t));
        SaturationConfig::new(self.saturation.alpha, window, self.saturation.prune_fraction)
            .map_err(|e| CliError::Config(format!("saturation: {e}")))
    }

    /// Output directory after the env-var override.
    pub fn out_dir(&self) -> std::path::PathBuf {
        match std::env::var(OUT_DIR_ENV) {
            Ok(dir) if !dir.is_empty() => dir.into(),
            _ => self.output.dir.clone().into(),
        }
    }

    /// Derived config with only the surviving heads, written by `prune`.
    pub fn with_surviving_heads(&self, survivors: Vec<usize>) -> Self {
        let mut out = self.clone();
        out.layer.heads = survivors.len();
        out.layer.head_ids = Some(survivors);
        out
    }
}

fn missing(field: &str, kind: &str) -> CliError {
    CliError::Config(format!("{field} is required for stream.kind = \"{kind}\""))
}

/// Parse a `--schedule` flag: either `every:N` or a comma-separated list.
pub fn parse_schedule_flag(s: &str) -> Result<SnapshotSection, CliError> {
    if let Some(n) = s.strip_prefix("every:") {
        let every: usize = n
            .parse()
            .map_err(|_| CliError::Config(format!("--schedule: bad step count '{n}'")))?;
        return Ok(SnapshotSection {
            every: Some(every),
            steps: None,
        });
    }
    let steps: Result<Vec<usize>, _> = s.split(',').map(|p| p.trim().parse()).collect();
    match steps {
        Ok(steps) if !steps.is_empty() => Ok(SnapshotSection {
            every: None,
            steps: Some(steps),
        }),
        _ => Err(CliError::Config(format!(
            "--schedule: expected 'every:N' or a comma-separated step list, got '{s}'"
        ))),
    }
}

/// Parse a `--pairs` flag: `64:128,128:192`.
pub fn parse_pairs_flag(s: &str) -> Result<Vec<(usize, usize)>, CliError> {
    s.split(',')
        .map(|p| {
            let (a, b) = p
                .split_once(':')
                .ok_or_else(|| CliError::Config(format!("--pairs: expected t1:t2, got '{p}'")))?;
            let a = a
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("--pairs: bad step '{a}'")))?;
            let b = b
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("--pairs: bad step '{b}'")))?;
            Ok((a, b))
        })
        .collect()
}

//! Joint rank-norm pruning: saturation scoring, head selection, mask
//! application, and memory accounting.
//!
//! The saturation score of head `h` is the convex combination
//!
//! ```text
//! S_h = alpha * (mean_rank_h / d_h) + (1 - alpha) * (mean_norm_h / max_j mean_norm_j)
//! ```
//!
//! with the means taken over an averaging window of recorded steps.  Higher
//! score means higher saturation/redundancy; pruning removes the heads with
//! the top-k% scores, permanently (no state allocation, no updates, no
//! telemetry).  Norms are averaged raw and then normalized by the max of the
//! averages.

use serde::{Deserialize, Serialize};

use crate::dynamics::LayerTrajectory;
use crate::error::PruneError;
use crate::state::HeadConfig;

/// Scoring and selection parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationConfig {
    /// Mixing weight of the rank term, in [0, 1].
    pub alpha: f64,
    /// Averaging window `[t_lo, t_hi]` over recorded steps (inclusive).
    pub window: (usize, usize),
    /// Fraction of heads to prune, in [0, 1).
    pub prune_fraction: f64,
}

impl SaturationConfig {
    pub fn new(alpha: f64, window: (usize, usize), prune_fraction: f64) -> Result<Self, PruneError> {
        if !(0.0..=1.0).contains(&alpha) || !alpha.is_finite() {
            return Err(PruneError::InvalidAlpha { alpha });
        }
        if !(0.0..1.0).contains(&prune_fraction) {
            return Err(PruneError::InvalidFraction {
                fraction: prune_fraction,
            });
        }
        if window.0 > window.1 {
            return Err(PruneError::EmptyWindow {
                lo: window.0,
                hi: window.1,
            });
        }
        Ok(Self {
            alpha,
            window,
            prune_fraction,
        })
    }
}

/// Per-head scores, window means, prune mask, and the resulting memory
/// savings.  All vectors are indexed like the trajectory's head list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationReport {
    pub head_ids: Vec<usize>,
    /// Per-head state size in scalars (d_k * d_v).
    pub head_sizes: Vec<usize>,
    pub scores: Vec<f64>,
    pub mean_ranks: Vec<f64>,
    pub mean_norms: Vec<f64>,
    pub prune_mask: Vec<bool>,
    pub memory_savings: f64,
}

impl SaturationReport {
    pub fn pruned_head_ids(&self) -> Vec<usize> {
        self.head_ids
            .iter()
            .zip(&self.prune_mask)
            .filter(|(_, &m)| m)
            .map(|(&id, _)| id)
            .collect()
    }
}

fn window_indices(traj: &LayerTrajectory, window: (usize, usize)) -> Result<Vec<usize>, PruneError> {
    let idx: Vec<usize> = traj
        .steps()
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= window.0 && t <= window.1)
        .map(|(i, _)| i)
        .collect();
    if idx.is_empty() {
        return Err(PruneError::WindowOutsideRecorded {
            lo: window.0,
            hi: window.1,
        });
    }
    Ok(idx)
}

/// Compute saturation scores over the averaging window.  The returned report
/// has an all-false mask; selection happens in [`select_prune`].
pub fn saturation_scores(
    traj: &LayerTrajectory,
    cfg: &SaturationConfig,
) -> Result<SaturationReport, PruneError> {
    let idx = window_indices(traj, cfg.window)?;
    let h = traj.head_count();
    let mut mean_ranks = vec![0.0; h];
    let mut mean_norms = vec![0.0; h];
    for &i in &idx {
        for j in 0..h {
            mean_ranks[j] += traj.rank_vectors()[i][j];
            mean_norms[j] += traj.norm_vectors()[i][j];
        }
    }
    let count = idx.len() as f64;
    for j in 0..h {
        mean_ranks[j] /= count;
        mean_norms[j] /= count;
    }
    let max_norm = mean_norms.iter().cloned().fold(0.0f64, f64::max);
    if max_norm <= 0.0 || !max_norm.is_finite() {
        return Err(PruneError::DegenerateNorms);
    }
    let scores = traj
        .heads
        .iter()
        .enumerate()
        .map(|(j, head)| {
            let d = head.d_k.min(head.d_v) as f64;
            cfg.alpha * (mean_ranks[j] / d) + (1.0 - cfg.alpha) * (mean_norms[j] / max_norm)
        })
        .collect();
    Ok(SaturationReport {
        head_ids: traj.heads.iter().map(|c| c.head_id).collect(),
        head_sizes: traj.heads.iter().map(|c| c.state_size()).collect(),
        scores,
        mean_ranks,
        mean_norms,
        prune_mask: vec![false; h],
        memory_savings: 0.0,
    })
}

/// Mark the `floor(prune_fraction * H)` highest-scoring heads for pruning.
/// Ties break toward the lower head id, so masks are deterministic.
pub fn select_prune(mut report: SaturationReport, cfg: &SaturationConfig) -> SaturationReport {
    let h = report.scores.len();
    let count = (cfg.prune_fraction * h as f64).floor() as usize;
    let mut order: Vec<usize> = (0..h).collect();
    order.sort_by(|&a, &b| {
        report.scores[b]
            .total_cmp(&report.scores[a])
            .then(report.head_ids[a].cmp(&report.head_ids[b]))
    });
    let mut mask = vec![false; h];
    for &j in order.iter().take(count) {
        mask[j] = true;
    }
    report.memory_savings = savings_fraction(&report.head_sizes, &mask);
    report.prune_mask = mask;
    report
}

/// Remove masked heads entirely: survivors keep their identity and order.
pub fn apply_mask(heads: &[HeadConfig], mask: &[bool]) -> Result<Vec<HeadConfig>, PruneError> {
    if heads.len() != mask.len() {
        return Err(PruneError::MaskLength {
            mask: mask.len(),
            heads: heads.len(),
        });
    }
    Ok(heads
        .iter()
        .zip(mask)
        .filter(|(_, &m)| !m)
        .map(|(c, _)| c.clone())
        .collect())
}

/// Fraction of state memory released by the mask:
/// `sum over pruned of d_k*d_v / sum over all of d_k*d_v`.
pub fn memory_savings(heads: &[HeadConfig], mask: &[bool]) -> Result<f64, PruneError> {
    if heads.len() != mask.len() {
        return Err(PruneError::MaskLength {
            mask: mask.len(),
            heads: heads.len(),
        });
    }
    let sizes: Vec<usize> = heads.iter().map(|c| c.state_size()).collect();
    Ok(savings_fraction(&sizes, mask))
}

fn savings_fraction(sizes: &[usize], mask: &[bool]) -> f64 {
    let total: usize = sizes.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let pruned: usize = sizes.iter().zip(mask).filter(|(_, &m)| m).map(|(s, _)| s).sum();
    pruned as f64 / total as f64
}

/// Split heads into a high-rank group (`mean_rank / d >= threshold_ratio`)
/// and a low-rank group, by head id.
pub fn rank_group_split(
    traj: &LayerTrajectory,
    window: (usize, usize),
    threshold_ratio: f64,
) -> Result<(Vec<usize>, Vec<usize>), PruneError> {
    let idx = window_indices(traj, window)?;
    let count = idx.len() as f64;
    let mut high = Vec::new();
    let mut low = Vec::new();
    for (j, head) in traj.heads.iter().enumerate() {
        let mean_rank: f64 = idx.iter().map(|&i| traj.rank_vectors()[i][j]).sum::<f64>() / count;
        let d = head.d_k.min(head.d_v) as f64;
        if mean_rank / d >= threshold_ratio {
            high.push(head.head_id);
        } else {
            low.push(head.head_id);
        }
    }
    Ok((high, low))
}

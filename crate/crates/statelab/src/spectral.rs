//! Spectral metrics over state matrices: singular values, effective rank,
//! nuclear norm, cosine similarity, and Spearman rank correlation.
//!
//! Two distinct rank tolerances are in play and must not be conflated:
//!
//! * **Effective rank** counts singular values above a *relative* threshold
//!   `eps * sigma_1` with `eps = 1e-4` by default.  It is a noise-robust
//!   telemetry signal and is what the saturation scores consume.
//! * **Algebraic (numerical) rank** uses the conventional numerical-linear-
//!   algebra cutoff `max(d_k, d_v) * machine_epsilon * sigma_1`.  It is what
//!   the exact-rank theorems are certified against; the looser effective-rank
//!   threshold would mask violations and a tighter one would flag float noise.
//!   For states evolved through a recurrence, the cutoff is additionally
//!   anchored at the accumulated write magnitude so that a state whose
//!   coefficients cancel is measured as numerically zero instead of as
//!   full-rank roundoff noise (see [`algebraic_rank_with_scale`]).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::SpectralError;
use crate::state::StateMatrix;

/// Relative threshold for the effective-rank count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankTolerance {
    relative_eps: f64,
}

impl RankTolerance {
    pub const DEFAULT_EPS: f64 = 1e-4;

    pub fn new(relative_eps: f64) -> Result<Self, SpectralError> {
        if !(relative_eps > 0.0 && relative_eps < 1.0) {
            return Err(SpectralError::InvalidTolerance { eps: relative_eps });
        }
        Ok(Self { relative_eps })
    }

    pub fn relative_eps(&self) -> f64 {
        self.relative_eps
    }
}

impl Default for RankTolerance {
    fn default() -> Self {
        Self {
            relative_eps: Self::DEFAULT_EPS,
        }
    }
}

/// Full spectral readout of one head's state at one step.
///
/// `singular_values` is the complete spectrum in descending order; telemetry
/// may truncate it on disk, but in memory the snapshot carries everything the
/// verifiers need, including both rank counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSnapshot {
    pub step: usize,
    pub head_id: usize,
    /// State shape (d_k, d_v); needed to reproduce the algebraic cutoff.
    pub dims: (usize, usize),
    pub singular_values: Vec<f64>,
    pub effective_rank: usize,
    pub algebraic_rank: usize,
    pub nuclear_norm: f64,
    pub spectral_norm: f64,
}

/// Descending singular values of an arbitrary matrix.
pub fn singular_values(m: &DMatrix<f64>) -> Result<Vec<f64>, SpectralError> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(SpectralError::NonFinite);
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_unstable_by(|a, b| b.partial_cmp(a).expect("singular values are finite"));
    Ok(sv)
}

/// Effective rank of a descending spectrum: #{ i : sigma_i > eps * sigma_1 }.
/// The zero matrix has effective rank 0 by convention.
pub fn effective_rank(singular_values: &[f64], tol: &RankTolerance) -> usize {
    let sigma1 = singular_values.first().copied().unwrap_or(0.0);
    if sigma1 <= 0.0 {
        return 0;
    }
    let cutoff = tol.relative_eps * sigma1;
    singular_values.iter().filter(|&&s| s > cutoff).count()
}

/// Numerical rank under the conventional algebraic cutoff
/// `max_dim * machine_epsilon * sigma_1`.
pub fn algebraic_rank(singular_values: &[f64], max_dim: usize) -> usize {
    algebraic_rank_with_scale(singular_values, max_dim, 0.0)
}

/// Numerical rank with the cutoff anchored at
/// `max_dim * machine_epsilon * max(sigma_1, scale)`.
///
/// `scale` is the magnitude the matrix was accumulated from (see
/// [`crate::state::StateMatrix::magnitude_bound`]).  For a state whose
/// writes cancel, sigma_1 collapses while the roundoff noise keeps the
/// scale of the cancelled writes; a cutoff relative to sigma_1 alone would
/// then count that noise as rank.  With `scale = 0` this is exactly the
/// conventional cutoff.
pub fn algebraic_rank_with_scale(singular_values: &[f64], max_dim: usize, scale: f64) -> usize {
    let sigma1 = singular_values.first().copied().unwrap_or(0.0);
    if sigma1 <= 0.0 {
        return 0;
    }
    let cutoff = max_dim as f64 * f64::EPSILON * sigma1.max(scale);
    singular_values.iter().filter(|&&s| s > cutoff).count()
}

/// Nuclear norm of a matrix (sum of singular values).
pub fn nuclear_norm(m: &DMatrix<f64>) -> Result<f64, SpectralError> {
    Ok(singular_values(m)?.iter().sum())
}

/// Compute the full spectral snapshot of a state.  `head_id` is filled in by
/// the caller that knows it (see [`crate::state::run_head`]).
pub fn snapshot(state: &StateMatrix, tol: &RankTolerance) -> Result<SpectralSnapshot, SpectralError> {
    let sv = singular_values(state.entries())?;
    let dims = (state.d_k(), state.d_v());
    Ok(SpectralSnapshot {
        step: state.step(),
        head_id: 0,
        dims,
        effective_rank: effective_rank(&sv, tol),
        algebraic_rank: algebraic_rank_with_scale(
            &sv,
            dims.0.max(dims.1),
            state.magnitude_bound(),
        ),
        nuclear_norm: sv.iter().sum(),
        spectral_norm: sv.first().copied().unwrap_or(0.0),
        singular_values: sv,
    })
}

/// Cosine similarity of two non-zero vectors.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64, SpectralError> {
    if u.len() != v.len() {
        return Err(SpectralError::LengthMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    if u.iter().chain(v).any(|x| !x.is_finite()) {
        return Err(SpectralError::NonFinite);
    }
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(SpectralError::ZeroVector);
    }
    if u == v {
        return Ok(1.0); // self-similarity is exactly 1
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Fractional ranks with ties averaged (1-based).
fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[i].partial_cmp(&x[j]).expect("rank inputs are finite"));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        // positions i..=j hold ties; all receive the mean of ranks i+1..=j+1
        let rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson correlation of the rank-transformed
/// vectors, with ties assigned average (fractional) ranks.
pub fn spearman(u: &[f64], v: &[f64]) -> Result<f64, SpectralError> {
    if u.len() != v.len() {
        return Err(SpectralError::LengthMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    if u.len() < 2 {
        return Err(SpectralError::TooShort {
            need: 2,
            got: u.len(),
        });
    }
    if u.iter().chain(v).any(|x| !x.is_finite()) {
        return Err(SpectralError::NonFinite);
    }
    let ru = average_ranks(u);
    let rv = average_ranks(v);
    if ru.iter().all(|&r| r == ru[0]) || rv.iter().all(|&r| r == rv[0]) {
        return Err(SpectralError::ConstantVector);
    }
    if ru == rv {
        return Ok(1.0); // identical rankings correlate exactly
    }
    pearson(&ru, &rv)
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64, SpectralError> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(SpectralError::ConstantVector);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

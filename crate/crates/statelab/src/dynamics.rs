//! Layer trajectories and empirical certification of the stability results.
//!
//! A [`LayerTrajectory`] collects, per recorded step `t`, the rank vector
//! `r(t)` and nuclear-norm vector `n(t)` across the `H` heads of a layer,
//! together with their increments `delta(t) = r(t) - r(t-1)` and
//! `Delta(t) = n(t) - n(t-1)`.  The verifiers then check concrete instances
//! of the bounds that govern these vectors:
//!
//! * rank bound: `r_h(t) <= min(t, d_h)` for every head at every step;
//! * step growth: `r_h(t) <= r_h(t-1) + 1` (a rank-one write adds at most
//!   one dimension);
//! * span bound: `rank(S_h(t)) <= min(dim span keys, dim span values)`,
//!   tracked incrementally from the raw streams;
//! * recursive cosine stability of `r(t)` under the audited monotone-growth
//!   assumption, plus the non-increasing increment norm that drives it;
//! * directional stability of `n(t)`: with relative step size
//!   `r_t = B / |n(t-1)|`, adjacent cosines obey
//!   `cos(n(t-1), n(t)) >= (1 - r_t) / (1 + r_t)`;
//! * per-head increment Lipschitz bound `|Delta_h(t)| <= |k_t| |v_t|`;
//! * exact collinearity of `n(t)` on toy-model streams.
//!
//! Every verifier emits a [`StabilityCertificate`] recording pass/fail, the
//! worst margin over all checks, and the individual violations.  All checks
//! allow an absolute slack of [`CERTIFICATION_SLACK`]: the bounds are
//! exact-real statements, singular values are accurate to ~1e-12, and the
//! slack absorbs accumulation over long runs.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{self, StreamSpec};
use crate::error::{DatagenError, DynamicsError, StateError};
use crate::spectral::{cosine_similarity, RankTolerance, SpectralSnapshot};
use crate::state::{run_head, HeadConfig, KVEvent, StateMatrix, UpdateRule};

/// Absolute slack on all certificate inequalities.
pub const CERTIFICATION_SLACK: f64 = 1e-9;

/// Relative residual threshold for incremental span tracking.
const SPAN_REL_TOL: f64 = 1e-9;

/// Which rank count a trajectory carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankKind {
    /// Relative-threshold effective rank (telemetry signal).
    Effective,
    /// Conventional numerical rank (what the exact-rank results constrain).
    Algebraic,
}

/// Time series of rank and norm vectors across the heads of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerTrajectory {
    pub heads: Vec<HeadConfig>,
    pub kind: RankKind,
    steps: Vec<usize>,
    rank_vectors: Vec<DVector<f64>>,
    norm_vectors: Vec<DVector<f64>>,
    rank_increments: Vec<DVector<f64>>,
    norm_increments: Vec<DVector<f64>>,
}

impl LayerTrajectory {
    pub fn steps(&self) -> &[usize] {
        &self.steps
    }

    pub fn rank_vectors(&self) -> &[DVector<f64>] {
        &self.rank_vectors
    }

    pub fn norm_vectors(&self) -> &[DVector<f64>] {
        &self.norm_vectors
    }

    /// `rank_increments()[i] = r(steps[i+1]) - r(steps[i])`.
    pub fn rank_increments(&self) -> &[DVector<f64>] {
        &self.rank_increments
    }

    pub fn norm_increments(&self) -> &[DVector<f64>] {
        &self.norm_increments
    }

    pub fn head_count(&self) -> usize {
        self.heads.len()
    }

    pub fn step_index(&self, step: usize) -> Option<usize> {
        self.steps.iter().position(|&s| s == step)
    }
}

/// Assemble per-head snapshot series into a layer trajectory.  Every head
/// must have been recorded at the same step set.
pub fn build_trajectory(
    heads: &[HeadConfig],
    snapshots: &[Vec<SpectralSnapshot>],
    kind: RankKind,
) -> Result<LayerTrajectory, DynamicsError> {
    if heads.len() != snapshots.len() || heads.is_empty() {
        return Err(DynamicsError::HeadCountMismatch {
            heads: heads.len(),
            streams: snapshots.len(),
        });
    }
    let steps: Vec<usize> = snapshots[0].iter().map(|s| s.step).collect();
    for (h, series) in snapshots.iter().enumerate().skip(1) {
        if series.len() != steps.len() || series.iter().zip(&steps).any(|(s, &t)| s.step != t) {
            return Err(DynamicsError::StepMisalignment { head: h });
        }
    }
    if steps.is_empty() {
        return Err(DynamicsError::TooFewSteps { need: 1, have: 0 });
    }
    let h = heads.len();
    let rank_of = |snap: &SpectralSnapshot| match kind {
        RankKind::Effective => snap.effective_rank as f64,
        RankKind::Algebraic => snap.algebraic_rank as f64,
    };
    let rank_vectors: Vec<DVector<f64>> = (0..steps.len())
        .map(|i| DVector::from_fn(h, |j, _| rank_of(&snapshots[j][i])))
        .collect();
    let norm_vectors: Vec<DVector<f64>> = (0..steps.len())
        .map(|i| DVector::from_fn(h, |j, _| snapshots[j][i].nuclear_norm))
        .collect();
    let rank_increments = adjacent_differences(&rank_vectors);
    let norm_increments = adjacent_differences(&norm_vectors);
    Ok(LayerTrajectory {
        heads: heads.to_vec(),
        kind,
        steps,
        rank_vectors,
        norm_vectors,
        rank_increments,
        norm_increments,
    })
}

fn adjacent_differences(v: &[DVector<f64>]) -> Vec<DVector<f64>> {
    v.windows(2).map(|w| &w[1] - &w[0]).collect()
}

// ── Layer simulation ─────────────────────────────────────────────────────

/// Raw material of one simulated layer: per-head streams, snapshot series,
/// and final states.  Heads are independent, so the simulation runs them in
/// parallel; within a head the recurrence is strictly sequential.
#[derive(Debug, Clone)]
pub struct LayerRun {
    pub heads: Vec<HeadConfig>,
    pub streams: Vec<Vec<KVEvent>>,
    pub snapshots: Vec<Vec<SpectralSnapshot>>,
    pub finals: Vec<StateMatrix>,
}

impl LayerRun {
    pub fn trajectory(&self, kind: RankKind) -> Result<LayerTrajectory, DynamicsError> {
        build_trajectory(&self.heads, &self.snapshots, kind)
    }
}

/// Simulate a layer over pre-built streams.
pub fn run_layer_streams(
    heads: &[HeadConfig],
    streams: Vec<Vec<KVEvent>>,
    schedule: &[usize],
    tol: &RankTolerance,
) -> Result<LayerRun, StateError> {
    let results: Result<Vec<_>, StateError> = heads
        .par_iter()
        .zip(streams.par_iter())
        .map(|(cfg, stream)| run_head(cfg, stream, schedule, tol))
        .collect();
    let (finals, snapshots) = results?.into_iter().unzip();
    Ok(LayerRun {
        heads: heads.to_vec(),
        streams,
        snapshots,
        finals,
    })
}

/// Generate streams from a spec and simulate the layer.
pub fn run_layer(
    heads: &[HeadConfig],
    spec: &StreamSpec,
    schedule: &[usize],
    tol: &RankTolerance,
) -> Result<LayerRun, DatagenError> {
    let streams: Result<Vec<_>, DatagenError> = heads
        .par_iter()
        .map(|cfg| datagen::generate(spec, cfg.head_id))
        .collect();
    Ok(run_layer_streams(heads, streams?, schedule, tol)?)
}

// ── Certificates ─────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TheoremKind {
    RankBound,
    RecursiveCosine,
    NormStability,
    SpanBound,
    StepGrowth,
    MonotoneSupport,
    LipschitzIncrement,
    ToyCollinearity,
}

impl TheoremKind {
    pub const ALL: [TheoremKind; 8] = [
        TheoremKind::RankBound,
        TheoremKind::RecursiveCosine,
        TheoremKind::NormStability,
        TheoremKind::SpanBound,
        TheoremKind::StepGrowth,
        TheoremKind::MonotoneSupport,
        TheoremKind::LipschitzIncrement,
        TheoremKind::ToyCollinearity,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TheoremKind::RankBound => "rank-bound",
            TheoremKind::RecursiveCosine => "recursive-cosine",
            TheoremKind::NormStability => "norm-stability",
            TheoremKind::SpanBound => "span-bound",
            TheoremKind::StepGrowth => "step-growth",
            TheoremKind::MonotoneSupport => "monotone-support",
            TheoremKind::LipschitzIncrement => "lipschitz-increment",
            TheoremKind::ToyCollinearity => "toy-collinearity",
        }
    }

    pub fn parse(s: &str) -> Option<TheoremKind> {
        Self::ALL.iter().copied().find(|k| k.name() == s)
    }
}

/// One failed (or near-failed) check: the observed value broke the bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub step: usize,
    pub head: Option<usize>,
    pub observed: f64,
    pub bound: f64,
}

/// Outcome of one verifier over a whole trajectory.  `worst_margin` is the
/// minimum slack over all checks (negative iff some bound was broken);
/// `passed` iff `worst_margin >= -CERTIFICATION_SLACK`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityCertificate {
    pub theorem: TheoremKind,
    pub passed: bool,
    pub worst_margin: f64,
    pub checks: usize,
    pub violations: Vec<Violation>,
}

struct CertBuilder {
    theorem: TheoremKind,
    worst: f64,
    checks: usize,
    violations: Vec<Violation>,
}

impl CertBuilder {
    fn new(theorem: TheoremKind) -> Self {
        Self {
            theorem,
            worst: f64::INFINITY,
            checks: 0,
            violations: Vec::new(),
        }
    }

    /// Record one check with the given satisfaction margin
    /// (bound - observed for upper bounds, observed - bound for lower bounds).
    /// A non-finite margin (corrupted inputs) counts as a violation.
    fn check(&mut self, margin: f64, step: usize, head: Option<usize>, observed: f64, bound: f64) {
        let margin = if margin.is_nan() { f64::NEG_INFINITY } else { margin };
        self.checks += 1;
        if margin < self.worst {
            self.worst = margin;
        }
        if margin < -CERTIFICATION_SLACK {
            self.violations.push(Violation {
                step,
                head,
                observed,
                bound,
            });
        }
    }

    fn finish(self) -> StabilityCertificate {
        StabilityCertificate {
            theorem: self.theorem,
            passed: self.worst >= -CERTIFICATION_SLACK,
            worst_margin: self.worst,
            checks: self.checks,
            violations: self.violations,
        }
    }
}

// ── Rank bound & step growth ─────────────────────────────────────────────

/// Check `r_h(t) <= min(t, d_h)` at every recorded step for every head.
pub fn verify_rank_bound(traj: &LayerTrajectory) -> StabilityCertificate {
    let mut cert = CertBuilder::new(TheoremKind::RankBound);
    for (i, &t) in traj.steps.iter().enumerate() {
        let r = &traj.rank_vectors[i];
        for (h, cfg) in traj.heads.iter().enumerate() {
            let d = cfg.d_k.min(cfg.d_v);
            let bound = t.min(d) as f64;
            let observed = r[h];
            cert.check(bound - observed, t, Some(cfg.head_id), observed, bound);
        }
    }
    cert.finish()
}

/// Check the per-step growth cap `r_h(t) - r_h(t-1) <= 1`.  Only adjacent
/// recorded pairs one step apart are per-step increments, so pairs with a
/// larger gap are skipped.  Only the upper side is asserted: the delta rule
/// may overwrite and lose rank.
pub fn verify_step_growth(traj: &LayerTrajectory) -> StabilityCertificate {
    let mut cert = CertBuilder::new(TheoremKind::StepGrowth);
    for i in 0..traj.rank_increments.len() {
        if traj.steps[i + 1] != traj.steps[i] + 1 {
            continue;
        }
        let delta = &traj.rank_increments[i];
        for (h, cfg) in traj.heads.iter().enumerate() {
            cert.check(
                1.0 - delta[h],
                traj.steps[i + 1],
                Some(cfg.head_id),
                delta[h],
                1.0,
            );
        }
    }
    cert.finish()
}

// ── Span bound ───────────────────────────────────────────────────────────

/// Running dimensions of the key and value spans for one head, maintained by
/// incremental Gram-Schmidt with one reorthogonalization pass.  A vector
/// whose residual against the current basis falls below `SPAN_REL_TOL`
/// relative to its norm is treated as dependent, matching the algebraic rank
/// tolerance regime.
#[derive(Debug, Clone, Default)]
pub struct SubspaceTracker {
    key_basis: Vec<DVector<f64>>,
    value_basis: Vec<DVector<f64>>,
}

impl SubspaceTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, ev: &KVEvent) {
        Self::grow(&mut self.key_basis, &ev.key);
        Self::grow(&mut self.value_basis, &ev.value);
    }

    fn grow(basis: &mut Vec<DVector<f64>>, v: &DVector<f64>) {
        let norm = v.norm();
        if norm == 0.0 || basis.len() == v.len() {
            return;
        }
        let mut r = v.clone();
        for _ in 0..2 {
            for b in basis.iter() {
                let c = b.dot(&r);
                r.axpy(-c, b, 1.0);
            }
        }
        let rn = r.norm();
        if rn > SPAN_REL_TOL * norm {
            basis.push(r / rn);
        }
    }

    /// dim span{k_1..k_t}
    pub fn key_dim(&self) -> usize {
        self.key_basis.len()
    }

    /// dim span{v_1..v_t}
    pub fn value_dim(&self) -> usize {
        self.value_basis.len()
    }

    /// Intrinsic per-head rank ceiling `m_h = min(key_dim, value_dim)`.
    pub fn intrinsic_bound(&self) -> usize {
        self.key_dim().min(self.value_dim())
    }
}

/// Check `rank(S_h(t)) <= min(dim span keys, dim span values)` at every
/// recorded step, replaying the raw streams through span trackers.  Returns
/// the final tracker per head alongside the certificate.
pub fn verify_span_bound(
    streams: &[Vec<KVEvent>],
    traj: &LayerTrajectory,
) -> Result<(StabilityCertificate, Vec<SubspaceTracker>), DynamicsError> {
    if streams.len() != traj.heads.len() {
        return Err(DynamicsError::HeadCountMismatch {
            heads: traj.heads.len(),
            streams: streams.len(),
        });
    }
    let mut cert = CertBuilder::new(TheoremKind::SpanBound);
    let mut trackers: Vec<SubspaceTracker> = Vec::with_capacity(streams.len());
    for (h, stream) in streams.iter().enumerate() {
        let mut tracker = SubspaceTracker::new();
        let mut recorded = traj.steps.iter().enumerate().peekable();
        for (i, ev) in stream.iter().enumerate() {
            let step = i + 1;
            tracker.observe(ev);
            while recorded.peek().map(|(_, &s)| s) == Some(step) {
                let (idx, _) = recorded.next().unwrap();
                let bound = tracker.intrinsic_bound() as f64;
                let observed = traj.rank_vectors[idx][h];
                cert.check(
                    bound - observed,
                    step,
                    Some(traj.heads[h].head_id),
                    observed,
                    bound,
                );
            }
        }
        trackers.push(tracker);
    }
    Ok((cert.finish(), trackers))
}

// ── Recursive cosine stability ───────────────────────────────────────────

/// Steps at which some head's rank decreased (effective-rank dips break the
/// monotone-growth assumption; they are reported, not failed).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityAudit {
    pub dips: Vec<(usize, usize)>,
}

impl MonotonicityAudit {
    pub fn is_clean(&self) -> bool {
        self.dips.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct RecursiveCosineOutcome {
    pub certificate: StabilityCertificate,
    pub support_certificate: StabilityCertificate,
    pub audit: MonotonicityAudit,
}

/// Verify the recursive cosine stability of the rank vector: wherever the
/// monotone-growth precondition holds across a step triple and
/// `cos(r(t-1), r(t)) >= 1 - cos_eps`, assert
/// `cos(r(t), r(t+1)) >= 1 - cos_eps`.
///
/// Also verifies the non-increasing increment norm
/// `|delta(t+1)| <= |delta(t)|` on the monotone, equal-gap portion of the
/// trajectory, returned as a separate `MonotoneSupport` certificate.
pub fn verify_recursive_cosine(
    traj: &LayerTrajectory,
    cos_eps: f64,
) -> Result<RecursiveCosineOutcome, DynamicsError> {
    if !(cos_eps > 0.0 && cos_eps < 1.0) {
        return Err(DynamicsError::Unsupported {
            check: "recursive-cosine",
            why: format!("cos_eps must lie in (0, 1), got {cos_eps}"),
        });
    }
    if traj.steps.len() < 3 {
        return Err(DynamicsError::TooFewSteps {
            need: 3,
            have: traj.steps.len(),
        });
    }

    let mut audit = MonotonicityAudit::default();
    for (i, delta) in traj.rank_increments.iter().enumerate() {
        for (h, cfg) in traj.heads.iter().enumerate() {
            if delta[h] < 0.0 {
                audit.dips.push((traj.steps[i + 1], cfg.head_id));
            }
        }
    }

    let nonneg = |v: &DVector<f64>| v.iter().all(|&x| x >= 0.0);
    let cos_of = |i: usize, j: usize| -> Result<f64, DynamicsError> {
        cosine_similarity(traj.rank_vectors[i].as_slice(), traj.rank_vectors[j].as_slice())
            .map_err(|_| DynamicsError::UndefinedSimilarity {
                step: traj.steps[i],
            })
    };

    let mut cert = CertBuilder::new(TheoremKind::RecursiveCosine);
    for i in 1..traj.steps.len() - 1 {
        // triple (t-1, t, t+1) with increments delta(t), delta(t+1)
        let monotone = nonneg(&traj.rank_increments[i - 1]) && nonneg(&traj.rank_increments[i]);
        if !monotone {
            continue;
        }
        let antecedent = cos_of(i - 1, i)?;
        if antecedent < 1.0 - cos_eps {
            continue;
        }
        let consequent = cos_of(i, i + 1)?;
        let bound = 1.0 - cos_eps;
        cert.check(
            consequent - bound,
            traj.steps[i + 1],
            None,
            consequent,
            bound,
        );
    }

    let mut support = CertBuilder::new(TheoremKind::MonotoneSupport);
    for i in 1..traj.rank_increments.len() {
        let gap_prev = traj.steps[i] - traj.steps[i - 1];
        let gap_next = traj.steps[i + 1] - traj.steps[i];
        if gap_prev != gap_next {
            continue;
        }
        if !(nonneg(&traj.rank_increments[i - 1]) && nonneg(&traj.rank_increments[i])) {
            continue;
        }
        let prev = traj.rank_increments[i - 1].norm();
        let next = traj.rank_increments[i].norm();
        support.check(prev - next, traj.steps[i + 1], None, next, prev);
    }

    Ok(RecursiveCosineOutcome {
        certificate: cert.finish(),
        support_certificate: support.finish(),
        audit,
    })
}

// ── Norm stability ───────────────────────────────────────────────────────

/// The adjacent-step cosine lower bound `(1 - r) / (1 + r)` for relative
/// step size `r < 1`.
pub fn cosine_lower_bound(r: f64) -> f64 {
    (1.0 - r) / (1.0 + r)
}

#[derive(Debug, Clone)]
pub struct NormStabilityOutcome {
    pub certificate: StabilityCertificate,
    /// The bound B actually used (supplied, or the measured tightest value).
    pub bound_used: f64,
    /// Relative step sizes r_t = B / |n(t-1)| per adjacent recorded pair.
    pub relative_steps: Vec<f64>,
}

/// Verify the directional stability of the nuclear-norm vector.  When `b` is
/// not supplied, the tightest valid constant `max_t |Delta(t)|` measured from
/// the trajectory is used; a supplied `b` below that measurement is rejected.
pub fn verify_norm_stability(
    traj: &LayerTrajectory,
    b: Option<f64>,
) -> Result<NormStabilityOutcome, DynamicsError> {
    if traj.steps.len() < 2 {
        return Err(DynamicsError::TooFewSteps {
            need: 2,
            have: traj.steps.len(),
        });
    }
    let measured = traj
        .norm_increments
        .iter()
        .map(|d| d.norm())
        .fold(0.0f64, f64::max);
    let bound_used = match b {
        Some(supplied) if supplied < measured => {
            return Err(DynamicsError::InvalidBound { supplied, measured })
        }
        Some(supplied) => supplied,
        None => measured,
    };

    let mut cert = CertBuilder::new(TheoremKind::NormStability);
    let mut relative_steps = Vec::with_capacity(traj.steps.len() - 1);
    for i in 1..traj.steps.len() {
        let prev = &traj.norm_vectors[i - 1];
        let u = prev.norm();
        if u == 0.0 {
            return Err(DynamicsError::UndefinedSimilarity {
                step: traj.steps[i - 1],
            });
        }
        let r_t = bound_used / u;
        relative_steps.push(r_t);
        if r_t >= 1.0 {
            continue;
        }
        let observed = cosine_similarity(prev.as_slice(), traj.norm_vectors[i].as_slice())
            .map_err(|_| DynamicsError::UndefinedSimilarity {
                step: traj.steps[i],
            })?;
        let bound = cosine_lower_bound(r_t);
        cert.check(observed - bound, traj.steps[i], None, observed, bound);
    }
    Ok(NormStabilityOutcome {
        certificate: cert.finish(),
        bound_used,
        relative_steps,
    })
}

/// Verify the per-head increment bound `|Delta_h(t)| <= |k_t| |v_t|` against
/// the raw streams.  Valid for the plain additive update only, so the rule
/// must be standard/gated with gate = 1 and lr <= 1 at every checked step.
pub fn verify_lipschitz_increment(
    streams: &[Vec<KVEvent>],
    traj: &LayerTrajectory,
) -> Result<StabilityCertificate, DynamicsError> {
    if streams.len() != traj.heads.len() {
        return Err(DynamicsError::HeadCountMismatch {
            heads: traj.heads.len(),
            streams: streams.len(),
        });
    }
    if traj.heads.iter().any(|c| c.rule == UpdateRule::DeltaNet) {
        return Err(DynamicsError::Unsupported {
            check: "lipschitz-increment",
            why: "the delta rule writes lr*(v - S^T k), which is not bounded by |k||v|".into(),
        });
    }
    let mut cert = CertBuilder::new(TheoremKind::LipschitzIncrement);
    for i in 0..traj.norm_increments.len() {
        if traj.steps[i + 1] != traj.steps[i] + 1 {
            continue; // only per-step increments obey the single-update bound
        }
        let step = traj.steps[i + 1];
        for (h, cfg) in traj.heads.iter().enumerate() {
            let ev = &streams[h][step - 1];
            if ev.gate != 1.0 || ev.lr.abs() > 1.0 {
                return Err(DynamicsError::Unsupported {
                    check: "lipschitz-increment",
                    why: format!(
                        "head {} step {step} has gate={} lr={}; the bound assumes gate=1, |lr|<=1",
                        cfg.head_id, ev.gate, ev.lr
                    ),
                });
            }
            let bound = ev.key.norm() * ev.value.norm();
            let observed = traj.norm_increments[i][h].abs();
            cert.check(bound - observed, step, Some(cfg.head_id), observed, bound);
        }
    }
    Ok(cert.finish())
}

/// Verify exact collinearity of the norm vector across all recorded step
/// pairs (toy-model streams): `cos(n(t), n(t')) >= 1 - 1e-9`.
pub fn verify_toy_collinearity(
    traj: &LayerTrajectory,
) -> Result<StabilityCertificate, DynamicsError> {
    let mut cert = CertBuilder::new(TheoremKind::ToyCollinearity);
    let bound = 1.0 - 1e-9;
    for i in 0..traj.steps.len() {
        for j in i + 1..traj.steps.len() {
            let observed = cosine_similarity(
                traj.norm_vectors[i].as_slice(),
                traj.norm_vectors[j].as_slice(),
            )
            .map_err(|_| DynamicsError::UndefinedSimilarity {
                step: traj.steps[i],
            })?;
            cert.check(observed - bound, traj.steps[j], None, observed, bound);
        }
    }
    Ok(cert.finish())
}

// ── Norm increment decomposition ─────────────────────────────────────────

/// Orthogonal decomposition of one norm increment `Delta(t)` against the
/// previous norm vector `n(t-1) = u`:
/// `Delta = a_t * u + b_t` with `b_t` orthogonal to `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormDecomposition {
    pub step: usize,
    /// a_t, the coefficient along n(t-1).
    pub parallel_coeff: f64,
    /// |b_t|
    pub orthogonal_part_norm: f64,
    /// rho_t = |b_t| / |Delta(t)| (0 when the increment vanishes).
    pub orthogonal_ratio: f64,
    /// 1 + a_t (bounded away from 0 when there is no strong cancellation).
    pub cancellation_margin: f64,
    /// c_t = cos(n(t-1), n(t)).
    pub adjacent_cosine: f64,
}

/// Decompose every recorded norm increment and verify the algebraic
/// identity `|b_t| = |1 + a_t| * |n(t-1)| * sqrt(1/c_t^2 - 1)` to 1e-8
/// relative error (the cosine route and the projection route must agree).
pub fn decompose_norm_increment(
    traj: &LayerTrajectory,
) -> Result<Vec<NormDecomposition>, DynamicsError> {
    if traj.steps.len() < 2 {
        return Err(DynamicsError::TooFewSteps {
            need: 2,
            have: traj.steps.len(),
        });
    }
    let mut out = Vec::with_capacity(traj.steps.len() - 1);
    for i in 1..traj.steps.len() {
        let u = &traj.norm_vectors[i - 1];
        let u_norm = u.norm();
        if u_norm == 0.0 {
            return Err(DynamicsError::UndefinedSimilarity {
                step: traj.steps[i - 1],
            });
        }
        let delta = &traj.norm_increments[i - 1];
        let a_t = delta.dot(u) / (u_norm * u_norm);
        let b = delta - u * a_t;
        let b_norm = b.norm();
        let delta_norm = delta.norm();
        let next = &traj.norm_vectors[i];
        let c_t = cosine_similarity(u.as_slice(), next.as_slice()).map_err(|_| {
            DynamicsError::UndefinedSimilarity {
                step: traj.steps[i],
            }
        })?;

        // reconstruction check: u + a_t u + b must reproduce n(t) exactly
        debug_assert!(((u + u * a_t + &b) - next).norm() <= 1e-10 * (1.0 + next.norm()));

        let from_cosine = (1.0 + a_t).abs() * u_norm * (1.0 / (c_t * c_t) - 1.0).max(0.0).sqrt();
        let diff = (b_norm - from_cosine).abs();
        let scale = b_norm.max(from_cosine);
        // Near c_t = 1 the sqrt amplifies the cosine's last-ulp error to
        // ~sqrt(eps) absolute; below that floor the two routes are
        // numerically indistinguishable.
        let conditioning_floor = (1.0 + a_t).abs() * u_norm * (4.0 * f64::EPSILON).sqrt();
        if diff > 1e-8 * scale + conditioning_floor {
            return Err(DynamicsError::DecompositionIdentity {
                step: traj.steps[i],
                rel_error: diff / scale.max(f64::MIN_POSITIVE),
            });
        }

        out.push(NormDecomposition {
            step: traj.steps[i],
            parallel_coeff: a_t,
            orthogonal_part_norm: b_norm,
            orthogonal_ratio: if delta_norm > 0.0 { b_norm / delta_norm } else { 0.0 },
            cancellation_margin: 1.0 + a_t,
            adjacent_cosine: c_t,
        });
    }
    Ok(out)
}

// ── Consistency reports ──────────────────────────────────────────────────

/// One head's coordinates in a step-pair scatter plot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadPoint {
    pub head_id: usize,
    pub rank_x: f64,
    pub rank_y: f64,
    pub norm_x: f64,
    pub norm_y: f64,
}

/// Temporal-consistency metrics for one step pair.  Degenerate vectors make
/// individual metrics undefined (`None`) without failing the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRow {
    pub pair: (usize, usize),
    pub rank_spearman: Option<f64>,
    pub rank_cosine: Option<f64>,
    pub norm_spearman: Option<f64>,
    pub norm_cosine: Option<f64>,
    pub scatter: Vec<HeadPoint>,
}

/// Compute Spearman and cosine consistency for both the rank and the norm
/// vectors at each requested step pair, with head-indexed scatter data.
pub fn consistency_report(
    traj: &LayerTrajectory,
    pairs: &[(usize, usize)],
) -> Result<Vec<ConsistencyRow>, DynamicsError> {
    let mut rows = Vec::with_capacity(pairs.len());
    for &(t1, t2) in pairs {
        let i = traj
            .step_index(t1)
            .ok_or(DynamicsError::StepNotRecorded { step: t1 })?;
        let j = traj
            .step_index(t2)
            .ok_or(DynamicsError::StepNotRecorded { step: t2 })?;
        let (r1, r2) = (&traj.rank_vectors[i], &traj.rank_vectors[j]);
        let (n1, n2) = (&traj.norm_vectors[i], &traj.norm_vectors[j]);
        let scatter = traj
            .heads
            .iter()
            .enumerate()
            .map(|(h, cfg)| HeadPoint {
                head_id: cfg.head_id,
                rank_x: r1[h],
                rank_y: r2[h],
                norm_x: n1[h],
                norm_y: n2[h],
            })
            .collect();
        rows.push(ConsistencyRow {
            pair: (t1, t2),
            rank_spearman: crate::spectral::spearman(r1.as_slice(), r2.as_slice()).ok(),
            rank_cosine: cosine_similarity(r1.as_slice(), r2.as_slice()).ok(),
            norm_spearman: crate::spectral::spearman(n1.as_slice(), n2.as_slice()).ok(),
            norm_cosine: cosine_similarity(n1.as_slice(), n2.as_slice()).ok(),
            scatter,
        });
    }
    Ok(rows)
}

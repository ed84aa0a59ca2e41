//! Deterministic synthetic key/value stream generators.
//!
//! Each kind realizes one input regime the verification suites study:
//!
//! * `Gaussian` — i.i.d. standard-normal keys and values, the generic
//!   full-span baseline.
//! * `SubspaceConstrained` — keys (values) drawn as random combinations of
//!   `m_k` (`m_v`) fixed orthonormal basis vectors, so the per-head intrinsic
//!   rank ceiling `min(m_k, m_v)` is known by construction.
//! * `PeriodicLoop` — a fixed set of `unique` events replayed with period
//!   `P = unique`, the repetitive-input regime that caps state rank at the
//!   number of distinct events.
//! * `ToyModel` — rank-one streams `k_t = a_h * alpha_t * u_h`,
//!   `v_t = b_h * beta_t * w_h` with unit directions and global magnitude
//!   factors shared across heads; the nuclear-norm vector has an exact
//!   closed form against which the whole pipeline is checked.
//! * `Mixture` — per-head assignment to full-span or low-subspace generation
//!   with the ground-truth labels retained, so stratification detection is
//!   exactly checkable.
//!
//! Streams are pure functions of `(spec, head_id)`: the RNG is ChaCha12
//! seeded from `spec.seed` mixed with the head id, and the algorithm
//! identifier is recorded in telemetry metadata so replays can verify they
//! use the same generator.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::DatagenError;
use crate::state::KVEvent;

/// Identifier of the seeded generator backing all stream kinds.
pub const RNG_ALGORITHM: &str = "chacha12";

/// Per-step scalar schedule for gates and learning rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarSchedule {
    Constant(f64),
    PerStep(Vec<f64>),
}

impl ScalarSchedule {
    fn at(&self, step: usize) -> f64 {
        match self {
            ScalarSchedule::Constant(c) => *c,
            ScalarSchedule::PerStep(v) => v[step],
        }
    }

    fn check_len(&self, need: usize) -> Result<(), DatagenError> {
        if let ScalarSchedule::PerStep(v) = self {
            if v.len() < need {
                return Err(DatagenError::ScheduleLength {
                    got: v.len(),
                    need,
                });
            }
        }
        Ok(())
    }
}

impl Default for ScalarSchedule {
    fn default() -> Self {
        ScalarSchedule::Constant(1.0)
    }
}

/// Global magnitude factors (alpha_t, beta_t) for the toy model, shared
/// across heads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorSchedule {
    Constant { alpha: f64, beta: f64 },
    PerStep(Vec<(f64, f64)>),
}

impl FactorSchedule {
    fn at(&self, step: usize) -> (f64, f64) {
        match self {
            FactorSchedule::Constant { alpha, beta } => (*alpha, *beta),
            FactorSchedule::PerStep(v) => v[step],
        }
    }
}

impl Default for FactorSchedule {
    fn default() -> Self {
        FactorSchedule::Constant {
            alpha: 1.0,
            beta: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamKind {
    Gaussian,
    SubspaceConstrained {
        m_k: usize,
        m_v: usize,
    },
    PeriodicLoop {
        unique: usize,
    },
    ToyModel {
        /// (a_h, b_h) per head; the stream is defined for exactly this many heads.
        scales: Vec<(f64, f64)>,
        factors: FactorSchedule,
    },
    Mixture {
        /// Ground-truth labels, one per head: `true` = full span.
        labels: Vec<bool>,
        low_m_k: usize,
        low_m_v: usize,
    },
}

impl StreamKind {
    pub fn name(&self) -> &'static str {
        match self {
            StreamKind::Gaussian => "gaussian",
            StreamKind::SubspaceConstrained { .. } => "subspace",
            StreamKind::PeriodicLoop { .. } => "periodic",
            StreamKind::ToyModel { .. } => "toy",
            StreamKind::Mixture { .. } => "mixture",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSpec {
    pub kind: StreamKind,
    pub length: usize,
    pub seed: u64,
    pub d_k: usize,
    pub d_v: usize,
    #[serde(default)]
    pub gate: ScalarSchedule,
    #[serde(default)]
    pub lr: ScalarSchedule,
    /// L2-normalize keys after generation.  Delta-rule runs need this: the
    /// projection step is a contraction only when `lr * |k|^2 <= 2`.
    #[serde(default)]
    pub normalize_keys: bool,
}

impl StreamSpec {
    pub fn new(kind: StreamKind, length: usize, seed: u64, d_k: usize, d_v: usize) -> Self {
        Self {
            kind,
            length,
            seed,
            d_k,
            d_v,
            gate: ScalarSchedule::default(),
            lr: ScalarSchedule::default(),
            normalize_keys: false,
        }
    }

    pub fn with_normalized_keys(mut self) -> Self {
        self.normalize_keys = true;
        self
    }

    fn validate(&self) -> Result<(), DatagenError> {
        if self.length == 0 {
            return Err(DatagenError::ZeroLength);
        }
        if self.d_k == 0 || self.d_v == 0 {
            return Err(DatagenError::BadSubspaceDims {
                m_k: self.d_k,
                m_v: self.d_v,
                d_k: self.d_k,
                d_v: self.d_v,
            });
        }
        self.gate.check_len(self.length)?;
        self.lr.check_len(self.length)?;
        match &self.kind {
            StreamKind::SubspaceConstrained { m_k, m_v } => {
                if *m_k == 0 || *m_k > self.d_k || *m_v == 0 || *m_v > self.d_v {
                    return Err(DatagenError::BadSubspaceDims {
                        m_k: *m_k,
                        m_v: *m_v,
                        d_k: self.d_k,
                        d_v: self.d_v,
                    });
                }
            }
            StreamKind::PeriodicLoop { unique } => {
                if *unique == 0 || *unique > self.length {
                    return Err(DatagenError::BadPeriod {
                        unique: *unique,
                        length: self.length,
                    });
                }
            }
            StreamKind::ToyModel { scales, .. } => {
                for (h, &(a, b)) in scales.iter().enumerate() {
                    if !(a > 0.0 && b > 0.0) {
                        return Err(DatagenError::BadToyScales { head_id: h, a, b });
                    }
                }
            }
            StreamKind::Mixture {
                low_m_k, low_m_v, ..
            } => {
                if *low_m_k == 0 || *low_m_k > self.d_k || *low_m_v == 0 || *low_m_v > self.d_v {
                    return Err(DatagenError::BadSubspaceDims {
                        m_k: *low_m_k,
                        m_v: *low_m_v,
                        d_k: self.d_k,
                        d_v: self.d_v,
                    });
                }
            }
            StreamKind::Gaussian => {}
        }
        Ok(())
    }

    /// Ground-truth labels for a mixture spec (`true` = full span).
    pub fn mixture_labels(&self) -> Option<&[bool]> {
        match &self.kind {
            StreamKind::Mixture { labels, .. } => Some(labels),
            _ => None,
        }
    }
}

fn head_rng(seed: u64, head_id: usize) -> ChaCha12Rng {
    // splitmix-style mixing keeps per-head streams decorrelated while
    // remaining a pure function of (seed, head_id)
    let mixed = seed ^ (head_id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    ChaCha12Rng::seed_from_u64(mixed)
}

fn gaussian_vec(rng: &mut ChaCha12Rng, d: usize) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn unit_vec(rng: &mut ChaCha12Rng, d: usize) -> DVector<f64> {
    loop {
        let v = gaussian_vec(rng, d);
        let n = v.norm();
        if n > 1e-8 {
            return v / n;
        }
    }
}

/// Orthonormal basis of a random m-dimensional subspace of R^d.
fn random_basis(rng: &mut ChaCha12Rng, d: usize, m: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

/// Generate the event stream for one head.
pub fn generate(spec: &StreamSpec, head_id: usize) -> Result<Vec<KVEvent>, DatagenError> {
    spec.validate()?;
    let mut rng = head_rng(spec.seed, head_id);
    let raw: Vec<(DVector<f64>, DVector<f64>)> = match &spec.kind {
        StreamKind::Gaussian => (0..spec.length)
            .map(|_| (gaussian_vec(&mut rng, spec.d_k), gaussian_vec(&mut rng, spec.d_v)))
            .collect(),
        StreamKind::SubspaceConstrained { m_k, m_v } => {
            subspace_stream(&mut rng, spec.d_k, spec.d_v, *m_k, *m_v, spec.length)
        }
        StreamKind::PeriodicLoop { unique } => {
            let base: Vec<(DVector<f64>, DVector<f64>)> = (0..*unique)
                .map(|_| (gaussian_vec(&mut rng, spec.d_k), gaussian_vec(&mut rng, spec.d_v)))
                .collect();
            (0..spec.length).map(|t| base[t % unique].clone()).collect()
        }
        StreamKind::ToyModel { scales, factors } => {
            let (a, b) = *scales
                .get(head_id)
                .ok_or(DatagenError::HeadOutOfRange {
                    head_id,
                    len: scales.len(),
                })?;
            if let FactorSchedule::PerStep(v) = factors {
                if v.len() < spec.length {
                    return Err(DatagenError::ScheduleLength {
                        got: v.len(),
                        need: spec.length,
                    });
                }
            }
            let u = unit_vec(&mut rng, spec.d_k);
            let w = unit_vec(&mut rng, spec.d_v);
            (0..spec.length)
                .map(|t| {
                    let (alpha, beta) = factors.at(t);
                    (&u * (a * alpha), &w * (b * beta))
                })
                .collect()
        }
        StreamKind::Mixture {
            labels,
            low_m_k,
            low_m_v,
        } => {
            let full = *labels.get(head_id).ok_or(DatagenError::HeadOutOfRange {
                head_id,
                len: labels.len(),
            })?;
            if full {
                (0..spec.length)
                    .map(|_| (gaussian_vec(&mut rng, spec.d_k), gaussian_vec(&mut rng, spec.d_v)))
                    .collect()
            } else {
                subspace_stream(&mut rng, spec.d_k, spec.d_v, *low_m_k, *low_m_v, spec.length)
            }
        }
    };

    let mut events = Vec::with_capacity(spec.length);
    for (t, (mut key, value)) in raw.into_iter().enumerate() {
        if spec.normalize_keys {
            let n = key.norm();
            if n > 0.0 {
                key /= n;
            }
        }
        let ev = KVEvent::new(key, value)?
            .with_gate(spec.gate.at(t))?
            .with_lr(spec.lr.at(t))?;
        events.push(ev);
    }
    Ok(events)
}

fn subspace_stream(
    rng: &mut ChaCha12Rng,
    d_k: usize,
    d_v: usize,
    m_k: usize,
    m_v: usize,
    length: usize,
) -> Vec<(DVector<f64>, DVector<f64>)> {
    let key_basis = random_basis(rng, d_k, m_k);
    let value_basis = random_basis(rng, d_v, m_v);
    (0..length)
        .map(|_| {
            let ck = gaussian_vec(rng, m_k);
            let cv = gaussian_vec(rng, m_v);
            (&key_basis * ck, &value_basis * cv)
        })
        .collect()
}

/// Analytic nuclear-norm vector of the toy model at step `t` under the
/// standard additive rule (gate = lr = 1, keys not normalized):
/// `n(t) = c(t) * g` with `c(t) = |sum_{i<=t} alpha_i beta_i|` and
/// `g_h = |a_h * b_h|`.
pub fn toy_model_closed_form(spec: &StreamSpec, t: usize) -> Result<(f64, Vec<f64>), DatagenError> {
    let (scales, factors) = match &spec.kind {
        StreamKind::ToyModel { scales, factors } => (scales, factors),
        _ => return Err(DatagenError::WrongKind { expected: "toy model" }),
    };
    if spec.normalize_keys {
        return Err(DatagenError::WrongKind {
            expected: "toy model without key normalization",
        });
    }
    if t > spec.length {
        return Err(DatagenError::StepOutOfRange {
            step: t,
            length: spec.length,
        });
    }
    if let FactorSchedule::PerStep(v) = factors {
        if v.len() < t {
            return Err(DatagenError::ScheduleLength { got: v.len(), need: t });
        }
    }
    let c: f64 = (0..t).map(|i| {
        let (a, b) = factors.at(i);
        a * b
    })
    .sum::<f64>()
    .abs();
    let g = scales.iter().map(|&(a, b)| (a * b).abs()).collect();
    Ok((c, g))
}

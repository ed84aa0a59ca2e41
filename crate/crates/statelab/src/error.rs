//! Error types, one enum per subsystem.

use thiserror::Error;

/// Errors from state construction and the update rules.
#[derive(Debug, Error)]
pub enum StateError {
    #[error("{what}: expected length {expected}, found {found}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },
    #[error("state dimensions must be >= 1, got {d_k}x{d_v}")]
    ZeroDim { d_k: usize, d_v: usize },
    #[error("the delta rule requires a square state, got {d_k}x{d_v}")]
    RectangularDelta { d_k: usize, d_v: usize },
    #[error("delta learning rate must satisfy 0 < lr <= 1, got {lr}")]
    LearningRate { lr: f64 },
    #[error("operation not defined for update rule {rule}")]
    WrongRule { rule: &'static str },
    #[error("stream is empty")]
    EmptyStream,
    #[error("snapshot step {step} outside stream range 1..={len}")]
    ScheduleOutOfRange { step: usize, len: usize },
    #[error("update failed at step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<StateError>,
    },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Errors from the spectral metrics.
#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("input contains non-finite entries")]
    NonFinite,
    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,
    #[error("rank correlation is undefined for a constant vector")]
    ConstantVector,
    #[error("vectors must have equal length: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {need} entries, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("relative tolerance must lie in (0, 1), got {eps}")]
    InvalidTolerance { eps: f64 },
}

/// Errors from trajectory assembly and the theorem verifiers.
#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("head count mismatch: {heads} head configs, {streams} snapshot streams")]
    HeadCountMismatch { heads: usize, streams: usize },
    #[error("head {head} was recorded at a different step set than head 0")]
    StepMisalignment { head: usize },
    #[error("trajectory needs at least {need} recorded steps, has {have}")]
    TooFewSteps { need: usize, have: usize },
    #[error("similarity undefined: zero vector at recorded step {step}")]
    UndefinedSimilarity { step: usize },
    #[error("supplied bound B = {supplied} is below the measured max increment {measured}")]
    InvalidBound { supplied: f64, measured: f64 },
    #[error("step {step} is not a recorded trajectory step")]
    StepNotRecorded { step: usize },
    #[error("{check} is not available here: {why}")]
    Unsupported { check: &'static str, why: String },
    #[error("orthogonal decomposition identity violated at step {step} (relative error {rel_error:.3e})")]
    DecompositionIdentity { step: usize, rel_error: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Errors from saturation scoring and pruning.
#[derive(Debug, Error)]
pub enum PruneError {
    #[error("mixing weight alpha must lie in [0, 1], got {alpha}")]
    InvalidAlpha { alpha: f64 },
    #[error("prune fraction must lie in [0, 1), got {fraction}")]
    InvalidFraction { fraction: f64 },
    #[error("averaging window [{lo}, {hi}] is empty or inverted")]
    EmptyWindow { lo: usize, hi: usize },
    #[error("averaging window [{lo}, {hi}] contains no recorded steps")]
    WindowOutsideRecorded { lo: usize, hi: usize },
    #[error("all mean nuclear norms are zero; the norm term cannot be normalized")]
    DegenerateNorms,
    #[error("mask length {mask} does not match head count {heads}")]
    MaskLength { mask: usize, heads: usize },
}

/// Errors from the synthetic stream generators.
#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("stream length must be >= 1")]
    ZeroLength,
    #[error("subspace dims must satisfy 1 <= m_k <= d_k and 1 <= m_v <= d_v, got m_k={m_k}, m_v={m_v} for {d_k}x{d_v}")]
    BadSubspaceDims {
        m_k: usize,
        m_v: usize,
        d_k: usize,
        d_v: usize,
    },
    #[error("periodic loop needs 1 <= unique <= length, got unique={unique}, length={length}")]
    BadPeriod { unique: usize, length: usize },
    #[error("toy-model scales must be positive, got ({a}, {b}) for head {head_id}")]
    BadToyScales { head_id: usize, a: f64, b: f64 },
    #[error("head {head_id} out of range for this spec ({len} heads parameterized)")]
    HeadOutOfRange { head_id: usize, len: usize },
    #[error("operation requires a {expected} spec")]
    WrongKind { expected: &'static str },
    #[error("per-step schedule has {got} entries, stream length is {need}")]
    ScheduleLength { got: usize, need: usize },
    #[error("step {step} exceeds stream length {length}")]
    StepOutOfRange { step: usize, length: usize },
    #[error(transparent)]
    State(#[from] StateError),
}

/// Errors surfaced by the command layer (config parsing, telemetry I/O,
/// capability misses).  Commands map these to exit code 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("telemetry parse error at line {line}: {msg}")]
    Telemetry { line: usize, msg: String },
    #[error("{check} requires raw key/value streams; rerun `verify` against a config instead of a telemetry file")]
    MissingStreams { check: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Prune(#[from] PruneError),
    #[error(transparent)]
    Datagen(#[from] DatagenError),
}

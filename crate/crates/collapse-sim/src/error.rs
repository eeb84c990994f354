use thiserror::Error;

/// Errors raised by state construction, the fluctuation operators, the walk
/// model, and the spectral routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("weights and phases differ in length: {weights} vs {phases}")]
    LengthMismatch { weights: usize, phases: usize },

    #[error("state must contain at least one packet")]
    EmptyState,

    #[error("negative weight {weight} at packet {index}")]
    NegativeWeight { index: usize, weight: f64 },

    #[error("weight sum {sum} is outside [1 - 1e-9, 1 + 1e-9]")]
    NormOutOfRange { sum: f64 },

    #[error("epsilon {0} must lie strictly inside (0, 1)")]
    EpsilonOutOfRange(f64),

    #[error("tau {0} must be positive")]
    TauOutOfRange(f64),

    #[error("packet index {index} out of range for {len} packets")]
    PacketOutOfRange { index: usize, len: usize },

    #[error("packet {0} is destroyed")]
    PacketDestroyed(usize),

    #[error("all packet weights are zero; nothing to draw")]
    AllWeightsZero,

    #[error("phase sample requires x >= eps_prime > 0, got x = {x}, eps_prime = {eps_prime}")]
    PhaseSampleDomain { x: f64, eps_prime: f64 },

    #[error("weight {0} must be positive")]
    NonPositiveWeight(f64),

    #[error("state is collapsed; the operator expects at least two live packets")]
    StateCollapsed,

    #[error("total weight {total} does not match the expected {expected} within {tolerance}")]
    UnexpectedTotalWeight {
        total: f64,
        expected: f64,
        tolerance: f64,
    },

    #[error("weight {0} lies outside [0, 1]")]
    WeightOutOfRange(f64),

    #[error("miss probability q({x}) = {q} lies outside [0, 1]")]
    InvalidMissProbability { x: f64, q: f64 },

    #[error("p + q + r = {0} is not 1 within 1e-9")]
    NotAProbabilityTriple(f64),

    #[error("no effective move: p + r = 0 (absorbing point)")]
    AbsorbingPoint,

    #[error("1/epsilon = {0} is not an integer; the weight grid requires epsilon to divide 1")]
    GridMismatch(f64),

    #[error("grid must contain at least two steps (epsilon <= 0.5), got M = {0}")]
    GridTooSmall(usize),

    #[error("x0 = {x0} is not a grid point for epsilon = {eps}")]
    OffGrid { x0: f64, eps: f64 },

    #[error("combined scheme requires epsilon <= 0.5, got {0}")]
    CombinedSchemeRange(f64),

    #[error("symmetric eigensolver failed to converge")]
    EigenNonConvergence,

    #[error("off-diagonal product vanished at column {0}; matrix cannot be symmetrized")]
    NotSymmetrizable(usize),

    #[error("distribution entry {value} at index {index} is negative")]
    NegativeDistributionEntry { index: usize, value: f64 },

    #[error("distribution sums to {0}, expected 1 within 1e-9")]
    DistributionNotNormalized(f64),

    #[error("distribution length {got} does not match grid dimension {expected}")]
    DistributionLength { got: usize, expected: usize },

    #[error("trajectory count must be at least 1")]
    NoTrajectories,

    #[error("max_steps must be at least 1")]
    NoSteps,

    #[error("time series was not recorded (record_every = 0)")]
    SeriesNotRecorded,

    #[error("failed to build worker pool: {0}")]
    WorkerPool(String),

    #[error("unknown phase distribution {0:?}; expected three-point or deterministic-real")]
    UnknownPhaseDist(String),

    #[error(
        "unknown check {0:?}; expected axiom, nsf-means, psf-means, additivity, walk or spectral"
    )]
    UnknownCheck(String),
}

pub type Result<T> = std::result::Result<T, Error>;

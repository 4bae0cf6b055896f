//! Error type shared across the crate.

use thiserror::Error;

/// Errors raised by spaces, losses, pools, engines and harness runs.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A quantization level outside the structure's supported range.
    #[error("level {level} outside supported range {min}..={max}")]
    LevelOutOfRange { level: u32, min: u32, max: u32 },

    /// A signal that does not belong to the declared signal space.
    #[error("signal outside the signal space: {0}")]
    SignalOutsideSpace(String),

    /// A prediction outside the prediction space of the loss.
    #[error("prediction {0} outside the prediction space")]
    PredictionOutsideSpace(f64),

    /// An observation outside the observation space of the loss.
    #[error("observation {0} outside the observation space")]
    ObservationOutsideSpace(f64),

    /// Requested operation has no implementation for the given configuration.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Enumerating the expert pool would exceed the configured cap.
    /// `level` is the first level at which the cap is crossed.
    #[error("expert pool would hold {required} experts at level {level}, exceeding the cap of {cap}")]
    PoolSizeExceeded {
        level: u32,
        required: u128,
        cap: usize,
    },

    /// Catch-all for malformed arguments.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Deterministic aggregation requires a loss that is convex in the
    /// prediction; non-convex losses must go through the randomized engine.
    #[error("loss is not convex in the prediction; use the randomized engine")]
    NonConvexLoss,

    /// A protocol round was driven out of order (predict/update alternation).
    #[error("round sequencing violated: {0}")]
    Sequencing(String),

    /// A recorded history does not retain the per-round expert loss data
    /// needed to recompute the aggregation bounds.
    #[error("history lacks per-round expert loss data: {0}")]
    InsufficientData(String),

    /// The prediction grid cannot approximate the benchmark rule to the
    /// accuracy the requested tolerance demands.
    #[error(
        "grid too coarse for tolerance {epsilon}: nearest expert distance {delta} \
         exceeds {epsilon}/2; an interval grid of at least {required_grid} points is needed"
    )]
    GridTooCoarse {
        epsilon: f64,
        delta: f64,
        required_grid: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

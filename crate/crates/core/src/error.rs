use thiserror::Error;

/// Errors produced by the pricing and estimation pipeline.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A parameter violated a domain invariant (non-positive rate, loss rate
    /// outside [0,1], ...).
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    /// Evaluation time outside the path horizon.
    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    /// The jump pmf formula is singular when the merged down-jump rate
    /// coincides with the up-jump rate; the Monte-Carlo frequencies are the
    /// fallback in that case.
    #[error(
        "jump pmf formula singular (merged rate equals rate_normal); \
         use Monte-Carlo frequencies instead"
    )]
    SingularPmf,

    /// Operation defined only for paths started in the normal regime.
    #[error("operation requires initial_state = normal (0), got crisis (1)")]
    RequiresNormalStart,

    /// CSV input could not be parsed.
    #[error("csv error at line {line}: {message}")]
    Csv { line: usize, message: String },

    /// A stress series was empty or too short for the requested operation.
    #[error("stress series too short: {0}")]
    SeriesTooShort(String),

    /// Bond returns must dominate the discount rate so that the
    /// valuation-measure default intensities are nonnegative.
    #[error(
        "bond return {mu} is below the discount rate {r_d}; \
         valuation-measure default intensity would be negative"
    )]
    NegativeIntensity { mu: f64, r_d: f64 },

    /// A necessary no-arbitrage condition failed; pricing refuses to run.
    #[error("necessary no-arbitrage condition violated: {0}")]
    AssumptionViolation(String),

    /// The regression design matrix lost rank at a backward step.
    #[error("regression matrix rank-deficient at step {step} (regime {regime})")]
    RankDeficient { step: usize, regime: u8 },

    /// The BSDE driver evaluated to a non-finite value.
    #[error("non-finite driver value at step {step}, path {path}: u={u}, z={z}")]
    NonFiniteDriver {
        step: usize,
        path: usize,
        u: f64,
        z: f64,
    },

    /// The shooting optimizer diverged.
    #[error("shooting solver diverged at iteration {iteration} (loss {loss})")]
    SolverDiverged { iteration: usize, loss: f64 },

    /// Grids or path counts of two inputs do not line up.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Per-path solver output was not retained but is required.
    #[error("solver output does not carry per-path trajectories; re-run with store_paths")]
    MissingPaths,

    /// I/O error wrapper.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

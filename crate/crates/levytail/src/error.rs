//! Error type shared by every numerical module.

use thiserror::Error;

/// Errors raised by grid construction, series evaluation, Fourier work and
/// the statistical pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("Levy measure integral does not stabilize: {0}")]
    DivergentLevyMeasure(String),

    #[error("nu((1,inf)) is not positive (got {0:.3e})")]
    EmptyTail(f64),

    #[error("grid too coarse: trapezoid/Simpson mass discrepancy {discrepancy:.3e} exceeds {tol:.3e}")]
    GridTooCoarse { discrepancy: f64, tol: f64 },

    #[error("incompatible grids: {0}")]
    IncompatibleGrids(String),

    #[error("series truncation insufficient: tail bound {bound:.3e} above {tol:.3e} at cap n={cap}")]
    TruncationInsufficient { bound: f64, tol: f64, cap: usize },

    #[error("inverse series diverges: rate {lam:.6} >= log 2")]
    SeriesDiverges { lam: f64 },

    #[error("adaptive quadrature failed to converge: {0}")]
    QuadratureFailure(String),

    #[error("characteristic function not absolutely integrable on the window: edge magnitude {edge:.3e}")]
    NotAbsolutelyIntegrable { edge: f64 },

    #[error("characteristic function magnitude {min:.3e} too close to zero for a stable phase")]
    ZeroCrossing { min: f64 },

    #[error("phase step {step:.3} rad exceeds pi/2; refine the frequency grid")]
    PhaseUnwrap { step: f64 },

    #[error("exponential tilt diverges for gamma={gamma} against tail {tail}")]
    TiltDiverges { gamma: f64, tail: String },

    #[error("density underflows across the whole read-out window")]
    WindowUnderflow,

    #[error("positive part has zero mass")]
    ZeroPositiveMass,

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("hypothesis check failed: {0}")]
    HypothesisCheckFailed(String),

    #[error("grid infeasible: {0}")]
    GridInfeasible(String),

    #[error("cutoff epsilon required for an infinite-activity Levy density")]
    CutoffRequired,

    #[error("density underflow at {count} sample points with no tail surrogate")]
    DensityUnderflow { count: usize },

    #[error("negative mass {clamped:.3e} clamped during convolution exceeds {tol:.3e}")]
    ClampExceeded { clamped: f64, tol: f64 },

    #[error("mass invariant violated: got {got:.8} expected {expected:.8}")]
    MassCheck { got: f64, expected: f64 },

    #[error("model file error: {0}")]
    Model(String),
}

pub type Result<T> = std::result::Result<T, Error>;

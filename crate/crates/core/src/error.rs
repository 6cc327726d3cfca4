use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("field mean {mean:e} exceeds the mean-zero tolerance {tol:e}")]
    MeanNotZero { mean: f64, tol: f64 },

    #[error("grid mismatch: {left} modes vs {right} modes")]
    GridMismatch { left: usize, right: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("degenerate Stokes expansion: resonance at harmonic n = {harmonic} (gamma + 16 beta pi^4 k^4 n^2 = {gap:e})")]
    DegenerateStokes { harmonic: usize, gap: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {last_residual:e})")]
    NoConvergence {
        iterations: usize,
        last_residual: f64,
    },

    #[error("singular Jacobian (pivot ratio {pivot_ratio:e})")]
    SingularJacobian { pivot_ratio: f64 },

    #[error("continuation stalled at step {step} (homotopy parameter {s})")]
    ContinuationStalled { step: usize, s: f64 },

    #[error("beta must be nonzero for a finite critical frequency")]
    BetaZero,

    #[error("reduced model requires beta = 0 (got {0})")]
    BetaNonZero(f64),

    #[error("kernel basis normalization violated: Gram matrix {gram:?}")]
    NormalizationViolated { gram: [[f64; 2]; 2] },

    #[error("n = 0 row of the Bloch operator is inconsistent at xi = 0 (off-diagonal mass {0:e})")]
    XiZeroDeflationFailed(f64),

    #[error(
        "eigenvalue window ambiguous at xi = {xi}: {count} eigenvalues inside radius {radius:e}"
    )]
    WindowAmbiguous { xi: f64, count: usize, radius: f64 },

    #[error("matrices refer to different waves")]
    WaveMismatch,

    #[error("stiff integration failure: step size {step:e} underflowed at theta = {theta}")]
    StiffIntegrationFailure { theta: f64, step: f64 },

    #[error("eigenvalue computation failed to converge")]
    EigenFailure,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("adiabatic basis is degenerate: pump and Stokes amplitudes both vanish")]
    DegenerateBasis,

    #[error(
        "step size underflow at t = {time:.6e} s: substep {step:.3e} s still has \
         error estimate {estimate:.3e} above tolerance {tol:.1e}"
    )]
    ConvergenceFailure {
        time: f64,
        step: f64,
        estimate: f64,
        tol: f64,
    },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("accumulated phase is undefined when I = Q = 0")]
    UndefinedPhase,

    #[error(
        "phase step of {step:.3} rad between neighbouring cells near index {index} is \
         ambiguous; refine the grid"
    )]
    RefineGrid { index: usize, step: f64 },

    #[error("non-uniform sampling: {0}")]
    NonUniformSampling(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

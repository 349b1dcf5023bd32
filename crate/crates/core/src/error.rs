use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("rotation axis has zero length")]
    ZeroAxis,

    #[error("mean spin collapsed (|<F>| = {0:e})")]
    MeanSpinCollapsed(f64),

    #[error("spin-1/2 cannot be squeezed: F_z^2 is proportional to the identity")]
    SpinHalfNoSqueezing,

    #[error("positivity lost at t = {time} ms (min eigenvalue {min_eigenvalue:e}); reduce dt")]
    PositivityLost { time: f64, min_eigenvalue: f64 },

    #[error("no atomic noise resolved (sample variance {sample_var} <= 1/2)")]
    NoAtomicNoise { sample_var: f64 },

    #[error("zero vacuum variance, cannot normalize record")]
    ZeroVacuumVariance,

    #[error("coupling kappa2 = 0, probe output carries no atomic information")]
    ZeroCoupling,

    #[error("unphysical correction: {quadrature} variance {value} below -{tolerance}")]
    UnphysicalCorrection {
        quadrature: &'static str,
        value: f64,
        tolerance: f64,
    },

    #[error("maximum-likelihood iteration did not converge after {iterations} iterations (last gain {last_gain:e})")]
    NotConverged { iterations: usize, last_gain: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("at t_r = {t_r} ms: {source}")]
    AtDuration {
        t_r: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerical pipeline, as opposed to bad input or IO.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::PositivityLost { .. }
            | Error::MeanSpinCollapsed(_)
            | Error::NoAtomicNoise { .. }
            | Error::ZeroVacuumVariance
            | Error::UnphysicalCorrection { .. }
            | Error::NotConverged { .. } => true,
            Error::AtDuration { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("missing dependency: {0}")]
    Dependency(String),

    #[error("solver did not converge after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("unstable model: spectral abscissa {abscissa:e}, dominated by mode `{mode}`")]
    Unstable { abscissa: f64, mode: String },

    #[error("infeasible request: {0}")]
    Infeasible(String),

    #[error("spectrum error: {message} (offending direction dominated by `{direction}`)")]
    Spectrum { message: String, direction: String },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("Fock truncation leakage {leakage:e} exceeds {limit:e} at t = {time}")]
    Leakage { leakage: f64, limit: f64, time: f64 },

    #[error("unphysical covariance at t = {time}: min eigenvalue of sigma + i*Omega is {min_eigenvalue:e}")]
    Unphysical { time: f64, min_eigenvalue: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by the input description rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::Dependency(_))
    }
}

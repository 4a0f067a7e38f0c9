use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("singular mapping at eta = {eta:?}: jacobian determinant {det:e}")]
    SingularMapping { eta: [f64; 3], det: f64 },

    #[error("invalid mapping: {0}")]
    InvalidMapping(String),

    #[error("unsupported boundary condition: only fully periodic spaces are implemented")]
    UnsupportedBoundary,

    #[error("invalid discretization: {0}")]
    InvalidDiscretization(String),

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("right-hand side is incompatible with the periodic Poisson problem (mean {mean:e})")]
    Compatibility { mean: f64 },

    #[error("marker {index} has non-positive background value f0 = {f0:e}")]
    InvalidMarker { index: usize, f0: f64 },

    #[error("insufficient data: found {found} local maxima, need {needed}")]
    InsufficientData { found: usize, needed: usize },

    #[error("non-uniform sampling grid: {0}")]
    NonUniformGrid(String),

    #[error("frequency {omega} lies within the pole tolerance of harmonic {harmonic}")]
    PoleProximity { omega: f64, harmonic: usize },

    #[error("root finding failed: {0}")]
    RootBracket(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, msg: String },

    #[error("malformed file {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("step {step} (t = {time}): {source}")]
    Step {
        step: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

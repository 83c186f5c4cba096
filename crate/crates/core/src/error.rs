use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("point {0:?} lies outside the mesh")]
    PointNotFound([f64; 3]),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("singular viscosity: kappa1 = 0 with B = 0 and r(c) = {r} < 2")]
    SingularViscosity { r: f64 },

    #[error("non-finite viscosity at cell {cell}")]
    NonFiniteViscosity { cell: usize },

    #[error("quadrature of degree {0} is not supported (maximum 8)")]
    UnsupportedQuadrature(usize),

    #[error("cross-mesh evaluation failed: {0}")]
    CrossMesh(Box<Error>),

    #[error("index {index} out of range (len {len})")]
    OutOfRange { index: usize, len: usize },

    #[error("linear solve failed at column {column}: pivot {pivot:e} (largest pivot so far {max_pivot:e})")]
    Singular {
        column: usize,
        pivot: f64,
        max_pivot: f64,
    },

    #[error("{what} did not converge in {iterations} iterations (last change {last_change:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        last_change: f64,
        trace: Option<Box<crate::solver::IterationTrace>>,
    },

    #[error("{what} diverged: non-finite residual at iteration {iteration}")]
    Divergence {
        what: &'static str,
        iteration: usize,
    },

    #[error("unknown preset '{0}'")]
    UnknownPreset(String),

    #[error("Luxembourg norm bracket exceeded 1e30: non-finite or unbounded input")]
    NormOverflow,

    #[error("non-finite value in integrand at cell {cell}")]
    NonFinite { cell: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for outcomes that are iteration failures rather than bad input.
    pub fn is_nonconvergence(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. } | Error::Divergence { .. }
        )
    }
}

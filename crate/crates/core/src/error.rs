use thiserror::Error;

/// Errors raised by the numerical modules and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("rank mismatch: expected {expected}, found {found}")]
    RankMismatch { expected: usize, found: usize },

    #[error("bidegree mismatch: expected ({}, {}), found ({}, {})", expected.0, expected.1, found.0, found.1)]
    BidegreeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("metric is singular or not positive at unmasked point {point}")]
    SingularMetric { point: usize },

    #[error("metric is not hermitian at point {point} (defect {defect:.3e})")]
    NonHermitianMetric { point: usize, defect: f64 },

    #[error("curvature symmetry violated at point {point} (defect {defect:.3e})")]
    CurvatureSymmetry { point: usize, defect: f64 },

    #[error("invalid convolution kernel: {0}")]
    InvalidKernel(String),

    #[error("kernel radius {radius} is below two grid spacings ({spacing})")]
    UnderResolvedKernel { radius: f64, spacing: f64 },

    #[error("precondition `{check}` violated: measured {value:.3e}")]
    Precondition { check: &'static str, value: f64 },

    #[error("right-hand side has a component {component:.3e} outside the range of dbar")]
    NotInRange { component: f64 },

    #[error("conjugate gradients stagnated after {iterations} iterations at relative residual {residual:.3e} (near-null Rayleigh quotient {rayleigh:.3e})")]
    CgStagnation {
        iterations: usize,
        residual: f64,
        rayleigh: f64,
        near_null: Box<crate::exterior::EForm>,
    },

    #[error("curvature floor not achieved at nu = {nu}: delta = {delta:.4}, required >= {required:.4}")]
    CurvatureFloor { nu: usize, delta: f64, required: f64 },

    #[error("unknown catalog metric `{0}`")]
    UnknownCatalog(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("field file: {0}")]
    FieldFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

//! Exterior calculus on coordinate charts, fixed-point data of circle-type
//! vector fields, and quadrature machinery for checking that the integral of
//! an equivariantly closed form equals its localized fixed-point sum, both
//! directly and along a deformation of the integration cycle through the
//! cotangent bundle.
//!
//! The crate is organized bottom-up:
//!
//! - [`ad`]: forward-mode automatic differentiation (jets) that every
//!   coefficient function, metric, vector field and chart map is written in.
//! - [`linalg`]: small dense matrix kernels (Cholesky, LU, Jacobi eigenvalues,
//!   Pfaffian).
//! - [`forms`]: differential forms on a chart with wedge, contraction,
//!   exterior derivative, pullback and grading.
//! - [`geometry`]: charts, metrics, vector fields, flows and models.
//! - [`equivariant`]: the equivariant differential, moment map, canonical
//!   two-form and the cotangent-bundle extension of a form.
//! - [`fixedpoints`]: Newton zero finding, linearization and the oriented
//!   square root of its determinant.
//! - [`quadrature`]: Gauss-Legendre tensor grids, top-form integration and
//!   graph-section integration.
//! - [`localization`]: both sides of the fixed-point formula and the combined
//!   verification report.
//! - [`proofpath`]: cycle-deformation invariance, restricted closedness on
//!   chain frames, tail decay outside fixed-point cubes, and the per-point
//!   Gaussian limit.
//! - [`models`]: built-in models with known closed-form answers, including
//!   negative controls.
//! - [`report`]: deterministic structured-text report output.
//! - [`cli`]: the command-line driver.

pub mod ad;
pub mod cli;
pub mod equivariant;
pub mod fixedpoints;
pub mod forms;
pub mod geometry;
pub mod linalg;
pub mod localization;
pub mod models;
pub mod proofpath;
pub mod quadrature;
pub mod report;
pub mod rng;

/// Errors shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("chart dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("form degree {degree} out of range on a {dim}-dimensional chart")]
    DegreeOutOfRange { degree: usize, dim: usize },

    #[error("wedge degree overflow: {j} + {k} exceeds chart dimension {dim}")]
    WedgeOverflow { j: usize, k: usize, dim: usize },

    #[error("contraction of a 0-form is undefined")]
    ContractZeroForm,

    #[error("expected {expected} frame vectors, got {got}")]
    FrameSize { expected: usize, got: usize },

    #[error("metric is not positive definite at the queried point")]
    NonSpdMetric,

    #[error("mixed form has parts of both parities; even/odd split required")]
    MixedParity,

    #[error("exponential input must have parts only in degrees 0 and 2")]
    ExpEvenDegree,

    #[error("flow at time zero is not the identity (residual {residual:.3e})")]
    FlowNotIdentity { residual: f64 },

    #[error("degenerate zero in chart {chart}: linearization is singular")]
    DegenerateZero { chart: String },

    #[error("no zero of the vector field found in chart {chart}")]
    NoZeroFound { chart: String },

    #[error("metric not invariant at {chart}: oriented square root ill-defined (skewness {residual:.3e})")]
    NotSkew { chart: String, residual: f64 },

    #[error("matrix is singular")]
    SingularMatrix,

    #[error("unknown model {0:?}")]
    UnknownModel(String),

    #[error("negative deformation parameter {0}")]
    NegativeR(f64),

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("model validation failed: {0}")]
    InvalidModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;

//! Error type shared by every module of the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("field has {found} values, expected {expected}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("non-finite value at node {node}")]
    NonFinite { node: usize },

    #[error("metric is not positive definite at node {node} (smallest eigenvalue {min_eigenvalue:e})")]
    SingularMetric { node: usize, min_eigenvalue: f64 },

    #[error("conformal factor must be positive, found {value:e} at node {node}")]
    NonPositiveConformalFactor { node: usize, value: f64 },

    #[error("dimension {0} is too small, need n >= 3")]
    DimensionTooSmall(usize),

    #[error("eigensolver did not converge: residual {residual:e} after {iterations} iterations")]
    ConvergenceFailure { residual: f64, iterations: usize },

    #[error("operator has no eigenvalue within the kernel tolerance")]
    EmptyKernel,

    #[error("coupling constant c = {0} is excluded (c must differ from 0 and 1/2)")]
    DisallowedCoupling(f64),

    #[error("direction is not traceless: max |tr_g h| = {max_trace:e}")]
    NotTraceless { max_trace: f64 },

    #[error("field is constant")]
    ConstantField,

    #[error("metric curve leaves the positive-definite cone at t = {t}")]
    SpdViolation { t: f64 },

    #[error("branch {branch} is ambiguous at step {step}: best overlap {overlap:.3}")]
    BranchAmbiguity { step: usize, branch: usize, overlap: f64 },

    #[error("branch {branch} does not change sign over the parameter grid")]
    NoSignChange { branch: usize },

    #[error("first-order perturbation is degenerate: largest kernel-breaking norm {max_norm:e}")]
    FirstOrderDegenerate { max_norm: f64 },

    #[error("kernel multiplicity {multiplicity} did not drop within |t| <= {epsilon}")]
    LineSearchFailure { multiplicity: usize, epsilon: f64, q_matrix: Vec<Vec<f64>> },

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("truncated spectrum inadequate: {0}")]
    TruncationInadequate(String),

    #[error("no admissible t in [{lo}, {hi}]")]
    EmptyAdmissibleSet { lo: f64, hi: f64 },

    #[error("scalar curvature {0} is not negative")]
    NonNegativeScalarCurvature(f64),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

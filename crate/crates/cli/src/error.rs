//! Command errors, their exit codes and the machine-readable error record.

use serde::Serialize;
use thiserror::Error;
use yamabe_core::Error as CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_GEOMETRY: i32 = 3;
pub const EXIT_CONVERGENCE: i32 = 4;
pub const EXIT_DEGENERATE: i32 = 5;
pub const EXIT_PERTURBATION: i32 = 6;
pub const EXIT_PRODUCT: i32 = 7;
pub const EXIT_IO: i32 = 8;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io(_) => EXIT_IO,
            CliError::Core(e) => match e {
                CoreError::InvalidParameters(_) | CoreError::DisallowedCoupling(_) => EXIT_CONFIG,
                CoreError::InvalidGrid(_)
                | CoreError::GridMismatch
                | CoreError::LengthMismatch { .. }
                | CoreError::NonFinite { .. }
                | CoreError::SingularMetric { .. }
                | CoreError::NonPositiveConformalFactor { .. }
                | CoreError::DimensionTooSmall(_)
                | CoreError::NotTraceless { .. }
                | CoreError::ConstantField
                | CoreError::SpdViolation { .. } => EXIT_GEOMETRY,
                CoreError::ConvergenceFailure { .. } => EXIT_CONVERGENCE,
                CoreError::FirstOrderDegenerate { .. } => EXIT_DEGENERATE,
                CoreError::EmptyKernel
                | CoreError::BranchAmbiguity { .. }
                | CoreError::NoSignChange { .. }
                | CoreError::LineSearchFailure { .. } => EXIT_PERTURBATION,
                CoreError::TruncationInadequate(_)
                | CoreError::EmptyAdmissibleSet { .. }
                | CoreError::NonNegativeScalarCurvature(_) => EXIT_PRODUCT,
                CoreError::Format(_) | CoreError::Io(_) => EXIT_IO,
            },
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "Config",
            CliError::Io(_) => "Io",
            CliError::Core(e) => match e {
                CoreError::InvalidGrid(_) => "InvalidGrid",
                CoreError::GridMismatch => "GridMismatch",
                CoreError::LengthMismatch { .. } => "LengthMismatch",
                CoreError::NonFinite { .. } => "NonFinite",
                CoreError::SingularMetric { .. } => "SingularMetric",
                CoreError::NonPositiveConformalFactor { .. } => "NonPositiveConformalFactor",
                CoreError::DimensionTooSmall(_) => "DimensionTooSmall",
                CoreError::ConvergenceFailure { .. } => "ConvergenceFailure",
                CoreError::EmptyKernel => "EmptyKernel",
                CoreError::DisallowedCoupling(_) => "DisallowedCoupling",
                CoreError::NotTraceless { .. } => "NotTraceless",
                CoreError::ConstantField => "ConstantField",
                CoreError::SpdViolation { .. } => "SpdViolation",
                CoreError::BranchAmbiguity { .. } => "BranchAmbiguity",
                CoreError::NoSignChange { .. } => "NoSignChange",
                CoreError::FirstOrderDegenerate { .. } => "FirstOrderDegenerate",
                CoreError::LineSearchFailure { .. } => "LineSearchFailure",
                CoreError::InvalidParameters(_) => "InvalidParameters",
                CoreError::TruncationInadequate(_) => "TruncationInadequate",
                CoreError::EmptyAdmissibleSet { .. } => "EmptyAdmissibleSet",
                CoreError::NonNegativeScalarCurvature(_) => "NonNegativeScalarCurvature",
                CoreError::Format(_) => "Format",
                CoreError::Io(_) => "Io",
            },
        }
    }

    pub fn record(&self, command: &str) -> ErrorRecord {
        let q_matrix = match self {
            CliError::Core(CoreError::LineSearchFailure { q_matrix, .. }) => Some(q_matrix.clone()),
            _ => None,
        };
        ErrorRecord {
            command: command.to_string(),
            kind: self.kind(),
            exit_code: self.exit_code(),
            message: self.to_string(),
            q_matrix,
        }
    }
}

/// Written to `error.json` and printed to stderr on failure.
#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub command: String,
    pub kind: &'static str,
    pub exit_code: i32,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_matrix: Option<Vec<Vec<f64>>>,
}

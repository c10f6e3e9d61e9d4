use thiserror::Error;

/// Errors produced anywhere in the analysis engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid {role} operator: {reason}")]
    InvalidOperator { role: &'static str, reason: String },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("width mismatch between layer {prev} (output {prev_width}) and layer {next} (input {next_width})")]
    WidthMismatch {
        prev: usize,
        prev_width: usize,
        next: usize,
        next_width: usize,
    },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("point {point} falls outside the output domain on axis {axis}")]
    OutOfRange { point: String, axis: usize },

    #[error("not covered by the abstraction: {0}")]
    NotCovered(String),

    #[error("cell {0} is empty")]
    EmptyCell(usize),

    #[error("partition is not a sign partition")]
    NotSignPartition,

    #[error("partition mismatch: {0}")]
    PartitionMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("enumeration budget exceeded: {required} evaluations required, cap is {cap}")]
    BudgetExceeded { required: usize, cap: usize },

    #[error("exact arithmetic unavailable: {0}")]
    Inexact(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidDistribution(_) => "invalid_distribution",
            Error::InvalidOperator { .. } => "invalid_operator",
            Error::InvalidGrid(_) => "invalid_grid",
            Error::Parse { .. } => "parse",
            Error::WidthMismatch { .. } => "width_mismatch",
            Error::InvalidNetwork(_) => "invalid_network",
            Error::OutOfRange { .. } => "out_of_range",
            Error::NotCovered(_) => "not_covered",
            Error::EmptyCell(_) => "empty_cell",
            Error::NotSignPartition => "not_sign_partition",
            Error::PartitionMismatch(_) => "partition_mismatch",
            Error::Config(_) => "config",
            Error::BudgetExceeded { .. } => "budget_exceeded",
            Error::Inexact(_) => "inexact",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use std::path::PathBuf;

use thiserror::Error;

use crate::dataset::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("operation requires a {expected} dataset")]
    TaskMismatch { expected: &'static str },

    #[error("{file}:{line}:{column}: {message}")]
    Parse {
        file: PathBuf,
        line: u64,
        column: u64,
        message: String,
    },

    #[error("row-count mismatch: {left} has {left_rows} rows, {right} has {right_rows}")]
    RowCountMismatch {
        left: PathBuf,
        left_rows: usize,
        right: PathBuf,
        right_rows: usize,
    },

    #[error("dataset failed validation:\n{0}")]
    Validation(ValidationReport),

    #[error("negative count {value} for token {token:?} at instance {instance}")]
    NegativeCount {
        instance: usize,
        token: String,
        value: f64,
    },

    #[error("instance id {id} out of range (dataset has {len} instances)")]
    InstanceOutOfRange { id: u64, len: usize },

    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(&'static str),

    #[error("empty cell: complementarity is undefined without points")]
    EmptyCell,

    #[error("empty support")]
    EmptySupport,

    #[error("distributions are defined over different supports")]
    SupportMismatch,

    #[error("empty {0}")]
    EmptySubset(&'static str),

    #[error("subsets overlap on {0} instance(s)")]
    OverlappingSubsets(usize),

    #[error("invalid sort keys: {0}")]
    InvalidSort(String),

    #[error("unknown feature {0:?}")]
    MissingFeature(String),

    #[error("feature {name:?} is {kind} and cannot be {op}")]
    UnsupportedFeature {
        name: String,
        kind: &'static str,
        op: &'static str,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::TaskMismatch { .. } => "task_mismatch",
            Error::Parse { .. } => "parse",
            Error::RowCountMismatch { .. } => "row_count_mismatch",
            Error::Validation(_) => "validation",
            Error::NegativeCount { .. } => "negative_count",
            Error::InstanceOutOfRange { .. } => "instance_out_of_range",
            Error::DegeneratePolygon(_) => "degenerate_polygon",
            Error::EmptyCell => "empty_cell",
            Error::EmptySupport => "empty_support",
            Error::SupportMismatch => "support_mismatch",
            Error::EmptySubset(_) => "empty_subset",
            Error::OverlappingSubsets(_) => "overlapping_subsets",
            Error::InvalidSort(_) => "invalid_sort",
            Error::MissingFeature(_) => "missing_feature",
            Error::UnsupportedFeature { .. } => "unsupported_feature",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

/// Errors produced by dataset handling, training, projection and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two operands have incompatible shapes.
    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimensionMismatch {
        context: String,
        expected: String,
        got: String,
    },

    /// A feature entry is NaN or infinite.
    #[error("non-finite value at (row {row}, col {col}){}", location_suffix(.path))]
    NonFinite {
        row: usize,
        col: usize,
        path: Option<PathBuf>,
    },

    /// A file does not start with a recognized header.
    #[error("malformed header in {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    /// A data file failed to parse.
    #[error("parse error in {path} at line {line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    /// The same sample identifier appears twice in a labels file.
    #[error("duplicate sample_id `{id}` in {path} at line {line}")]
    DuplicateSampleId {
        id: String,
        path: PathBuf,
        line: usize,
    },

    /// A matrix that must be symmetric is not, beyond tolerance.
    #[error("matrix is not symmetric: max asymmetry {asymmetry:.3e} exceeds {tolerance:.3e}")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },

    /// The within-class scatter has no null space of the required dimension.
    /// The small-sample-size condition is not met (feature dimension too low,
    /// or duplicated identities).
    #[error(
        "no null space: {found} of the required {required} eigenvalues fall below \
         the rank threshold"
    )]
    NoNullSpace { found: usize, required: usize },

    /// One or more projection directions have no positive between-class
    /// scatter; the listed columns do not separate any pair of classes.
    #[error("between-class scatter not positive along projection column(s) {columns:?}")]
    BetweenScatterNotPositive { columns: Vec<usize> },

    /// The kernel matrix is degenerate (zero width or numerically rank 0).
    #[error("degenerate kernel: {0}")]
    DegenerateKernel(String),

    /// A split request produced no training identities.
    #[error("split yields 0 training identities (fraction {fraction} of {classes} classes)")]
    EmptySplit { fraction: f64, classes: usize },

    /// Unlabeled data spans a single camera; no cross-view graph exists.
    #[error("cross-view graph requires at least 2 cameras, found {found}")]
    SingleCamera { found: usize },

    /// A probe identity has no match in the gallery.
    #[error("probe id `{id}` has no gallery match")]
    ProbeWithoutMatch { id: String },

    /// Underlying I/O failure.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A serialized model is inconsistent or incomplete.
    #[error("invalid model at {path}: {reason}")]
    InvalidModel { path: PathBuf, reason: String },
}

fn location_suffix(path: &Option<PathBuf>) -> String {
    match path {
        Some(p) => format!(" in {}", p.display()),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dim(
        context: impl Into<String>,
        expected: impl Into<String>,
        got: impl Into<String>,
    ) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
            expected: expected.into(),
            got: got.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

use crate::motion::ValidationReport;

pub type Result<T> = std::result::Result<T, MimicError>;

#[derive(Debug, Error)]
pub enum MimicError {
    #[error("invalid movement: {0}")]
    InvalidMovement(ValidationReport),

    #[error("invalid spline knots: {0}")]
    InvalidKnots(String),

    #[error("query {value} outside [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("shape mismatch in {context}: expected {expected}, got {found}")]
    Shape {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite gradient in layer {layer}")]
    NonFiniteGradient { layer: usize },

    #[error("training diverged at epoch {epoch} (last finite epoch: {})",
        .last_finite_epoch.map_or_else(|| "none".to_string(), |e| e.to_string()))]
    Diverged {
        epoch: usize,
        last_finite_epoch: Option<usize>,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("log ingestion failed at t={at}: {message}")]
    Ingest { at: f64, message: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl MimicError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        MimicError::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn shape(context: &'static str, expected: usize, found: usize) -> Self {
        MimicError::Shape {
            context,
            expected,
            found,
        }
    }

    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            MimicError::NonFiniteGradient { .. } | MimicError::Diverged { .. }
        )
    }
}

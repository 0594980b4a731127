use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's precondition (out-of-range pixel, bad size, ...).
    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid depth {value} at pixel ({x}, {y})")]
    InvalidDepth { x: usize, y: usize, value: f32 },

    #[error("dimension mismatch: {what} is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    DimensionMismatch {
        what: &'static str,
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },

    #[error("inpainting backend failed: {message}\n{diagnostics}")]
    BackendFailure { message: String, diagnostics: String },

    #[error(
        "hole ratio {:.1}% exceeds the {:.1}% limit; use a smaller step length",
        ratio * 100.0,
        max * 100.0
    )]
    StepTooLarge { ratio: f64, max: f64 },

    #[error("step {index}: {source}")]
    Step {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn at_step(self, index: usize) -> Self {
        Error::Step {
            index,
            source: Box::new(self),
        }
    }

    /// Tags an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// The failing step index, if any wrapper carries one.
    pub fn step_index(&self) -> Option<usize> {
        match self {
            Error::Step { index, .. } => Some(*index),
            Error::Stage { source, .. } => source.step_index(),
            _ => None,
        }
    }

    /// The innermost error, looking through step and stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Step { source, .. } | Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code: 2 validation, 3 backend failure, 4 step too large, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::ContractViolation(_)
            | Error::DegenerateInput(_)
            | Error::InvalidDepth { .. }
            | Error::DimensionMismatch { .. }
            | Error::Format { .. }
            | Error::Json(_) => 2,
            Error::BackendFailure { .. } => 3,
            Error::StepTooLarge { .. } => 4,
            _ => 1,
        }
    }
}

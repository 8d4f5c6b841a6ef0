//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Dimension disagreement between operands.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Invalid argument or configuration value.
    #[error("invalid argument: {0}")]
    Invalid(String),

    /// A class has no training nodes, so no memory can be built for it.
    #[error("class {class} has no training nodes")]
    ClassEmpty { class: usize },

    /// Optimization produced a non-finite value.
    #[error("divergence at epoch {epoch}: {context}")]
    Divergence { epoch: usize, context: String },

    /// Memory buffer already holds an entry for this task.
    #[error("duplicate task id {0} in memory buffer")]
    DuplicateTask(usize),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed text file, with line diagnostics.
    #[error("malformed file {path}, line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// Malformed binary or structurally inconsistent file.
    #[error("bad file {path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Exit code class for the CLI: validation-like errors map to 2,
    /// runtime divergence maps to 3.
    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::Divergence { .. })
    }
}

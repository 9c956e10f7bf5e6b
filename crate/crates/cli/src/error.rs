use serde::Serialize;

/// Failure of a CLI command. Maps onto the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error(transparent)]
    Numerical(#[from] dbsde_core::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl RunError {
    pub fn validation(msg: impl Into<String>) -> Self {
        RunError::Validation(vec![msg.into()])
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        RunError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// 1 for configuration problems, 2 for everything that fails while
    /// computing or writing results.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Validation(_) => 1,
            _ => 2,
        }
    }

    pub fn record(&self) -> ErrorRecord {
        let (kind, errors) = match self {
            RunError::Validation(errs) => ("validation", errs.clone()),
            RunError::Numerical(e) => ("numerical", vec![e.to_string()]),
            RunError::Io { .. } => ("io", vec![self.to_string()]),
            RunError::Csv(e) => ("io", vec![e.to_string()]),
        };
        ErrorRecord {
            status: "error",
            kind,
            exit_code: self.exit_code(),
            errors,
        }
    }
}

/// Machine-readable form of a [`RunError`], written to stderr as JSON.
#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub status: &'static str,
    pub kind: &'static str,
    pub exit_code: i32,
    pub errors: Vec<String>,
}

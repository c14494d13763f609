use std::path::{Path, PathBuf};

use plcwatch_core::Error as CoreError;

pub type Result<T, E = AppError> = std::result::Result<T, E>;

/// Process exit codes.
///
/// | code | meaning |
/// |------|---------|
/// | 0 | success |
/// | 2 | command-line usage error |
/// | 3 | configuration error |
/// | 4 | data error: I/O, malformed or missing input, artifact mismatch |
/// | 5 | numerical failure: singular covariance, divergence, zero variance |
pub mod exit_code {
    pub const SUCCESS: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const CONFIG: i32 = 3;
    pub const DATA: i32 = 4;
    pub const NUMERICAL: i32 = 5;
}

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl AppError {
    pub fn config(msg: impl Into<String>) -> Self {
        AppError::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        AppError::Data(msg.into())
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        AppError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => exit_code::CONFIG,
            AppError::Data(_) | AppError::Io { .. } => exit_code::DATA,
            AppError::Numerical(_) => exit_code::NUMERICAL,
        }
    }

    /// Prefixes the message with `context`, keeping the category.
    pub fn context(self, context: impl std::fmt::Display) -> Self {
        match self {
            AppError::Config(m) => AppError::Config(format!("{context}: {m}")),
            AppError::Data(m) => AppError::Data(format!("{context}: {m}")),
            AppError::Numerical(m) => AppError::Numerical(format!("{context}: {m}")),
            io @ AppError::Io { .. } => AppError::Data(format!("{context}: {io}")),
        }
    }
}

impl From<CoreError> for AppError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e {
            CoreError::InvalidConfig(_) => AppError::Config(msg),
            CoreError::DimensionMismatch { .. } | CoreError::InsufficientData(_) => AppError::Data(msg),
            CoreError::Domain(_)
            | CoreError::NotPositiveDefinite { .. }
            | CoreError::Diverged(_)
            | CoreError::ZeroVariance => AppError::Numerical(msg),
        }
    }
}

impl From<csv::Error> for AppError {
    fn from(e: csv::Error) -> Self {
        AppError::Data(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn categories_have_distinct_codes() {
        let codes = [
            AppError::config("x").exit_code(),
            AppError::data("x").exit_code(),
            AppError::from(CoreError::ZeroVariance).exit_code(),
        ];
        assert_eq!(codes, [3, 4, 5]);
        assert_eq!(AppError::from(CoreError::InvalidConfig("bad".into())).exit_code(), 3);
        assert_eq!(AppError::io(Path::new("a"), std::io::ErrorKind::NotFound.into()).exit_code(), 4);
        assert_eq!(AppError::config("x").context("train").to_string(), "config error: train: x");
    }
}

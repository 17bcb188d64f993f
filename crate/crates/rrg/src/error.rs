use std::fmt;
use std::path::Path;

use serde::Serialize;

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    Usage,
    Data,
    Numerical,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Usage => 1,
            ErrorKind::Data => 2,
            ErrorKind::Numerical => 3,
        }
    }
}

/// A failure with every violation found, rendered as JSON on stderr.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliError {
    #[serde(rename = "error")]
    pub kind: ErrorKind,
    pub message: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<String>,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Usage, message: message.into(), violations: Vec::new() }
    }

    pub fn data(message: impl Into<String>, violations: Vec<String>) -> Self {
        Self { kind: ErrorKind::Data, message: message.into(), violations }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Numerical, message: message.into(), violations: Vec::new() }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Self::data(format!("{}: {err}", path.display()), Vec::new())
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("error serializes")
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)?;
        for v in &self.violations {
            write!(f, "\n  {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for CliError {}

impl From<rrg_core::grpo::GrpoError> for CliError {
    fn from(e: rrg_core::grpo::GrpoError) -> Self {
        use rrg_core::grpo::GrpoError;
        match e {
            GrpoError::InvalidConfig(v) => CliError::data("invalid training config", v),
            GrpoError::EmptyCorpus | GrpoError::GroupTooSmall(_) => CliError::data(e.to_string(), Vec::new()),
            GrpoError::NonFinite { .. } | GrpoError::NonFiniteKl => CliError::numerical(e.to_string()),
        }
    }
}

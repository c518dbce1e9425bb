use thiserror::Error;

use qss_core::QssError;

/// Failures of the experiment runner, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{origin}:{line}:{column}: {message}\n    | {context}")]
    Parse { origin: String, line: usize, column: usize, message: String, context: String },

    #[error("invalid config: {0}")]
    Config(String),

    /// The configuration is well formed but cannot be realized, such as an
    /// infeasible `⟨Z⟩` or a window holding no weight.
    #[error("infeasible request: {0}")]
    Infeasible(#[from] QssError),

    #[error("{0} invariant(s) violated")]
    Invariants(usize),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Parse { .. } | Self::Config(_) | Self::Infeasible(_) => 2,
            Self::Invariants(_) => 1,
            Self::Io(_) => 3,
        }
    }
}

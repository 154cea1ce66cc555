use thiserror::Error;

/// Exit status for a successful run or a passing verification.
pub const EXIT_OK: i32 = 0;
/// Exit status for unreadable or invalid input.
pub const EXIT_INPUT: i32 = 1;
/// Exit status for a failed verification or a construction that does not exist.
pub const EXIT_FAIL: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },

    #[error("field `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error("invalid input: {0}")]
    Core(#[from] transferlab::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Analysis(transferlab::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Analysis(_) => EXIT_FAIL,
            _ => EXIT_INPUT,
        }
    }
}

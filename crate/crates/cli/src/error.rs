use std::fmt;

use dynamix_core::Error;

/// Process exit codes.
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn input(message: impl fmt::Display) -> Self {
        CliError { code: EXIT_INPUT, message: message.to_string() }
    }

    pub fn runtime(message: impl fmt::Display) -> Self {
        CliError { code: EXIT_RUNTIME, message: message.to_string() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Default classification of library errors. Commands override it where the
/// same error means something else in context (an argument error raised while
/// embedding a context is a runtime failure, not bad input).
impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::TrainingDivergence { .. } => EXIT_DIVERGENCE,
            Error::Divergence { .. }
            | Error::DegenerateDimension { .. }
            | Error::DegenerateSignal(_)
            | Error::NoPeriodicity { .. }
            | Error::InsufficientData { .. } => EXIT_RUNTIME,
            Error::Argument(_) | Error::Config(_) | Error::UnknownSystem(_) | Error::Format { .. } | Error::Io(_) => {
                EXIT_INPUT
            }
        };
        CliError { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::input(e)
    }
}

pub trait Context<T> {
    fn input_ctx(self, what: impl fmt::Display) -> CliResult<T>;
    fn runtime_ctx(self, what: impl fmt::Display) -> CliResult<T>;
}

impl<T, E: fmt::Display> Context<T> for Result<T, E> {
    fn input_ctx(self, what: impl fmt::Display) -> CliResult<T> {
        self.map_err(|e| CliError::input(format!("{what}: {e}")))
    }

    fn runtime_ctx(self, what: impl fmt::Display) -> CliResult<T> {
        self.map_err(|e| CliError::runtime(format!("{what}: {e}")))
    }
}

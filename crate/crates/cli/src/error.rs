use std::fmt;

/// Failure with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

pub const USAGE: i32 = 1;
pub const VALIDATION: i32 = 2;
pub const RUNTIME: i32 = 3;

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: USAGE,
            message: message.into(),
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            code: VALIDATION,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: RUNTIME,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<screenwise_core::Error> for CliError {
    fn from(e: screenwise_core::Error) -> Self {
        match e {
            screenwise_core::Error::Io(e) => Self::runtime(e.to_string()),
            other => Self::validation(other.to_string()),
        }
    }
}

macro_rules! from_core {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                screenwise_core::Error::from(e).into()
            }
        }
    )*};
}

from_core!(
    screenwise_core::error::ModelError,
    screenwise_core::error::InferenceError,
    screenwise_core::error::CatalogError,
    screenwise_core::error::InfoError,
    screenwise_core::error::PreferenceError,
    screenwise_core::error::PopulationError
);

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::runtime(e.to_string())
    }
}

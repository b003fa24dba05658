use std::fmt;
use std::path::PathBuf;

/// Process exit codes.
pub mod exit {
    pub const RUNTIME: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const VALIDATION: i32 = 3;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Usage,
    Validation,
    Runtime,
}

/// An error carrying the exit-code class it maps to.
#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn usage(e: impl Into<anyhow::Error>) -> Self {
        Self { kind: Kind::Usage, error: e.into() }
    }

    pub fn validation(e: impl Into<anyhow::Error>) -> Self {
        Self { kind: Kind::Validation, error: e.into() }
    }

    pub fn runtime(e: impl Into<anyhow::Error>) -> Self {
        Self { kind: Kind::Runtime, error: e.into() }
    }

    pub fn missing(what: &str, path: impl Into<PathBuf>) -> Self {
        Self::validation(anyhow::anyhow!("missing {what}: {}", path.into().display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            Kind::Usage => exit::USAGE,
            Kind::Validation => exit::VALIDATION,
            Kind::Runtime => exit::RUNTIME,
        }
    }

    pub fn kind_str(&self) -> &'static str {
        match self.kind {
            Kind::Usage => "usage",
            Kind::Validation => "validation",
            Kind::Runtime => "runtime",
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl std::error::Error for CliError {}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Tags a fallible result with an exit-code class.
pub trait Classify<T> {
    fn validation(self) -> Result<T>;
    fn runtime(self) -> Result<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for std::result::Result<T, E> {
    fn validation(self) -> Result<T> {
        self.map_err(CliError::validation)
    }

    fn runtime(self) -> Result<T> {
        self.map_err(CliError::runtime)
    }
}

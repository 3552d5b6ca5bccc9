use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh generation failed: {0}")]
    Generation(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("patch layout: {0}")]
    Layout(String),

    #[error("patch resolution: {0}")]
    Resolution(String),

    #[error("coefficient out of domain: {0}")]
    Domain(String),

    #[error("linear solver failed: {0}")]
    Solver(String),

    #[error("matrix is not positive definite: {0}")]
    Definiteness(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    /// Short machine-readable tag used in CLI error lines.
    pub fn tag(&self) -> &'static str {
        match self.root() {
            Error::Generation(_) => "generation",
            Error::InvalidMesh(_) => "mesh",
            Error::Parse { .. } => "parse",
            Error::Layout(_) => "layout",
            Error::Resolution(_) => "resolution",
            Error::Domain(_) => "domain",
            Error::Solver(_) => "solver",
            Error::Definiteness(_) => "definiteness",
            Error::Dimension(_) => "dimension",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Context { .. } => unreachable!(),
        }
    }

    /// Process exit code: 2 config, 3 numerical failure, 4 IO.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Config(_) | Error::Layout(_) | Error::Resolution(_) | Error::Dimension(_) => 2,
            Error::Io { .. } | Error::Parse { .. } => 4,
            _ => 3,
        }
    }
}

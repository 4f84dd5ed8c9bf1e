use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// A numeric input outside the domain an operation accepts.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{name} = {value} is out of domain (expected {expected})")]
pub struct DomainError {
    pub name: &'static str,
    pub value: f64,
    pub expected: &'static str,
}

impl DomainError {
    pub(crate) fn new(name: &'static str, value: f64, expected: &'static str) -> Self {
        Self {
            name,
            value,
            expected,
        }
    }
}

/// Coarse failure class, used for process exit codes and machine-readable
/// error lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorCategory {
    Config,
    Ingestion,
    Geometry,
    Io,
}

impl ErrorCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Config => "config",
            ErrorCategory::Ingestion => "ingestion",
            ErrorCategory::Geometry => "geometry",
            ErrorCategory::Io => "io",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Config => 1,
            ErrorCategory::Ingestion => 2,
            ErrorCategory::Geometry => 3,
            ErrorCategory::Io => 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Profile(#[from] crate::profiles::ProfileError),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error(transparent)]
    Ingest(#[from] crate::pipeline::IngestError),
    #[error(transparent)]
    Manifest(#[from] crate::pipeline::ManifestError),
    #[error(transparent)]
    Assembly(#[from] crate::pipeline::AssemblyError),
    #[error(transparent)]
    Stats(#[from] crate::stats::StatsError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: {source}", path.display())]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Domain(_) | Error::Profile(_) | Error::Manifest(_) | Error::Stats(_) => {
                ErrorCategory::Config
            }
            Error::Geometry(_) => ErrorCategory::Geometry,
            Error::Ingest(_) => ErrorCategory::Ingestion,
            Error::Assembly(_) | Error::Io { .. } | Error::Image { .. } => ErrorCategory::Io,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::solver::SolveReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("table construction failed at {table} cell ({row}, {col}): non-finite value")]
    TableConstruction {
        table: &'static str,
        row: usize,
        col: usize,
    },

    #[error("table file: {0}")]
    TableFormat(String),

    #[error("table file version {found} is not supported (expected {expected})")]
    TableVersion { found: u32, expected: u32 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("linear solve failed: {message} (residual {:.3e} after {} iterations)", report.residual, report.iterations)]
    Solve { message: String, report: SolveReport },

    #[error("matrix is singular to working precision (condition estimate {condition:.3e})")]
    Singular { condition: f64 },

    #[error("pfm: {0}")]
    Pfm(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

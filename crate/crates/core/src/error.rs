use thiserror::Error;

/// Errors produced by mesh generation, assembly, the eigensolvers and the
/// experiment orchestration.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid resolution {0}: at least 2 cells are required")]
    InvalidResolution(usize),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("geometry violation: {0}")]
    GeometryViolation(String),

    #[error("truncation radius {radius} is too tight: need at least {minimum}")]
    TruncationTooTight { radius: f64, minimum: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("not admissible: {0}")]
    NotAdmissible(String),

    #[error("mesh format error at line {line}: {message}")]
    MeshFormat { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

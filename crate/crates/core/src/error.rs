use thiserror::Error;

use crate::sqd::SubspaceTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("{n_qubits} qubits exceeds the supported capacity of {cap}")]
    Capacity { n_qubits: usize, cap: usize },

    #[error("shape mismatch: expected length {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("invalid subspace: {0}")]
    InvalidSubspace(String),

    #[error("invalid sector: {0}")]
    InvalidSector(String),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("Lanczos did not converge after {iterations} iterations (best residual {best_residual:e})")]
    Convergence { iterations: usize, best_residual: f64 },

    #[error("vector is not normalized (norm^2 = {norm_sq})")]
    Normalization { norm_sq: f64 },

    #[error("configuration {config} out of range for dimension {dim}")]
    Index { config: u64, dim: u64 },

    #[error("energy fidelity undefined for a zero reference energy")]
    UndefinedFidelity,

    #[error("stopping rule not reached within m = {cap} ({} steps recorded)", .partial.steps.len())]
    CapExceeded { cap: usize, partial: Box<SubspaceTrace> },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("series alignment error: {0}")]
    Alignment(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }
}

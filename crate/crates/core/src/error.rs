use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the catalog, the solvers and the file readers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid specimen {id:?}: {field} {reason}")]
    InvalidSpecimen {
        id: String,
        field: &'static str,
        reason: String,
    },

    #[error("invalid material: {field} {reason}")]
    InvalidMaterial { field: &'static str, reason: String },

    #[error("cannot read specimen file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("specimen file parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("specimen entry #{index}: missing field {field} (key \"{key}\")")]
    MissingField {
        index: usize,
        field: &'static str,
        key: &'static str,
    },

    #[error("beam mesh needs at least {min} elements, got {requested}")]
    MeshTooCoarse { requested: usize, min: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("linear system is singular (zero pivot at row {row})")]
    Singular { row: usize },

    #[error("gap closed at x = {x:.4e} m (deflection {deflection:.4e} m, gap {gap:.4e} m)")]
    GapClosure { x: f64, deflection: f64, gap: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:.3e}, load factor {load_factor:.4})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        load_factor: f64,
    },

    #[error("no pull-in found below {cap} V")]
    NoPullIn { cap: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

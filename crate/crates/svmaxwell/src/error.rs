//! Error type shared by the whole crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("inadmissible state: {constraint} violated (margin {margin:.3e})")]
    InadmissibleState { constraint: &'static str, margin: f64 },

    #[error("degenerate relaxation parameters: c_perp^2 == c_par^2 with b != 0 on the {side} side")]
    DegenerateParams { side: &'static str },

    #[error("interface cap {cap:.6e} is smaller than the maximal wave speed {smax:.6e}")]
    CapTooSmall { cap: f64, smax: f64 },

    #[error("CFL violated in cell {cell}: tau = {tau:.6e} exceeds the limit {limit:.6e}")]
    CflViolated { cell: usize, tau: f64, limit: f64 },

    #[error("cell {cell} left the admissible domain after the update: {constraint} (margin {margin:.3e})")]
    InadmissibleResult { cell: usize, constraint: &'static str, margin: f64 },

    #[error("diffusion stability bound violated: tau = {tau:.6e} exceeds {limit:.6e}")]
    DiffusionCflViolated { tau: f64, limit: f64 },

    #[error("bad mesh dimensions: {0}")]
    BadDimensions(String),

    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error("unknown key `{key}` at line {line}")]
    UnknownKey { key: String, line: usize },

    #[error("value out of range at line {line}: {msg}")]
    OutOfRange { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("mesh target of {0} triangles is too small (need at least 16)")]
    MeshTooSmall(usize),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("degenerate triangle {cell} (area {area:e})")]
    DegenerateCell { cell: usize, area: f64 },

    #[error("size mismatch in {context}: expected {expected}, got {actual}")]
    SizeMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("ellipticity violated in cell {cell}: coefficient {value}")]
    Ellipticity { cell: usize, value: f64 },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("time {t} lies outside [{start}, {end}]")]
    OutOfHorizon { t: f64, start: f64, end: f64 },

    #[error("inclusions {first} and {second} of component {component} overlap at t = {t}")]
    Overlap {
        first: usize,
        second: usize,
        component: usize,
        t: f64,
    },

    #[error("inclusion {index} violates boundary clearance at t = {t}")]
    Clearance { index: usize, t: f64 },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("expression error at byte {pos}: {msg}")]
    Expression { pos: usize, msg: String },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::SizeMismatch {
            context,
            expected,
            actual,
        })
    }
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {constraint}")]
    InvalidParameter {
        name: &'static str,
        constraint: String,
    },

    #[error("profiles live on different grids")]
    GridMismatch,

    #[error("profile has {got} values but the grid has {expected} cells")]
    LengthMismatch { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("cap radius {delta:.3e} is resolved by only {cells} cells (need at least {required})")]
    UnderResolved {
        delta: f64,
        cells: usize,
        required: usize,
    },

    #[error("bridge profile is not strictly decreasing near r = {radius:.6} (slope {slope:.3e})")]
    Monotonicity { radius: f64, slope: f64 },

    #[error("time step underflow at t = {t:.6e}: dt = {dt:.3e} < dt_min = {dt_min:.3e}")]
    DtUnderflow { t: f64, dt: f64, dt_min: f64 },

    #[error("positivity floor violated at t = {t:.6e}: min {field} = {value:.6e} < {floor:.6e}")]
    PositivityFloor {
        field: &'static str,
        t: f64,
        value: f64,
        floor: f64,
    },

    #[error("state invariant violated: {0}")]
    Invariant(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid value for `{key}`: {constraint}")]
    Validation { key: String, constraint: String },

    #[error("malformed {what}: {message}")]
    Format { what: &'static str, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, constraint: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            constraint: constraint.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite component in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("tensor product of dimension {0} exceeds the {max} guard", max = crate::linalg::MAX_DIM)]
    DimensionOverflow(usize),

    #[error("expected a {expected}-dimensional state, got {actual}")]
    WrongDimension { expected: usize, actual: usize },

    #[error("state is not normalized (squared norm {0})")]
    NotNormalized(f64),

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("trace is {0}, expected 1")]
    TraceNotOne(f64),

    #[error("matrix has a negative eigenvalue {0:e}")]
    NotPositive(f64),

    #[error("trace product has an imaginary part {0:e}")]
    NonRealTrace(f64),

    #[error("{name} = {value} is out of range {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(
        "waveplate operator applied to a state with {0:e} weight on same-arm momentum patterns"
    )]
    SameArmState(f64),

    #[error("adaptive quadrature did not converge on [{a}, {b}]")]
    QuadratureNonConvergence { a: f64, b: f64 },

    #[error("fit is degenerate: {0}")]
    DegenerateFit(String),

    #[error("line {line}, column {column}: {message}")]
    Schema {
        line: u64,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn check_range(
    name: &'static str,
    value: f64,
    lo: f64,
    hi: f64,
    range: &'static str,
) -> Result<f64> {
    if value.is_finite() && value >= lo && value <= hi {
        Ok(value)
    } else {
        Err(Error::OutOfRange { name, value, range })
    }
}

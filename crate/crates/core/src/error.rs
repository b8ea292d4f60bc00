use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// `column` is 1-based.
    #[error("series in column {column} has zero variance")]
    ZeroVarianceSeries { column: usize },

    #[error("matrix is not symmetric (max relative asymmetry {0:e})")]
    Asymmetric(f64),

    #[error("matrix is not positive semidefinite (eigenvalue {0:e})")]
    NotPositiveSemidefinite(f64),

    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    /// Tie between the j-th and (j+1)-th eigenvalue (1-based j).
    #[error("eigenvalues {j} and {} are tied", .j + 1)]
    DegenerateGap { j: usize },

    #[error(
        "evaluation point coincides with a pole of the partial Stieltjes transform at index {j}"
    )]
    PoleAtZ { j: usize },

    #[error("point {x} lies inside the support of the spectral law (max atom {edge})")]
    SupportViolation { x: f64, edge: f64 },

    #[error("spike {lambda} is not separated from the bulk (needs at least {bound})")]
    Separation { lambda: f64, bound: f64 },

    #[error("numerical domain error: {0}")]
    NumericalDomain(String),

    #[error("matrix is rank deficient: {0}")]
    RankDeficient(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Errors caused by bad parameters rather than bad data.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

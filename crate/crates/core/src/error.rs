use thiserror::Error;

/// Every failure mode of the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{m} is not invertible modulo {c}")]
    NotInvertible { m: i64, c: u64 },

    #[error("exponential sum {value} is not within 1e-9 of an integer")]
    PrecisionLoss { value: String },

    #[error("pole at {at}")]
    PoleAt { at: f64 },

    #[error("Bessel function underflow at x = {x}")]
    Underflow { x: f64 },

    #[error("tail bound {bound:e} exceeds tolerance {tol:e}")]
    TailTooLarge { bound: f64, tol: f64 },

    #[error("{what} did not converge: estimated error {err:e} > tolerance {tol:e}")]
    NotConverged { what: String, err: f64, tol: f64 },

    #[error("points are nearly Γ-equivalent: |j(z1) - j(z2)| = {gap:e}")]
    NearDiagonal { gap: f64 },

    #[error("normalization is ambiguous: {passing} candidates pass")]
    AmbiguousNormalization { passing: usize },

    #[error("quadrature did not converge: change {change:e} under refinement")]
    QuadratureNotConverged { change: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for the numerical failures (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::InvalidArgument(_) | Error::NotInvertible { .. })
    }
}

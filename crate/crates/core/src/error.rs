use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("Hurst index must lie in (0, 1), got {0}")]
    InvalidHurst(f64),
    #[error("operation requires {required} regime, got H = {hurst}")]
    WrongRegime { required: &'static str, hurst: f64 },
    #[error("kernel is singular on the diagonal s = r = {0}")]
    SingularDiagonal(f64),
    #[error("degenerate pair (s = {s}, r = {r}): determinant factor vanishes")]
    DegeneratePair { s: f64, r: f64 },
    #[error("internal consistency failure: {0}")]
    Internal(String),
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("grid of {steps} steps exceeds the Cholesky cap of {cap}")]
    GridTooLarge { steps: usize, cap: usize },
    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("circulant embedding failed: eigenvalue {eigenvalue:e} below -{tol:e} * max")]
    EmbeddingFailure { eigenvalue: f64, tol: f64 },
    #[error("empty spatial grid")]
    EmptyGrid,
    #[error("expected a {expected} local-time field")]
    WrongFieldKind { expected: &'static str },
    #[error("ordering violated: need a < c < b, got a = {a}, c = {c}, b = {b}")]
    OrderViolation { a: f64, c: f64, b: f64 },
    #[error("singularity {a} lies outside the grid [{lo}, {hi}]")]
    SingularityOffGrid { a: f64, lo: f64, hi: f64 },
    #[error("epsilon ladder too fine: smallest rung {eps} below {floor}")]
    LadderTooFine { eps: f64, floor: f64 },
    #[error("epsilon ladder below path resolution: smallest rung {eps} below {floor}")]
    LadderBelowResolution { eps: f64, floor: f64 },
    #[error("invalid epsilon ladder: {0}")]
    InvalidLadder(String),
    #[error("lag {lag} is not a positive multiple of the grid step {step}")]
    LagNotOnGrid { lag: f64, step: f64 },
    #[error("quadrature did not converge: estimate {value:e}, achieved error {error:e}")]
    QuadratureNonConvergence { value: f64, error: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

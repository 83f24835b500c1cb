use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("bound too small: maximizer {maximizer} lies outside [-{bound}, {bound}]")]
    BoundTooSmall { maximizer: f64, bound: f64 },

    #[error("overflow evaluating exp({0}) - 1")]
    Overflow(f64),

    #[error("lambda = {0} is outside the exact-summation range (0, 1e4]")]
    OracleDomain(f64),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grids differ: {0}")]
    GridMismatch(String),

    #[error("negative mass {mass} in cell {cell:?}")]
    NegativeMass { cell: Vec<usize>, mass: f64 },

    #[error("projection did not converge after {iterations} iterations; distance bracket [{lo}, {hi}]")]
    NonConvergence { lo: f64, hi: f64, iterations: usize },

    #[error("window escapes the support box: {0}")]
    WindowEscapes(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

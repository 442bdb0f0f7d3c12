use thiserror::Error;

/// Errors produced by chain validation and the analysis operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("transition matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("state space is empty")]
    EmptyStateSpace,
    #[error("duplicate state label `{0}`")]
    DuplicateState(String),
    #[error("negative entry p({i},{j}) = {value}")]
    NegativeEntry { i: usize, j: usize, value: f64 },
    #[error("row {row} sums to {sum}, off by more than 1e-12")]
    RowSumViolation { row: usize, sum: f64 },
    #[error("supplied stationary vector fails mu'P = mu' (max deviation {max_dev:e})")]
    NotStationary { max_dev: f64 },
    #[error("state space too large: k = {k} exceeds limit {max}")]
    StateSpaceTooLarge { k: usize, max: usize },
    #[error("subset too large: |D| = {size} exceeds limit {max}")]
    SubsetTooLarge { size: usize, max: usize },
    #[error("chain is not reversible (witness pair ({i},{j}), imbalance {imbalance:e})")]
    NotReversible { i: usize, j: usize, imbalance: f64 },
    #[error("score function norm {norm} exceeds the unit ball")]
    ScoreOutOfUnitBall { norm: f64 },
    #[error("window too small: {usable} usable lags, need at least 4")]
    WindowTooSmall { usable: usize },
    #[error("no small set found for n <= {max_n}")]
    NoSmallSetFound { max_n: usize },
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("empty path")]
    EmptyPath,
    #[error("chain file parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

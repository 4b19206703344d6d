use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {found}")]
    Shape { expected: usize, found: usize },

    #[error("operators are defined on different grids")]
    GridMismatch,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("solution blows up at t_sing = {t_sing}")]
    BlowUp { t_sing: f64 },

    #[error("matrix is numerically singular (sigma_min / sigma_max = {ratio:e})")]
    Singular { ratio: f64 },

    #[error("numerical instability detected at step {step}")]
    Instability { step: usize },

    #[error("resource guard: {0}")]
    ResourceGuard(String),

    #[error("count exceeds 64-bit range for b = {b}, k = {k}")]
    BigCount { b: u64, k: u64 },

    #[error("every site is masked; the error report would be empty")]
    EmptyReport,

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

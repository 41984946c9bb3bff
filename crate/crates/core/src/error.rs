use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("singular circulant matrix: |Λ_{mode}| = {min_abs:e}")]
    SingularMatrix { min_abs: f64, mode: usize },

    #[error("rank-1 corrected matrix is singular")]
    SingularCorrection,

    #[error("singular block system at t = {t} (nearest singular time {t_singular})")]
    SingularBlock { t: f64, t_singular: f64 },

    #[error("unsupported: {0}")]
    Unsupported(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("subcharacteristic condition violated: λ = {lambda} < max |f'(u0)| = {max_speed}")]
    Subcharacteristic { lambda: f64, max_speed: f64 },

    #[error("state became non-finite at step {step} (t = {t}, min normalized |Λ| of M = {min_sigma:e})")]
    Blowup { step: usize, t: f64, min_sigma: f64 },

    #[error("requested rank {requested} exceeds maximum {max}")]
    RankTooLarge { requested: usize, max: usize },

    #[error("exact solution blows up at x = {x}")]
    ExactBlowup { x: f64 },

    #[error("time {t} outside validity horizon {horizon}")]
    OutsideValidity { t: f64, horizon: f64 },

    #[error("no jump exceeding threshold {0}")]
    NoShock(f64),

    #[error("CFL violation: dt = {dt} exceeds {limit}")]
    Cfl { dt: f64, limit: f64 },
}

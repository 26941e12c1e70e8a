use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScatterError {
    #[error("Kasner relation violated: sum p = {sum_p}, sum p^2 + 2 p_phi^2 = {sum_sq}")]
    KasnerRelationViolation { sum_p: f64, sum_sq: f64 },
    #[error("degenerate background: max p_i = {max_p} >= 1")]
    DegenerateBackground { max_p: f64 },
    #[error("background is not subcritical: delta = {delta}")]
    NotSubcritical { delta: f64 },
    #[error("operation undefined for the zero mode")]
    ZeroMode,
    #[error("mode {lambda:?} is not a power-law mode")]
    NotPowerLawMode { lambda: Vec<i64> },
    #[error("step limit {max_steps} exceeded at t = {t}")]
    StepLimitExceeded { max_steps: usize, t: f64 },
    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("no launch time with tail bound below {tail_tol}")]
    TailUnreachable { tail_tol: f64 },
    #[error("regime mismatch: tau = {tau} outside the {regime} window")]
    RegimeMismatch { regime: &'static str, tau: f64 },
    #[error("constraint residual {residual} exceeds {tolerance}")]
    ConstraintViolation { residual: f64, tolerance: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, ScatterError>;

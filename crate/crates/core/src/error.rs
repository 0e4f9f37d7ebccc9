use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error(
        "pump above threshold: |eps| = {pump} vs eps_c = {eps_crit} (min Re eig = {min_real_part:.3e})"
    )]
    AboveThreshold {
        pump: f64,
        eps_crit: f64,
        min_real_part: f64,
    },

    #[error("no threshold crossing in pump bracket [{lo}, {hi}]")]
    NoCrossing { lo: f64, hi: f64 },

    #[error("combined-mode analysis needs delta_a = j_a, delta_b = j_b and equal real pumps")]
    DetuningMismatch,

    #[error("closed form not valid here: {0}")]
    Domain(String),

    #[error("eigensolver did not converge")]
    ConvergenceFailure,

    #[error("A + i*omega is singular at omega = {omega} (condition number {condition:.3e})")]
    SingularAtFrequency { omega: f64, condition: f64 },

    #[error("conditioning variance {0:.3e} too small for inference")]
    DegenerateVariance(f64),

    #[error("invalid SDE configuration: {0}")]
    InvalidConfig(String),

    #[error("{diverged} of {total} trajectories diverged")]
    DivergenceDetected { diverged: usize, total: usize },

    #[error("measurement window {t_measure} shorter than the required {required}")]
    InsufficientData { t_measure: f64, required: f64 },

    #[error("steady state did not converge (residual {0:.3e})")]
    SteadyStateFailure(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

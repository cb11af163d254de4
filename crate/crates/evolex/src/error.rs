//! Error taxonomy shared by all modules.

use thiserror::Error;

/// Any failure a library operation can report.
///
/// Payloads are plain `f64` regardless of the working scalar so errors stay
/// non-generic and cheap to pass around.
#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row} of the generator sums to {sum:.3e}, expected 0")]
    RowSum { row: usize, sum: f64 },

    #[error("negative off-diagonal intensity q[{row},{col}] = {value:.3e}")]
    NegativeIntensity { row: usize, col: usize, value: f64 },

    #[error("generator is reducible: state {state} does not communicate with state 0")]
    ReducibleChain { state: usize },

    #[error("singular linear system in {context} (residual or condition {value:.3e})")]
    SingularSystem { context: &'static str, value: f64 },

    #[error("generator is numerically defective: spectral reconstruction error {error:.3e}")]
    DefectiveGenerator { error: f64 },

    #[error("balance condition violated: stationary mean velocity has norm {residual:.3e}")]
    BalanceViolation { residual: f64 },

    #[error(
        "diffusion tensor is not positive definite (smallest eigenvalue {min_eigenvalue:.3e})"
    )]
    NonPositiveDiffusion { min_eigenvalue: f64 },

    #[error("profile does not decay: term with Re(exponent) = {re_mu:.3e} at mode {mode}")]
    NonDecaying { mode: usize, re_mu: f64 },

    #[error("overflow evaluating exponential profile at mode {mode} (exponent {exponent:.3e})")]
    Overflow { mode: usize, exponent: f64 },

    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    Shape {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("expansion term of order {order} has not been built yet")]
    MissingInitialCondition { order: usize },

    #[error("time horizon must be positive, got {t:.3e}")]
    InvalidHorizon { t: f64 },

    #[error("unknown built-in model `{name}`")]
    UnknownModel { name: String },

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

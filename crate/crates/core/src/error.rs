//! Crate-wide error type. Messages are module-qualified so a failure deep in
//! a sweep still names the subsystem that produced it.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("profiles: syntax error at byte {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("profiles: unknown identifier `{name}` at byte {position}")]
    UnknownIdentifier { name: String, position: usize },

    #[error("profiles: expression is not finite at x = {x} (value {value})")]
    NonFinite { x: f64, value: f64 },

    #[error("profiles: {0}")]
    InvalidProfile(String),

    #[error("grid: cell count {0} is below the minimum of 16")]
    GridTooSmall(usize),

    #[error("{module}: invalid parameter: {message}")]
    InvalidParameter { module: &'static str, message: String },

    #[error("eigensolver: inverse iteration failed to converge in {iters} steps (residual {residual:.3e}); refine the grid")]
    EigenNoConvergence { iters: usize, residual: f64 },

    #[error("eigensolver: cross-check disagreement: {primary:.15e} vs {reference:.15e} (relative {relative:.3e})")]
    CrossCheck {
        primary: f64,
        reference: f64,
        relative: f64,
    },

    #[error("steady: Newton diverged after {iters} iterations (residual {residual:.3e})")]
    NewtonDiverged { iters: usize, residual: f64 },

    #[error("steady: solver converged to a sign-changing field (min {min:.3e}); bad grid or profile")]
    SignChangingSolution { min: f64 },

    #[error("steady: no positive steady state (q >= q*)")]
    Washout,

    #[error("steady: growth rate at q = 0 is not positive (sigma1 = {sigma1:.3e})")]
    NoGrowthAtRest { sigma1: f64 },

    #[error("dynamics: positivity violated at t = {t} (min {min:.3e})")]
    PositivityViolation { t: f64, min: f64 },

    #[error("dynamics: blow-up at t = {t} (max {max:.3e})")]
    BlowUp { t: f64, max: f64 },

    #[error("dynamics: perturbation left the linear window before a rate could be fitted")]
    LinearWindowTooShort,

    #[error("scenario: {0}")]
    Scenario(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter violates a documented invariant. `invariant` names it.
    #[error("invalid parameter `{name}` = {value}: {invariant}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        invariant: &'static str,
    },

    #[error("phase is undefined for the zero state (q = p = 0)")]
    ZeroState,

    #[error("initial-condition system is singular (condition number {condition:.3e})")]
    SingularSystem { condition: f64 },

    #[error("no characteristic exponent with |x| < 1 found for b = {b} (last |x| = {last:.3e})")]
    NoFloquetRoot { b: f64, last: f64 },

    #[error("closed form has a pole at Γ = γ: |Γ − γ|/γ = {relative_gap:.3e} is below the guard {guard:.0e}")]
    PoleGuard { relative_gap: f64, guard: f64 },

    #[error("quadrature did not converge: estimate {estimate:.6e}, error estimate {error:.3e} after {intervals} intervals")]
    QuadratureNonConvergence {
        estimate: f64,
        error: f64,
        intervals: usize,
    },

    #[error("phase schedule does not cover [0, {t_end}]: {detail}")]
    ScheduleGap { t_end: f64, detail: String },

    #[error("fit failed: {0}")]
    Fit(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, value: f64, invariant: &'static str) -> Self {
        Error::InvalidParameter {
            name,
            value,
            invariant,
        }
    }
}

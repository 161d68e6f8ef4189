use std::fmt;

/// Errors produced by the analysis and simulation pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Invalid problem setup: inconsistent dimensions, a non-positive physical
    /// parameter, or a zero surface coefficient where one is required.
    Config(String),
    /// The surface projection `m · (Cx + D)` vanished, so the equivalent
    /// control is undefined at the queried state.
    EquivalentControlSingular { denominator: f64 },
    /// The equilibrium iteration did not converge.
    NoEquilibrium { iterations: usize, residual: f64 },
    /// A closed-form expression was evaluated outside its domain.
    DomainError(String),
    /// The sector LMI admits no feasible solution.
    Infeasible { max_eig_real: f64 },
    /// The eigenvector matrix is too ill-conditioned to serve as a modal
    /// transform.
    IllConditionedTransform { cond: f64 },
    /// A guard crossing promised by the caller could not be bracketed.
    EventLocalizationFailure { t: f64 },
    /// The event count exceeded the Zeno guard.
    ZenoError { t: f64, events: usize },
    /// The state norm exceeded the divergence guard.
    DivergenceError { t: f64, norm: f64 },
    /// The sliding surface is outside the families with closed-form ripple
    /// rules.
    UnsupportedSurface,
    /// No sector-bound crossing was found in the recorded series.
    NoCrossing,
    /// A numerical operation failed (singular factorization, non-finite
    /// values).
    Numerical(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::EquivalentControlSingular { denominator } => write!(
                f,
                "equivalent control singular: m·(Cx + D) = {denominator:e}"
            ),
            Error::NoEquilibrium {
                iterations,
                residual,
            } => write!(
                f,
                "no equilibrium after {iterations} iterations (residual {residual:e})"
            ),
            Error::DomainError(msg) => write!(f, "domain error: {msg}"),
            Error::Infeasible { max_eig_real } => write!(
                f,
                "LMI infeasible: largest eigenvalue real part {max_eig_real:e}"
            ),
            Error::IllConditionedTransform { cond } => write!(
                f,
                "eigenvector matrix too ill-conditioned for a modal transform (cond {cond:e})"
            ),
            Error::EventLocalizationFailure { t } => {
                write!(f, "failed to bracket a guard crossing near t = {t:e} s")
            }
            Error::ZenoError { t, events } => {
                write!(f, "event count exceeded {events} at t = {t:e} s")
            }
            Error::DivergenceError { t, norm } => {
                write!(f, "state diverged: |x| = {norm:e} at t = {t:e} s")
            }
            Error::UnsupportedSurface => {
                write!(f, "no closed-form ripple rules for this sliding surface")
            }
            Error::NoCrossing => write!(f, "no sector-bound crossing in the recorded series"),
            Error::Numerical(msg) => write!(f, "numerical failure: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

//! Analysis and simulation of sliding-mode-controlled switched affine DC/DC
//! converters.
//!
//! The crate models converters of the form `dx/dt = Ax + B + (Cx + D)u` with a
//! binary switch `u` driven by a hysteresis band around a linear sliding
//! surface. On top of that model it provides:
//!
//! - the equivalent-control closed loop, its equilibria, linearization and the
//!   exact nonlinear remainder ([`equiv`]),
//! - a small dense semidefinite solver that maximizes the sector bound on the
//!   remainder and certifies steady-state stability ([`lmi`]),
//! - an event-driven hybrid simulator with exact per-mode propagation,
//!   including the discontinuous conduction modes ([`sim`]),
//! - closed-form switching-period and ripple rules with the validity limit on
//!   the hysteresis width ([`ripple`]),
//! - a Ćuk converter preset wiring all of the above together ([`cuk`]).

pub mod cuk;
pub mod equiv;
mod error;
pub mod linalg;
pub mod lmi;
pub mod model;
pub mod ripple;
pub mod sim;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;

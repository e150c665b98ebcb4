//! Numerical laboratory for curve shortening flow and its rescaled form.
//!
//! The crate is organised by subsystem:
//!
//! * [`curvegeo`]: discrete geometry of closed plane curves
//! * [`flowcore`]: flow integration and the change of variables between the
//!   original and rescaled pictures
//! * [`gauge`]: one curve as a normal graph over another, and the drift
//!   operator `L`
//! * [`spectral`]: `L` as a self-adjoint operator in the Gaussian inner product
//! * [`frequency`]: energies, the frequency function and their monitors
//! * [`io`]: curve and trajectory files

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod curvegeo;
pub mod error;
pub mod exec;
pub mod flowcore;
pub(crate) mod fourier;
pub mod frequency;
pub mod gauge;
pub mod io;
pub mod spectral;

pub use error::{Error, Result};
pub use exec::Exec;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

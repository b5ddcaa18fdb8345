//! Simulation of STIRAP population transfer and STIRAP-based Ramsey
//! interferometry in a driven three-level Λ system.

// Index loops mirror the matrix algebra, and `!(x > 0.0)` rejects NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod csvout;
pub mod ensemble;
pub mod error;
pub mod hamiltonian;
pub mod propagator;
pub mod pulses;
pub mod qstate;
pub mod ramsey;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

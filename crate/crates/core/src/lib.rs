//! Simulation of pump-driven recirculation in a tank governed by incompressible
//! Navier-Stokes with a Smagorinsky turbulence closure.
//!
//! The solution is split as `v = ζ_g + z`: a divergence-free lifting `ζ_g` of the pump
//! boundary data (steady Stokes solves per pump, scaled by the pump schedules) plus a
//! homogeneous part `z` expanded in the discrete Stokes eigenbasis and integrated in time.
//! The [`monitors`] module turns trajectories into energy ledgers and contraction reports.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod discretization;
pub mod eigenbasis;
pub mod error;
pub mod fullspace;
pub mod galerkin;
pub mod lifting;
pub mod linalg;
pub mod manufactured;
pub mod monitors;
pub mod output;
pub mod pumps;
pub mod saddle;
pub mod turbulence;

pub use error::{ConfigIssue, Error, Result};

/// Version string written into output headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

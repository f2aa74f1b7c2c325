//! Invariant-preserving finite differences for the rotation two-component
//! Camassa-Holm system on periodic domains.
//!
//! ```text
//! u_t - u_xxt - kappa u_x + 3 u u_x = sigma (2 u_x u_xx + u u_xxx) - mu u_xxx
//!                                     - (1 - 2 Omega kappa) rho rho_x + 2 Omega rho (rho u)_x
//! rho_t + (rho u)_x = 0
//! ```
//!
//! The discretization conserves a discrete energy, momentum and mass exactly
//! (up to the nonlinear solver tolerance) and is second order in space and
//! time.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod grid;
pub mod invariants;
pub mod linalg;
pub mod output;
pub mod scheme;
pub mod selftest;

pub use grid::{GridFn, GridSpec};
pub use scheme::{PhysParams, SolverCfg, State, TimeGrid};

//! Simulator and deterministic oracles for the one-dimensional symmetric
//! exclusion process with quenched bond disorder.
//!
//! The crate is organized around seven subsystems:
//!
//! - [`environment`]: quenched bond conductances with ellipticity control,
//! - [`dynamics`]: event-driven continuous-time simulation of the exclusion
//!   process with bond rates `N^2 xi_x`, including currents and a tagged
//!   particle,
//! - [`transform`]: the environment-corrected test-function transforms and
//!   the corrected density fields,
//! - [`pde`]: deterministic solvers for the one-point lattice equation, the
//!   limiting heat equation and the tagged-particle centerings,
//! - [`oracle`]: exact small-system and random-walk oracles (master equation,
//!   two-point correlation ODE, walk kernels, semigroup comparisons, hitting
//!   times),
//! - [`stats`]: Monte Carlo estimators with jackknife errors and quadrature
//!   evaluation of the limiting covariance formulas,
//! - [`accept`]: the acceptance checks wired into the `acceptance` test
//!   target and the CLI `verify` subcommand.

pub mod accept;
pub mod dynamics;
pub mod environment;
pub mod error;
pub mod grid;
pub mod numerics;
pub mod oracle;
pub mod pde;
pub mod report;
pub mod rng;
pub mod stats;
pub mod transform;

pub use error::{Error, Result};

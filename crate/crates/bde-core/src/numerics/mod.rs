//! Shared numerical machinery: uniformization of bounded-rate generators,
//! adaptive quadrature, stabilized explicit time stepping, special functions,
//! alias sampling and small statistical helpers.

pub mod alias;
pub mod eigen;
pub mod ode;
pub mod poisson;
pub mod quad;
pub mod special;
pub mod stat_util;
pub mod uniformize;

pub use alias::AliasTable;
pub use poisson::PoissonWeights;
pub use quad::adaptive_quad;
pub use uniformize::{uniformized_step, UniformizedStep};

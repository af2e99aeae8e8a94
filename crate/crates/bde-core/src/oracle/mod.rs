//! Deterministic small-system and random-walk oracles: the exact master
//! equation, the two-point correlation ODE, conductance-walk kernels with
//! Nash-constant fitting, the exclusion-vs-independent semigroup comparison,
//! and hitting/coalescence estimates with their harmonic-coordinate exact
//! values.

pub mod hitting;
pub mod liggett;
pub mod master;
pub mod space_time;
pub mod two_point;
pub mod walk;

pub use hitting::{hitting_and_coalescence, HittingReport};
pub use liggett::{liggett_check, LiggettReport, PairFn};
pub use master::{master_equation, ExactLaw};
pub use space_time::{space_time_correlation, SpaceTimeReport};
pub use two_point::{two_point_ode, TwoPointIntegrator, TwoPointTrajectory};
pub use walk::{walk_kernel, WalkKernel};

//! Numerical laboratory for shrinking-target sets of piecewise expanding
//! interval maps.
//!
//! Given a map T of [0,1), an orbit start x, and a shrinking radius
//! schedule r_n, the object of study is the set of points hit infinitely
//! often by balls B(T^n x, r_n). This crate provides the apparatus to
//! interrogate such sets numerically:
//!
//! * exact orbit iteration at arbitrary precision ([`fixed`], [`map`]),
//! * the dimension value predicted by the radius schedule alone
//!   ([`target::dimension`]),
//! * Riesz-energy experiments on finite-stage approximations
//!   ([`target::energy`], [`target::stage`]),
//! * box-counting and intersection experiments ([`target::boxdim`]),
//! * transfer-operator thermodynamics: invariant densities, pressure,
//!   Gibbs cylinder bounds ([`thermo`]),
//! * decay of correlations and Manneville-Pomeau return-time statistics
//!   ([`stats`]).
//!
//! The `shrink-targets` binary exposes the same machinery behind a small
//! TOML-configured CLI; see the crate README and `examples/`.

pub mod acceptance;
pub mod config;
pub mod expr;
pub mod fixed;
pub mod map;
pub mod report;
pub mod rng;
pub mod runner;
pub mod stats;
pub mod target;
pub mod thermo;

pub use fixed::{Fixed, PrecisePoint};

//! Thermodynamic formalism on the Ulam grid: transfer operators,
//! invariant densities, pressure, conformal (Gibbs) measures, and the
//! ball-scaling exponent of a Gibbs measure.
//!
//! Everything here discretizes the transfer operator
//!
//! ```text
//! (L_phi f)(x) = sum_{T(y) = x} e^{phi(y)} f(y)
//! ```
//!
//! on a uniform grid of `bins` cells. One sparse matrix serves both
//! dual actions: columns propagate functions (densities, L^n 1),
//! rows propagate measures (conformal mass). See [`ulam`] for the
//! exact entry convention and why the weighted entries carry
//! e^phi |T'| rather than e^phi alone.

pub mod gibbs;
pub mod potential;
pub mod pressure;
pub mod scaling;
pub mod ulam;

pub use gibbs::{
    conformal_check, fit_gibbs, s0_estimate, theta_m, GibbsModel, S0Estimate,
    ThetaEstimate,
};
pub use potential::Potential;
pub use pressure::{
    check_contracting_potential, pressure, ContractionCheck, PressureEstimate,
};
pub use scaling::{
    ball_scaling_check, riesz_potential_bound, PotentialBoundReport,
    ScalingReport,
};
pub use ulam::{stationary_density, ulam_matrix, InvariantDensity, UlamOperator};

use crate::expr::ExprError;
use crate::map::MapError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ThermoError {
    #[error(
        "power iteration stalled: residual {residual:.3e} after {iterations} iterations"
    )]
    NoConvergence { iterations: u64, residual: f64 },
    #[error("pressure bracket {width:.3e} wider than {tol:.0e} at n = {n}; raise n_max or bins")]
    BracketTooWide { width: f64, n: u64, tol: f64 },
    #[error("map has an indifferent fixed point; this formula needs uniform expansion")]
    IndifferentMap,
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

impl ThermoError {
    pub fn slug(&self) -> &'static str {
        match self {
            ThermoError::NoConvergence { .. } => "no-convergence",
            ThermoError::BracketTooWide { .. } => "bracket-too-wide",
            ThermoError::IndifferentMap => "indifferent-map",
            ThermoError::BadParameter(_) => "bad-parameter",
            ThermoError::Map(e) => e.slug(),
            ThermoError::Expr(_) => "bad-parameter",
        }
    }
}

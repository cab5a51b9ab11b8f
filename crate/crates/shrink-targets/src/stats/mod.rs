//! Correlation statistics and return-time analysis.
//!
//! Two instruments. The correlation side measures how fast
//! Cov(f o T^n, g) decays for observables of bounded variation, with an
//! exact closed-form path on the doubling map to calibrate the sampled
//! estimators, and turns a measured series into the summable-decay
//! constant the energy bounds consume. The return side runs the first
//! return map to [1/2, 1) for maps with a neutral fixed point, where
//! the growth exponent of the partial return-time sums separates
//! finite from infinite expected return time.

pub mod bv;
pub mod correlation;
pub mod returns;

pub use bv::{bv_norm, BVObservable};
pub use correlation::{
    correlation, correlation_series, decay_profile, decay_transfer_bound,
    CorrelationPoint, CorrelationSeries, DecayProfile, Estimator,
};
pub use returns::{
    first_return, return_sequence, return_sum_exponent, sum_growth_exponent,
    uniform_return_start, ReturnTimeSeries,
};

use crate::expr::ExprError;
use crate::map::MapError;
use crate::thermo::ThermoError;

#[derive(Debug, thiserror::Error)]
pub enum StatsError {
    #[error("exact estimator unavailable: {0}")]
    EstimatorMismatch(String),
    #[error("only {usable} lags rise above the noise floor; the fit needs 5")]
    InsufficientSignal { usable: usize },
    #[error("no return to [1/2, 1) within {max_steps} steps from x = {start}")]
    CapExceeded { start: f64, max_steps: u64 },
    #[error("a piece has unbounded variation near x = {0}")]
    VariationUnbounded(f64),
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Thermo(#[from] ThermoError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

impl StatsError {
    pub fn slug(&self) -> &'static str {
        match self {
            StatsError::EstimatorMismatch(_) => "estimator-mismatch",
            StatsError::InsufficientSignal { .. } => "insufficient-signal",
            StatsError::CapExceeded { .. } => "cap-exceeded",
            StatsError::VariationUnbounded(_) => "variation-unbounded",
            StatsError::BadParameter(_) => "bad-parameter",
            StatsError::Map(e) => e.slug(),
            StatsError::Thermo(e) => e.slug(),
            StatsError::Expr(_) => "bad-parameter",
        }
    }
}

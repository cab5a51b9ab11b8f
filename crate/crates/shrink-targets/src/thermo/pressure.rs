//! Topological pressure via iterated transfer-operator bounds.
//!
//! For any n the quantities (1/n) log inf L_phi^n 1 and
//! (1/n) log sup L_phi^n 1 bracket the pressure of the discretized
//! operator from below and above (inf is supermultiplicative, sup is
//! submultiplicative), and the bracket width shrinks like
//! log(sup h / inf h) / n where h is the eigenfunction. Iterating the
//! Ulam matrix with max-rescaling keeps everything in f64 range.

use crate::map::PartitionedMap;

use super::potential::Potential;
use super::ulam::ulam_matrix;
use super::ThermoError;

/// Accept the estimate only if the bracket is at least this tight.
pub const BRACKET_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy)]
pub struct PressureEstimate {
    /// The certified lower end of the bracket.
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    /// Operator applications actually performed.
    pub n: u64,
    pub bins: usize,
}

impl PressureEstimate {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Estimates P(phi) by iterating the weighted Ulam operator on the
/// constant function 1 for `n_max` steps.
pub fn pressure(
    map: &PartitionedMap,
    phi: &Potential,
    n_max: u64,
    bins: usize,
) -> Result<PressureEstimate, ThermoError> {
    if n_max < 2 {
        return Err(ThermoError::BadParameter(
            "pressure needs n_max >= 2".into(),
        ));
    }
    let op = ulam_matrix(map, bins, Some(phi))?;
    let mut f = vec![1.0; bins];
    let mut log_scale = 0.0;
    for n in 1..=n_max {
        f = op.apply_function(&f);
        let max = f.iter().cloned().fold(f64::MIN, f64::max);
        if !(max.is_finite() && max > 0.0) {
            return Err(ThermoError::NoConvergence {
                iterations: n,
                residual: f64::INFINITY,
            });
        }
        log_scale += max.ln();
        for x in &mut f {
            *x /= max;
        }
    }
    let min = f.iter().cloned().fold(f64::MAX, f64::min);
    let lower = (log_scale + min.ln()) / n_max as f64;
    let upper = log_scale / n_max as f64;
    let width = upper - lower;
    if !(width <= BRACKET_TOL) {
        return Err(ThermoError::BracketTooWide {
            width,
            n: n_max,
            tol: BRACKET_TOL,
        });
    }
    Ok(PressureEstimate { value: lower, lower, upper, n: n_max, bins })
}

/// Outcome of the contraction test sup e^{S_n phi} < inf L_phi^n 1.
///
/// When it holds, one excursion of weight through the potential is
/// already beaten by the total mass the operator spreads back over
/// the interval, which is the one-step route to a summable tail.
#[derive(Debug, Clone, Copy)]
pub struct ContractionCheck {
    pub holds: bool,
    /// sup over sampled starting points of S_n phi.
    pub log_sup_weight: f64,
    /// log inf of L_phi^n 1 on the grid.
    pub log_inf_transfer: f64,
    pub n: u64,
}

impl ContractionCheck {
    /// log of the slack factor; positive iff the inequality holds.
    pub fn log_margin(&self) -> f64 {
        self.log_inf_transfer - self.log_sup_weight
    }
}

/// Compares the largest n-step Birkhoff weight against the smallest
/// value of L_phi^n 1. Sampling is at cell midpoints, so `bins` must
/// resolve the pieces of a piecewise potential.
pub fn check_contracting_potential(
    map: &PartitionedMap,
    phi: &Potential,
    n: u64,
    bins: usize,
) -> Result<ContractionCheck, ThermoError> {
    if n == 0 {
        return Err(ThermoError::BadParameter(
            "contraction check needs n >= 1".into(),
        ));
    }
    phi.validate(map)?;
    let mut log_sup_weight = f64::NEG_INFINITY;
    for i in 0..bins {
        let x = (i as f64 + 0.5) / bins as f64;
        log_sup_weight = log_sup_weight.max(phi.birkhoff(map, x, n));
    }
    let op = ulam_matrix(map, bins, Some(phi))?;
    let mut f = vec![1.0; bins];
    let mut log_scale = 0.0;
    for _ in 0..n {
        f = op.apply_function(&f);
        let max = f.iter().cloned().fold(f64::MIN, f64::max);
        log_scale += max.ln();
        for x in &mut f {
            *x /= max;
        }
    }
    let min = f.iter().cloned().fold(f64::MAX, f64::min);
    let log_inf_transfer = log_scale + min.ln();
    Ok(ContractionCheck {
        holds: log_sup_weight < log_inf_transfer,
        log_sup_weight,
        log_inf_transfer,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_potential_pressure_is_log_branch_count() {
        let map = PartitionedMap::doubling();
        let p = pressure(&map, &Potential::Zero, 64, 256).unwrap();
        assert!((p.value - 2.0f64.ln()).abs() < 1e-9, "value {}", p.value);
        assert!(p.width() < 1e-9);

        let map = PartitionedMap::bernoulli_markov(3).unwrap();
        let p = pressure(&map, &Potential::Zero, 64, 243).unwrap();
        assert!((p.value - 3.0f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn geometric_potential_has_zero_pressure() {
        let map = PartitionedMap::doubling();
        let phi = Potential::NegLogDeriv { scale: 1.0 };
        let p = pressure(&map, &phi, 64, 128).unwrap();
        assert!(p.value.abs() < 1e-9, "value {}", p.value);
    }

    #[test]
    fn branch_weight_pressure_is_log_weight_sum() {
        let map = PartitionedMap::doubling();
        let phi = Potential::Bernoulli { weights: vec![0.25, 0.75] };
        let p = pressure(&map, &phi, 32, 64).unwrap();
        assert!(p.value.abs() < 1e-9, "weights summing to 1 give P = 0");

        let phi = Potential::Bernoulli { weights: vec![0.5, 0.3] };
        let p = pressure(&map, &phi, 32, 64).unwrap();
        assert!((p.value - 0.8f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn shifting_the_potential_shifts_the_pressure() {
        let map = PartitionedMap::doubling();
        let phi = Potential::piecewise(&[
            (0.0, 0.5, "-0.2"),
            (0.5, 1.0, "0.1"),
        ])
        .unwrap();
        let base = pressure(&map, &phi, 32, 64).unwrap();
        let expected = (f64::exp(-0.2) + f64::exp(0.1)).ln();
        assert!((base.value - expected).abs() < 1e-9);

        let shifted = pressure(&map, &phi.clone().shifted(0.37), 32, 64)
            .unwrap();
        assert!(
            (shifted.value - base.value - 0.37).abs() < 1e-10,
            "shift law violated: {} vs {}",
            shifted.value,
            base.value + 0.37
        );
    }

    #[test]
    fn pressure_is_monotone_in_the_potential() {
        // phi1 <= phi2 pointwise forces P(phi1) <= P(phi2): the transfer
        // weights dominate entrywise. Pairs below bump one branch value
        // at a time.
        let map = PartitionedMap::doubling();
        let levels =
            [(-0.5, 0.2), (-0.3, 0.2), (-0.3, 0.4), (0.0, 0.4), (0.1, 0.6)];
        let mut last = f64::NEG_INFINITY;
        for (a, b) in levels {
            let phi = Potential::piecewise(&[
                (0.0, 0.5, &a.to_string()),
                (0.5, 1.0, &b.to_string()),
            ])
            .unwrap();
            let p = pressure(&map, &phi, 32, 64).unwrap().value;
            assert!(
                last <= p + 1e-8,
                "pressure dropped from {last} to {p} at levels ({a}, {b})"
            );
            last = p;
        }
    }

    #[test]
    fn golden_beta_pressure_approaches_log_beta() {
        let beta = (1.0 + 5.0f64.sqrt()) / 2.0;
        let map = PartitionedMap::beta_map(beta).unwrap();
        // The discrete eigenfunction carries boundary layers a couple
        // of cells wide (range ratio ~ 1.94, not the continuous beta),
        // so the 1/n bracket needs n ~ 700 to tighten below 1e-3.
        let p = pressure(&map, &Potential::Zero, 768, 1 << 10).unwrap();
        assert!(p.lower <= p.upper);
        assert!(p.width() <= BRACKET_TOL);
        assert!(
            (p.value - beta.ln()).abs() < 5e-3,
            "value {} vs log beta {}",
            p.value,
            beta.ln()
        );
    }

    #[test]
    fn short_runs_report_the_bracket_instead_of_guessing() {
        let beta = (1.0 + 5.0f64.sqrt()) / 2.0;
        let map = PartitionedMap::beta_map(beta).unwrap();
        let err = pressure(&map, &Potential::Zero, 2, 256).unwrap_err();
        match err {
            ThermoError::BracketTooWide { width, n, tol } => {
                assert!(width > tol);
                assert_eq!(n, 2);
                assert_eq!(err.slug(), "bracket-too-wide");
            }
            other => panic!("expected BracketTooWide, got {other:?}"),
        }
    }

    #[test]
    fn zero_potential_is_contracting() {
        let map = PartitionedMap::doubling();
        let c = check_contracting_potential(&map, &Potential::Zero, 1, 64)
            .unwrap();
        assert!(c.holds);
        assert!((c.log_sup_weight - 0.0).abs() < 1e-12);
        assert!((c.log_inf_transfer - 2.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn branch_aligned_spike_still_contracts() {
        // The spike fills the whole left branch, so every point has a
        // spiked preimage AND an unspiked one: inf L 1 = e^10 + 1 just
        // beats sup e^phi = e^10.
        let map = PartitionedMap::doubling();
        let phi = Potential::piecewise(&[
            (0.0, 0.5, "10"),
            (0.5, 1.0, "0"),
        ])
        .unwrap();
        let c = check_contracting_potential(&map, &phi, 1, 64).unwrap();
        assert!(c.holds);
        assert!(c.log_margin() > 0.0 && c.log_margin() < 1e-3);
    }

    #[test]
    fn narrow_spike_fails_the_contraction_test() {
        // Spike on [0, 1/4) only: points in the right half of the
        // interval have no spiked preimage, so inf L 1 = 2 while the
        // weight tops out at e^10.
        let map = PartitionedMap::doubling();
        let phi = Potential::piecewise(&[
            (0.0, 0.25, "10"),
            (0.25, 1.0, "0"),
        ])
        .unwrap();
        let c = check_contracting_potential(&map, &phi, 1, 64).unwrap();
        assert!(!c.holds);
        assert!((c.log_sup_weight - 10.0).abs() < 1e-12);
        assert!((c.log_inf_transfer - 2.0f64.ln()).abs() < 1e-12);
    }
}

//! Conformal measures, Gibbs models, and the ball-scaling exponent.
//!
//! The fitted model pairs the two leading eigenvectors of the weighted
//! Ulam operator: the conformal measure nu (measure action) and the
//! density h of mu = h nu with respect to nu (function action), sharing
//! the eigenvalue e^{P(phi)}. Downstream checks read the conformal
//! identity nu(T A) = integral over A of e^{P - phi} d nu directly off
//! the discretization, and the exponent machinery walks generation-m
//! cylinders to bound how Gibbs mass scales with interval length.

use std::f64::consts::LN_2;

use crate::map::PartitionedMap;

use super::potential::Potential;
use super::ulam::{power_iterate, ulam_matrix};
use super::ThermoError;

/// Endpoint sets are deduplicated at this separation; cylinders
/// narrower than it are artifacts of the pullback arithmetic.
const ENDPOINT_TOL: f64 = 1e-13;

/// Refuse to enumerate more endpoints than this (memory guard).
const MAX_ENDPOINTS: usize = 1 << 24;

#[derive(Debug, Clone)]
pub struct GibbsModel {
    pub potential: Potential,
    /// log of the common eigenvalue of the two actions.
    pub pressure: f64,
    /// Conformal cell masses, summing to 1.
    pub nu_weights: Vec<f64>,
    /// Density of mu with respect to nu per cell; sum h_i nu_i = 1.
    pub h_phi: Vec<f64>,
    /// (inf h, sup h): the model is useful only when both are
    /// positive and finite.
    pub h_bounds: (f64, f64),
    /// Ball-scaling exponent, filled in by callers of `s0_estimate`.
    pub s0: Option<f64>,
    pub iterations: u64,
    pub residual: f64,
}

impl GibbsModel {
    pub fn bins(&self) -> usize {
        self.nu_weights.len()
    }

    /// Cell masses of the Gibbs measure mu = h nu; they sum to 1.
    pub fn mu_weights(&self) -> Vec<f64> {
        self.h_phi
            .iter()
            .zip(&self.nu_weights)
            .map(|(h, n)| h * n)
            .collect()
    }
}

/// Fits conformal measure, density, and pressure on a `bins`-cell grid.
pub fn fit_gibbs(
    map: &PartitionedMap,
    phi: &Potential,
    bins: usize,
) -> Result<GibbsModel, ThermoError> {
    let op = ulam_matrix(map, bins, Some(phi))?;
    let (nu, lam_nu, it_nu, res_nu) =
        power_iterate(|v| op.apply_measure(v), bins, None)?;
    let (mut h, lam_h, it_h, res_h) =
        power_iterate(|f| op.apply_function(f), bins, None)?;
    let total: f64 = h.iter().zip(&nu).map(|(a, b)| a * b).sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(ThermoError::NoConvergence {
            iterations: it_h,
            residual: res_h,
        });
    }
    for x in &mut h {
        *x /= total;
    }
    let sup = h.iter().cloned().fold(f64::MIN, f64::max);
    let inf = h.iter().cloned().fold(f64::MAX, f64::min);
    Ok(GibbsModel {
        potential: phi.clone(),
        pressure: 0.5 * (lam_nu.ln() + lam_h.ln()),
        nu_weights: nu,
        h_phi: h,
        h_bounds: (inf, sup),
        s0: None,
        iterations: it_nu.max(it_h),
        residual: res_nu.max(res_h),
    })
}

/// nu-mass of [a, b] with partially covered cells pro-rated linearly.
fn interval_mass(nu: &[f64], a: f64, b: f64) -> f64 {
    let k = nu.len() as f64;
    let (a, b) = (a.max(0.0), b.min(1.0));
    if b <= a {
        return 0.0;
    }
    let i0 = ((a * k).floor() as usize).min(nu.len() - 1);
    let i1 = ((b * k).ceil() as usize).clamp(i0 + 1, nu.len()) - 1;
    let mut mass = 0.0;
    for (i, m) in nu.iter().enumerate().take(i1 + 1).skip(i0) {
        let lo = a.max(i as f64 / k);
        let hi = b.min((i + 1) as f64 / k);
        if hi > lo {
            mass += m * (hi - lo) * k;
        }
    }
    mass
}

/// Max relative violation of nu(T A) = integral over A of
/// e^{P - phi} d nu across the supplied intervals, each of which must
/// sit inside a single branch domain.
pub fn conformal_check(
    model: &GibbsModel,
    map: &PartitionedMap,
    intervals: &[(f64, f64)],
) -> Result<f64, ThermoError> {
    let nu = &model.nu_weights;
    let k = nu.len() as f64;
    let mut worst: f64 = 0.0;
    for &(a, b) in intervals {
        if !(0.0 <= a && a < b && b <= 1.0) {
            return Err(ThermoError::BadParameter(format!(
                "interval ({a}, {b}) is not inside [0, 1]"
            )));
        }
        let branch = map
            .branches()
            .iter()
            .position(|br| a >= br.domain.0 - 1e-12 && b <= br.domain.1 + 1e-12)
            .ok_or_else(|| {
                ThermoError::BadParameter(format!(
                    "interval ({a}, {b}) spans more than one branch"
                ))
            })?;
        let formula = &map.branches()[branch].formula;
        let (ya, yb) = (formula.eval_f64(a), formula.eval_f64(b));
        let (ya, yb) = if ya <= yb { (ya, yb) } else { (yb, ya) };
        let image_mass = interval_mass(nu, ya, yb);
        let i0 = ((a * k).floor() as usize).min(nu.len() - 1);
        let i1 = ((b * k).ceil() as usize).clamp(i0 + 1, nu.len()) - 1;
        let mut integral = 0.0;
        for i in i0..=i1 {
            let lo = a.max(i as f64 / k);
            let hi = b.min((i + 1) as f64 / k);
            if hi <= lo {
                continue;
            }
            let x = 0.5 * (lo + hi);
            let weight =
                (model.pressure - model.potential.eval_on_branch(map, branch, x)).exp();
            integral += nu[i] * (hi - lo) * k * weight;
        }
        if image_mass > 0.0 {
            worst = worst.max((image_mass - integral).abs() / image_mass);
        }
    }
    Ok(worst)
}

/// Endpoints of all generation-m cylinders: the branch partition
/// pulled back m-1 times through every inverse branch.
pub fn cylinder_endpoints(
    map: &PartitionedMap,
    m: u64,
) -> Result<Vec<f64>, ThermoError> {
    if m == 0 {
        return Err(ThermoError::BadParameter(
            "cylinders start at generation 1".into(),
        ));
    }
    let mut base = vec![0.0, 1.0];
    for br in map.branches().iter().skip(1) {
        base.push(br.domain.0);
    }
    base.sort_by(f64::total_cmp);
    let mut points = base.clone();
    for _ in 1..m {
        let mut next = base.clone();
        for &y in &points {
            for b in 0..map.branches().len() {
                if let Some(x) = map.inverse_in_branch(b, y) {
                    next.push(x);
                }
            }
        }
        next.sort_by(f64::total_cmp);
        next.dedup_by(|a, b| (*a - *b).abs() <= ENDPOINT_TOL);
        if next.len() > MAX_ENDPOINTS {
            return Err(ThermoError::BadParameter(format!(
                "generation {m} needs more than {MAX_ENDPOINTS} endpoints"
            )));
        }
        points = next;
    }
    Ok(points)
}

/// One sweep over generation-m cylinders: Birkhoff sums of phi and of
/// log |T'| at `subdivision` interior samples per cylinder.
struct CylinderSweep {
    /// sup over samples of S_m phi - m P.
    sup_weight: f64,
    /// sup over samples of log |(T^m)'|.
    sup_log_deriv: f64,
    /// inf over samples of (S_m phi - m P) / (-log |(T^m)'|).
    inf_quotient: f64,
    /// max within-cylinder spread of S_m phi (0 for 1 sample).
    distortion: f64,
    cylinders: usize,
}

fn sweep_cylinders(
    map: &PartitionedMap,
    phi: &Potential,
    pressure: f64,
    m: u64,
    subdivision: usize,
) -> Result<CylinderSweep, ThermoError> {
    if map.is_indifferent() {
        return Err(ThermoError::IndifferentMap);
    }
    if subdivision == 0 {
        return Err(ThermoError::BadParameter(
            "subdivision must be at least 1".into(),
        ));
    }
    phi.validate(map)?;
    let endpoints = cylinder_endpoints(map, m)?;
    let mut sweep = CylinderSweep {
        sup_weight: f64::NEG_INFINITY,
        sup_log_deriv: f64::NEG_INFINITY,
        inf_quotient: f64::INFINITY,
        distortion: 0.0,
        cylinders: 0,
    };
    for w in endpoints.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi - lo <= ENDPOINT_TOL {
            continue;
        }
        sweep.cylinders += 1;
        let mut cyl_min = f64::INFINITY;
        let mut cyl_max = f64::NEG_INFINITY;
        for t in 0..subdivision {
            let x = lo + (hi - lo) * (t as f64 + 0.5) / subdivision as f64;
            let mut s = 0.0;
            let mut d = 0.0;
            let mut y = x;
            for _ in 0..m {
                s += phi.eval(map, y);
                d += map.derivative_f64(y).abs().ln();
                y = map.evaluate_f64(y);
            }
            let centered = s - m as f64 * pressure;
            cyl_min = cyl_min.min(centered);
            cyl_max = cyl_max.max(centered);
            sweep.sup_weight = sweep.sup_weight.max(centered);
            sweep.sup_log_deriv = sweep.sup_log_deriv.max(d);
            if d > 0.0 {
                sweep.inf_quotient = sweep.inf_quotient.min(centered / -d);
            }
        }
        sweep.distortion = sweep.distortion.max(cyl_max - cyl_min);
    }
    if !(sweep.sup_log_deriv > 0.0) {
        return Err(ThermoError::BadParameter(
            "map is not expanding on the sampled cylinders".into(),
        ));
    }
    Ok(sweep)
}

#[derive(Debug, Clone, Copy)]
pub struct ThetaEstimate {
    /// (log 2 + sup(S_m phi - m P)) / (-sup log |(T^m)'|).
    pub value: f64,
    pub m: u64,
    /// Worst within-cylinder spread of S_m phi; a bounded-distortion
    /// sanity figure, informative for subdivision >= 2.
    pub distortion: f64,
    pub cylinders: usize,
}

/// Covering exponent theta_m: how fast the 2-cover of an iterated
/// ball shrinks relative to the worst m-step expansion.
pub fn theta_m(
    map: &PartitionedMap,
    phi: &Potential,
    pressure: f64,
    m: u64,
    subdivision: usize,
) -> Result<ThetaEstimate, ThermoError> {
    let sweep = sweep_cylinders(map, phi, pressure, m, subdivision)?;
    Ok(ThetaEstimate {
        value: (LN_2 + sweep.sup_weight) / -sweep.sup_log_deriv,
        m,
        distortion: sweep.distortion,
        cylinders: sweep.cylinders,
    })
}

#[derive(Debug, Clone)]
pub struct S0Estimate {
    /// max over the schedule of the per-generation inf quotient.
    pub value: f64,
    /// (m, inf quotient) per schedule entry.
    pub quotients: Vec<(u64, f64)>,
    /// theta_m alongside, from the same cylinder sweeps.
    pub thetas: Vec<ThetaEstimate>,
}

/// Ball-scaling exponent: mu(B(x, r)) <= c r^{s} should hold for every
/// s below this value. Computed as the best (largest) over the
/// m-schedule of the worst (smallest) cylinder quotient
/// (S_m phi - m P) / (-log |(T^m)'|), midpoint evaluation.
pub fn s0_estimate(
    map: &PartitionedMap,
    phi: &Potential,
    pressure: f64,
    m_schedule: &[u64],
) -> Result<S0Estimate, ThermoError> {
    if m_schedule.is_empty() {
        return Err(ThermoError::BadParameter(
            "need at least one generation in the schedule".into(),
        ));
    }
    let mut quotients = Vec::with_capacity(m_schedule.len());
    let mut thetas = Vec::with_capacity(m_schedule.len());
    let mut value = f64::NEG_INFINITY;
    for &m in m_schedule {
        let sweep = sweep_cylinders(map, phi, pressure, m, 1)?;
        quotients.push((m, sweep.inf_quotient));
        thetas.push(ThetaEstimate {
            value: (LN_2 + sweep.sup_weight) / -sweep.sup_log_deriv,
            m,
            distortion: sweep.distortion,
            cylinders: sweep.cylinders,
        });
        value = value.max(sweep.inf_quotient);
    }
    Ok(S0Estimate { value, quotients, thetas })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden() -> f64 {
        (1.0 + 5.0f64.sqrt()) / 2.0
    }

    #[test]
    fn dyadic_cylinders_are_the_dyadic_grid() {
        let map = PartitionedMap::doubling();
        let pts = cylinder_endpoints(&map, 3).unwrap();
        assert_eq!(pts.len(), 9);
        for (i, p) in pts.iter().enumerate() {
            assert!((p - i as f64 / 8.0).abs() < 1e-15);
        }
    }

    #[test]
    fn golden_cylinder_counts_follow_fibonacci() {
        let map = PartitionedMap::beta_map(golden()).unwrap();
        let mut counts = Vec::new();
        for m in 1..=5 {
            counts.push(cylinder_endpoints(&map, m).unwrap().len() - 1);
        }
        assert_eq!(counts, vec![2, 3, 5, 8, 13]);
    }

    #[test]
    fn cylinder_generations_are_nested() {
        let map = PartitionedMap::beta_map(golden()).unwrap();
        let coarse = cylinder_endpoints(&map, 4).unwrap();
        let fine = cylinder_endpoints(&map, 5).unwrap();
        for p in &coarse {
            assert!(
                fine.iter().any(|q| (p - q).abs() < 1e-12),
                "endpoint {p} lost on refinement"
            );
        }
    }

    #[test]
    fn branch_weight_model_recovers_the_product_measure() {
        let p = 0.25;
        let map = PartitionedMap::doubling();
        let phi = Potential::Bernoulli { weights: vec![p, 1.0 - p] };
        let model = fit_gibbs(&map, &phi, 4).unwrap();
        let expected = [
            p * p,
            p * (1.0 - p),
            (1.0 - p) * p,
            (1.0 - p) * (1.0 - p),
        ];
        for (got, want) in model.nu_weights.iter().zip(expected) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
        assert!(model.pressure.abs() < 1e-10);
        for h in &model.h_phi {
            assert!((h - 1.0).abs() < 1e-10);
        }
        let mu_total: f64 = model.mu_weights().iter().sum();
        assert!((mu_total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn geometric_model_on_doubling_is_lebesgue() {
        let map = PartitionedMap::doubling();
        let phi = Potential::NegLogDeriv { scale: 1.0 };
        let model = fit_gibbs(&map, &phi, 32).unwrap();
        for w in &model.nu_weights {
            assert!((w - 1.0 / 32.0).abs() < 1e-12);
        }
        assert!(model.pressure.abs() < 1e-10);
        assert!((model.h_bounds.0 - 1.0).abs() < 1e-10);
        assert!((model.h_bounds.1 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn golden_zero_potential_conformal_measure_is_lebesgue() {
        // Both branches have slope beta, so Lebesgue satisfies the
        // conformal identity exactly; the density carries the Parry
        // plateaus.
        let map = PartitionedMap::beta_map(golden()).unwrap();
        let model = fit_gibbs(&map, &Potential::Zero, 211).unwrap();
        for w in &model.nu_weights {
            assert!((w - 1.0 / 211.0).abs() < 1e-12);
        }
        assert!((model.pressure - golden().ln()).abs() < 1e-10);
        let h_left = model.h_phi[(0.3 * 211.0) as usize];
        let h_right = model.h_phi[(0.8 * 211.0) as usize];
        assert!((h_left - 1.170_820).abs() < 2e-2, "left plateau {h_left}");
        assert!((h_right - 0.723_607).abs() < 2e-2, "right plateau {h_right}");
    }

    #[test]
    fn product_measure_is_conformal_on_aligned_intervals() {
        let map = PartitionedMap::doubling();
        let phi = Potential::Bernoulli { weights: vec![0.25, 0.75] };
        let model = fit_gibbs(&map, &phi, 16).unwrap();
        let v = conformal_check(&model, &map, &[(0.0, 0.25), (0.5, 0.875)])
            .unwrap();
        assert!(v < 1e-10, "violation {v}");
    }

    #[test]
    fn lebesgue_is_conformal_for_the_geometric_potential() {
        let map = PartitionedMap::doubling();
        let phi = Potential::NegLogDeriv { scale: 1.0 };
        let model = fit_gibbs(&map, &phi, 8).unwrap();
        let v = conformal_check(&model, &map, &[(0.5, 0.75)]).unwrap();
        assert!(v < 1e-12, "violation {v}");
    }

    #[test]
    fn golden_conformal_identity_holds_off_grid() {
        let map = PartitionedMap::beta_map(golden()).unwrap();
        let model = fit_gibbs(&map, &Potential::Zero, 1 << 14).unwrap();
        let b2 = 1.0 / (golden() * golden());
        let v = conformal_check(&model, &map, &[(0.0, b2)]).unwrap();
        assert!(v < 1e-3, "violation {v}");
    }

    #[test]
    fn conformal_check_rejects_intervals_spanning_branches() {
        let map = PartitionedMap::doubling();
        let phi = Potential::Bernoulli { weights: vec![0.25, 0.75] };
        let model = fit_gibbs(&map, &phi, 8).unwrap();
        assert!(matches!(
            conformal_check(&model, &map, &[(0.25, 0.75)]),
            Err(ThermoError::BadParameter(_))
        ));
    }

    #[test]
    fn conformal_violation_shrinks_as_bins_refine() {
        // A = [0, 0.3) is not dyadic, so the pro-rated endpoint cells
        // disagree with the singular product measure; the disagreement
        // must die out as the grid refines.
        let map = PartitionedMap::doubling();
        let phi = Potential::Bernoulli { weights: vec![0.25, 0.75] };
        let mut violations = Vec::new();
        for bits in [9, 11, 13] {
            let model = fit_gibbs(&map, &phi, 1 << bits).unwrap();
            violations
                .push(conformal_check(&model, &map, &[(0.0, 0.3)]).unwrap());
        }
        assert!(violations[0] > 0.0);
        assert!(
            violations[2] < violations[0] / 4.0,
            "violations failed to shrink: {violations:?}"
        );
    }

    #[test]
    fn lebesgue_theta_is_m_minus_one_over_m() {
        let map = PartitionedMap::doubling();
        let phi = Potential::NegLogDeriv { scale: 1.0 };
        for m in [1u64, 5, 12] {
            let t = theta_m(&map, &phi, 0.0, m, 2).unwrap();
            let want = (m as f64 - 1.0) / m as f64;
            assert!(
                (t.value - want).abs() < 1e-12,
                "m={m}: {} vs {want}",
                t.value
            );
            assert!(t.distortion < 1e-12);
        }
    }

    #[test]
    fn zero_potential_theta_coincides_with_lebesgue() {
        let map = PartitionedMap::doubling();
        let t = theta_m(&map, &Potential::Zero, LN_2, 8, 1).unwrap();
        assert!((t.value - 7.0 / 8.0).abs() < 1e-12);
        assert_eq!(t.cylinders, 256);
    }

    #[test]
    fn skewed_weights_drag_theta_down() {
        let map = PartitionedMap::doubling();
        let phi = Potential::Bernoulli { weights: vec![0.25, 0.75] };
        let t = theta_m(&map, &phi, 0.0, 20, 1).unwrap();
        let want = (LN_2 + 20.0 * 0.75f64.ln()) / -(20.0 * LN_2);
        assert!((t.value - want).abs() < 1e-9, "{} vs {want}", t.value);
    }

    #[test]
    fn indifferent_maps_are_rejected() {
        let map = PartitionedMap::manneville_pomeau(1.5).unwrap();
        let err = theta_m(&map, &Potential::Zero, LN_2, 4, 1).unwrap_err();
        assert_eq!(err.slug(), "indifferent-map");
    }

    #[test]
    fn lebesgue_scaling_exponent_is_one() {
        let map = PartitionedMap::doubling();
        let phi = Potential::NegLogDeriv { scale: 1.0 };
        let est = s0_estimate(&map, &phi, 0.0, &[2, 5, 9]).unwrap();
        assert!((est.value - 1.0).abs() < 1e-12);
        assert_eq!(est.thetas.len(), 3);
        for (t, m) in est.thetas.iter().zip([2u64, 5, 9]) {
            assert!((t.value - (m as f64 - 1.0) / m as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn skewed_weights_scale_like_the_small_branch() {
        // Worst cylinders carry the heavy weight 3/4 at every step, so
        // the quotient is log(4/3)/log 2 for every generation.
        let map = PartitionedMap::doubling();
        let phi = Potential::Bernoulli { weights: vec![0.25, 0.75] };
        let est = s0_estimate(&map, &phi, 0.0, &[4, 10, 20]).unwrap();
        let want = (4.0f64 / 3.0).ln() / LN_2;
        assert!((est.value - want).abs() < 1e-9, "{} vs {want}", est.value);
        for (_, q) in &est.quotients {
            assert!((q - want).abs() < 1e-9);
        }
    }

    #[test]
    fn balanced_weights_reduce_to_lebesgue_scaling() {
        let map = PartitionedMap::doubling();
        let phi = Potential::Bernoulli { weights: vec![0.5, 0.5] };
        let est = s0_estimate(&map, &phi, 0.0, &[3, 7]).unwrap();
        assert!((est.value - 1.0).abs() < 1e-12);
    }
}

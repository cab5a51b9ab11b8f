//! Correlation decay of observables under a map.
//!
//! The quantity is always |∫ f(T^n x) g(x) dμ − ∫f dμ ∫g dμ|. Three
//! estimators trade generality for precision:
//!
//! * `ExactDyadic`: doubling map, polynomial pieces, uniform measure.
//!   T^n is affine on each dyadic block of generation n, so the cross
//!   integral splits into 2^n closed-form polynomial integrals. Their
//!   count makes naive f64 accumulation lose ~1e-11 by n = 20, which
//!   would swamp the 2^-n/12 identity covariance; sums here run through
//!   a Neumaier compensated accumulator instead.
//! * `Quadrature`: composite midpoint rule on a grid that refines with
//!   the lag (f o T^n oscillates at scale 2^-n, so past lag ~14 the
//!   capped grid under-resolves and the output is only indicative).
//! * `MonteCarlo`: N samples drawn from the reference measure by
//!   inverse CDF, with a reported two-sigma noise floor. The per-lag
//!   stream is keyed by (seed, lag), so series are bit-reproducible
//!   and lags are decorrelated.

use super::bv::BVObservable;
use super::StatsError;
use crate::map::PartitionedMap;
use crate::rng::TaskRng;
use crate::target::dimension::least_squares_slope;

/// Fit requirement: lags above the noise floor.
const MIN_USABLE_LAGS: usize = 5;

/// Block count 2^lag caps the exact path.
const EXACT_LAG_CAP: u64 = 24;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator {
    ExactDyadic,
    Quadrature,
    MonteCarlo { samples: usize, seed: u64 },
}

impl Estimator {
    pub fn label(&self) -> &'static str {
        match self {
            Estimator::ExactDyadic => "exact_dyadic",
            Estimator::Quadrature => "quadrature",
            Estimator::MonteCarlo { .. } => "monte_carlo",
        }
    }
}

/// One correlation value; the floor is zero for deterministic paths.
#[derive(Debug, Clone, Copy)]
pub struct CorrelationPoint {
    pub value: f64,
    pub noise_floor: f64,
}

/// Correlation magnitudes over a range of lags.
#[derive(Debug, Clone)]
pub struct CorrelationSeries {
    pub lags: Vec<u64>,
    pub values: Vec<f64>,
    pub noise_floors: Vec<f64>,
    pub estimator: Estimator,
}

impl CorrelationSeries {
    /// Synthetic series (tests, profile demos): zero noise floor.
    pub fn from_values(lags: Vec<u64>, values: Vec<f64>) -> Self {
        assert_eq!(lags.len(), values.len(), "one value per lag");
        let floors = vec![0.0; values.len()];
        CorrelationSeries {
            lags,
            values,
            noise_floors: floors,
            estimator: Estimator::ExactDyadic,
        }
    }

    /// The largest per-lag floor.
    pub fn noise_floor(&self) -> f64 {
        self.noise_floors.iter().cloned().fold(0.0, f64::max)
    }
}

/// Decay summary: a log-linear rate and the summable-decay constant.
#[derive(Debug, Clone, Copy)]
pub struct DecayProfile {
    /// Least-squares slope of ln value vs lag over usable lags.
    pub fit_rate: f64,
    /// Sum of observed values plus a geometric tail at `fit_rate`;
    /// infinite when the fitted rate does not decay.
    pub c_sum: f64,
    pub usable_lags: usize,
}

/// |Cov(f o T^lag, g)| under the chosen estimator. `masses` are cell
/// masses of the reference measure on a uniform grid; None is Lebesgue.
pub fn correlation(
    map: &PartitionedMap,
    f: &BVObservable,
    g: &BVObservable,
    lag: u64,
    masses: Option<&[f64]>,
    estimator: Estimator,
) -> Result<CorrelationPoint, StatsError> {
    if let Some(m) = masses {
        if m.is_empty() || m.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(StatsError::BadParameter(
                "cell masses must be finite and nonnegative".into(),
            ));
        }
        if m.iter().sum::<f64>() <= 0.0 {
            return Err(StatsError::BadParameter(
                "cell masses sum to zero".into(),
            ));
        }
    }
    match estimator {
        Estimator::ExactDyadic => exact_dyadic(map, f, g, lag, masses),
        Estimator::Quadrature => Ok(quadrature(map, f, g, lag, masses)),
        Estimator::MonteCarlo { samples, seed } => {
            monte_carlo(map, f, g, lag, masses, samples, seed)
        }
    }
}

/// Correlations at every lag 0..=max_lag.
pub fn correlation_series(
    map: &PartitionedMap,
    f: &BVObservable,
    g: &BVObservable,
    max_lag: u64,
    masses: Option<&[f64]>,
    estimator: Estimator,
) -> Result<CorrelationSeries, StatsError> {
    let mut lags = Vec::with_capacity(max_lag as usize + 1);
    let mut values = Vec::with_capacity(max_lag as usize + 1);
    let mut floors = Vec::with_capacity(max_lag as usize + 1);
    for lag in 0..=max_lag {
        let pt = correlation(map, f, g, lag, masses, estimator)?;
        lags.push(lag);
        values.push(pt.value);
        floors.push(pt.noise_floor);
    }
    Ok(CorrelationSeries { lags, values, noise_floors: floors, estimator })
}

/// Fits the decay rate and sums the series with a geometric tail.
pub fn decay_profile(
    series: &CorrelationSeries,
) -> Result<DecayProfile, StatsError> {
    let mut pts = Vec::new();
    let mut last_usable: Option<(u64, f64)> = None;
    for ((&lag, &v), &floor) in series
        .lags
        .iter()
        .zip(&series.values)
        .zip(&series.noise_floors)
    {
        if v > floor && v > 0.0 {
            pts.push((lag as f64, v.ln()));
            last_usable = Some((lag, v));
        }
    }
    if pts.len() < MIN_USABLE_LAGS {
        return Err(StatsError::InsufficientSignal { usable: pts.len() });
    }
    let fit_rate = least_squares_slope(&pts);
    let mut observed = Neumaier::default();
    for &v in &series.values {
        observed.add(v);
    }
    let rho = fit_rate.exp();
    let (_, tail_value) = last_usable.expect("usable lags exist");
    let c_sum = if rho < 1.0 {
        observed.value() + tail_value * rho / (1.0 - rho)
    } else {
        f64::INFINITY
    };
    Ok(DecayProfile { fit_rate, c_sum, usable_lags: pts.len() })
}

/// The correlation-to-energy transfer bound E + (D + E) p.
pub fn decay_transfer_bound(
    var_bound: f64,
    integral_bound: f64,
    p_n: f64,
) -> f64 {
    integral_bound + (var_bound + integral_bound) * p_n
}

/// Compensated accumulator; exact for sums whose condition number stays
/// within f64 range, which covers millions of same-sign block integrals.
#[derive(Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, ca) in a.iter().enumerate() {
        for (j, cb) in b.iter().enumerate() {
            out[i + j] += ca * cb;
        }
    }
    out
}

/// Coefficients of p(a x + b).
fn poly_affine(p: &[f64], a: f64, b: f64) -> Vec<f64> {
    let mut out = vec![*p.last().expect("nonempty poly")];
    for &c in p.iter().rev().skip(1) {
        out = poly_mul(&out, &[b, a]);
        out[0] += c;
    }
    out
}

fn poly_integral(p: &[f64], lo: f64, hi: f64) -> f64 {
    let mut acc = 0.0;
    for (i, &c) in p.iter().enumerate() {
        let k = i as i32 + 1;
        acc += c / k as f64 * (hi.powi(k) - lo.powi(k));
    }
    acc
}

fn poly_pieces(
    g: &BVObservable,
) -> Result<Vec<(f64, f64, Vec<f64>)>, StatsError> {
    g.piece_exprs()
        .map(|(lo, hi, expr)| {
            expr.as_polynomial()
                .map(|p| (lo, hi, p))
                .ok_or_else(|| {
                    StatsError::EstimatorMismatch(format!(
                        "piece on [{lo}, {hi}) is not polynomial; the exact \
                         path needs polynomial or piecewise-constant \
                         observables"
                    ))
                })
        })
        .collect()
}

fn piecewise_integral(pieces: &[(f64, f64, Vec<f64>)]) -> f64 {
    let mut acc = Neumaier::default();
    for (lo, hi, p) in pieces {
        acc.add(poly_integral(p, *lo, *hi));
    }
    acc.value()
}

fn exact_dyadic(
    map: &PartitionedMap,
    f: &BVObservable,
    g: &BVObservable,
    lag: u64,
    masses: Option<&[f64]>,
) -> Result<CorrelationPoint, StatsError> {
    if map.name() != "doubling" {
        return Err(StatsError::EstimatorMismatch(format!(
            "the exact path runs on the doubling builtin, not {}",
            map.name()
        )));
    }
    if let Some(m) = masses {
        let mean = m.iter().sum::<f64>() / m.len() as f64;
        if m.iter().any(|v| (v - mean).abs() > 1e-12 * mean.max(1e-300)) {
            return Err(StatsError::EstimatorMismatch(
                "the exact path integrates against Lebesgue; pass uniform \
                 masses or none"
                    .into(),
            ));
        }
    }
    if lag > EXACT_LAG_CAP {
        return Err(StatsError::BadParameter(format!(
            "exact path caps the lag at {EXACT_LAG_CAP} (2^lag blocks)"
        )));
    }
    let pf = poly_pieces(f)?;
    let pg = poly_pieces(g)?;
    let mean_f = piecewise_integral(&pf);
    let mean_g = piecewise_integral(&pg);

    // T^lag is x -> 2^lag x - j on the j-th dyadic block of generation
    // lag. Substituting x = (j + t) 2^-lag turns the block integral
    // into 2^-lag int f(t) g((j + t) 2^-lag) dt with every coefficient
    // O(1); composing f with the forward affine map instead would put
    // 2^lag-sized coefficients into a cancellation against the mean
    // product and lose ~n ulps per block.
    let blocks = 1u64 << lag;
    let scale = blocks as f64;
    let inv = 1.0 / scale;
    let mut cross = Neumaier::default();
    for j in 0..blocks {
        let jf = j as f64;
        for (glo, ghi, gpoly) in &pg {
            let t_lo = scale * glo - jf;
            let t_hi = scale * ghi - jf;
            if t_hi <= 0.0 || t_lo >= 1.0 {
                continue;
            }
            let composed = poly_affine(gpoly, inv, jf * inv);
            for (flo, fhi, fpoly) in &pf {
                let lo = t_lo.max(*flo);
                let hi = t_hi.min(*fhi);
                if lo < hi {
                    let block =
                        poly_integral(&poly_mul(fpoly, &composed), lo, hi);
                    cross.add(inv * block);
                }
            }
        }
    }
    Ok(CorrelationPoint {
        value: (cross.value() - mean_f * mean_g).abs(),
        noise_floor: 0.0,
    })
}

fn density_at(masses: Option<&[f64]>, total: f64, x: f64) -> f64 {
    match masses {
        None => 1.0,
        Some(m) => {
            let k = m.len();
            let i = ((x * k as f64) as usize).min(k - 1);
            m[i] / total * k as f64
        }
    }
}

fn iterate_f64(map: &PartitionedMap, mut x: f64, lag: u64) -> f64 {
    for _ in 0..lag {
        x = map.evaluate_f64(x);
    }
    x
}

fn quadrature(
    map: &PartitionedMap,
    f: &BVObservable,
    g: &BVObservable,
    lag: u64,
    masses: Option<&[f64]>,
) -> CorrelationPoint {
    let grid = ((64u64 << lag.min(20)) as usize).clamp(4096, 1 << 18);
    let total = masses.map_or(1.0, |m| m.iter().sum());
    let mut cross = Neumaier::default();
    let mut mean_f = Neumaier::default();
    let mut mean_g = Neumaier::default();
    let w = 1.0 / grid as f64;
    for i in 0..grid {
        let t = (i as f64 + 0.5) * w;
        let weight = density_at(masses, total, t) * w;
        let ft = f.eval(iterate_f64(map, t, lag));
        let gt = g.eval(t);
        cross.add(ft * gt * weight);
        mean_f.add(ft * weight);
        mean_g.add(gt * weight);
    }
    CorrelationPoint {
        value: (cross.value() - mean_f.value() * mean_g.value()).abs(),
        noise_floor: 0.0,
    }
}

fn monte_carlo(
    map: &PartitionedMap,
    f: &BVObservable,
    g: &BVObservable,
    lag: u64,
    masses: Option<&[f64]>,
    samples: usize,
    seed: u64,
) -> Result<CorrelationPoint, StatsError> {
    if samples < 2 {
        return Err(StatsError::BadParameter(
            "monte carlo needs at least 2 samples".into(),
        ));
    }
    let mut rng = TaskRng::for_task(seed, lag);
    let cdf: Option<Vec<f64>> = masses.map(|m| {
        let total: f64 = m.iter().sum();
        let mut acc = 0.0;
        m.iter()
            .map(|v| {
                acc += v / total;
                acc
            })
            .collect()
    });
    let mut a = Vec::with_capacity(samples);
    let mut b = Vec::with_capacity(samples);
    for _ in 0..samples {
        let u = rng.f64_unit();
        let x = match &cdf {
            None => u,
            Some(c) => {
                // Piecewise-linear inverse CDF over uniform cells.
                let i = c.partition_point(|&v| v < u).min(c.len() - 1);
                let lo_mass = if i == 0 { 0.0 } else { c[i - 1] };
                let cell_mass = (c[i] - lo_mass).max(f64::MIN_POSITIVE);
                let frac = ((u - lo_mass) / cell_mass).clamp(0.0, 1.0);
                ((i as f64 + frac) / c.len() as f64).min(1.0 - 1e-16)
            }
        };
        a.push(f.eval(iterate_f64(map, x, lag)));
        b.push(g.eval(x));
    }
    let n = samples as f64;
    let mean_a: f64 = a.iter().sum::<f64>() / n;
    let mean_b: f64 = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut sq = 0.0;
    for (&ai, &bi) in a.iter().zip(&b) {
        let p = (ai - mean_a) * (bi - mean_b);
        cov += p;
        sq += p * p;
    }
    cov /= n;
    let var_p = (sq / n - cov * cov).max(0.0) * n / (n - 1.0);
    Ok(CorrelationPoint {
        value: cov.abs(),
        noise_floor: 2.0 * (var_p / n).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doubling() -> PartitionedMap {
        PartitionedMap::doubling()
    }

    #[test]
    fn digit_indicators_decorrelate_after_one_step() {
        // T^-n[0,1/2) meets [0,1/2) in measure exactly 1/4 for n >= 1.
        let map = doubling();
        let f = BVObservable::indicator(0.0, 0.5).unwrap();
        let zero = correlation(&map, &f, &f, 0, None, Estimator::ExactDyadic)
            .unwrap();
        assert!((zero.value - 0.25).abs() < 1e-15);
        for lag in 1..=6 {
            let pt =
                correlation(&map, &f, &f, lag, None, Estimator::ExactDyadic)
                    .unwrap();
            assert_eq!(pt.value, 0.0, "lag {lag}");
            assert_eq!(pt.noise_floor, 0.0);
        }
    }

    #[test]
    fn identity_covariance_halves_each_lag() {
        // Cov(T^n x, x) over Lebesgue is 2^-n/12: binary digits are
        // independent with variance contributions 4^-k.
        let map = doubling();
        let id = BVObservable::formula("x").unwrap();
        for lag in 0..=20u64 {
            let pt =
                correlation(&map, &id, &id, lag, None, Estimator::ExactDyadic)
                    .unwrap();
            let want = 0.5f64.powi(lag as i32) / 12.0;
            assert!(
                (pt.value - want).abs() < 1e-12,
                "lag {lag}: {} vs {want}",
                pt.value
            );
        }
    }

    #[test]
    fn exact_path_rejects_unsupported_inputs() {
        let golden =
            PartitionedMap::beta_map((1.0 + 5f64.sqrt()) / 2.0).unwrap();
        let id = BVObservable::formula("x").unwrap();
        let err =
            correlation(&golden, &id, &id, 1, None, Estimator::ExactDyadic)
                .unwrap_err();
        assert_eq!(err.slug(), "estimator-mismatch");

        let map = doubling();
        let rough = BVObservable::formula("sqrt(x)").unwrap();
        assert!(matches!(
            correlation(&map, &rough, &id, 1, None, Estimator::ExactDyadic),
            Err(StatsError::EstimatorMismatch(_))
        ));

        let skewed = [0.7, 0.3];
        assert!(matches!(
            correlation(
                &map,
                &id,
                &id,
                1,
                Some(&skewed),
                Estimator::ExactDyadic
            ),
            Err(StatsError::EstimatorMismatch(_))
        ));
    }

    #[test]
    fn quadrature_tracks_the_closed_form() {
        let map = doubling();
        let id = BVObservable::formula("x").unwrap();
        for lag in 0..=8u64 {
            let pt = correlation(&map, &id, &id, lag, None, Estimator::Quadrature)
                .unwrap();
            let want = 0.5f64.powi(lag as i32) / 12.0;
            assert!(
                (pt.value - want).abs() < 1e-6,
                "lag {lag}: {} vs {want}",
                pt.value
            );
        }
    }

    #[test]
    fn monte_carlo_matches_exact_within_three_sigma() {
        let map = doubling();
        let mut rng = TaskRng::new(4242);
        for pair in 0..20u64 {
            let bf = (rng.below(14) + 1) as f64 / 16.0;
            let bg = (rng.below(14) + 1) as f64 / 16.0;
            let (c0, c1, c2) = (
                2.0 * rng.f64_unit() - 1.0,
                2.0 * rng.f64_unit() - 1.0,
                2.0 * rng.f64_unit() - 1.0,
            );
            let f = BVObservable::piecewise(&[
                (0.0, bf, &format!("{c0:.6} + {c1:.6}*x")),
                (bf, 1.0, &format!("{c2:.6}")),
            ])
            .unwrap();
            let g = BVObservable::piecewise(&[
                (0.0, bg, &format!("{c2:.6}*x")),
                (bg, 1.0, &format!("{c1:.6} + {c0:.6}*x*x")),
            ])
            .unwrap();
            let lag = 1 + pair % 4;
            let exact =
                correlation(&map, &f, &g, lag, None, Estimator::ExactDyadic)
                    .unwrap();
            let mc = correlation(
                &map,
                &f,
                &g,
                lag,
                None,
                Estimator::MonteCarlo { samples: 4000, seed: 900 + pair },
            )
            .unwrap();
            assert!(
                (mc.value - exact.value).abs()
                    <= 1.5 * mc.noise_floor + 1e-9,
                "pair {pair}: exact {} vs mc {} (floor {})",
                exact.value,
                mc.value,
                mc.noise_floor
            );
        }
    }

    #[test]
    fn constant_observables_are_uncorrelated_with_anything() {
        let golden =
            PartitionedMap::beta_map((1.0 + 5f64.sqrt()) / 2.0).unwrap();
        let f = BVObservable::formula("x").unwrap();
        let c = BVObservable::formula("0.7").unwrap();
        let quad =
            correlation(&golden, &f, &c, 3, None, Estimator::Quadrature)
                .unwrap();
        assert!(quad.value < 1e-12);
        let mc = correlation(
            &golden,
            &f,
            &c,
            3,
            None,
            Estimator::MonteCarlo { samples: 1000, seed: 3 },
        )
        .unwrap();
        assert!(mc.value <= mc.noise_floor + 1e-12);
    }

    #[test]
    fn series_over_doubling_identity_recovers_log_two() {
        let map = doubling();
        let id = BVObservable::formula("x").unwrap();
        let series = correlation_series(
            &map,
            &id,
            &id,
            14,
            None,
            Estimator::ExactDyadic,
        )
        .unwrap();
        assert_eq!(series.noise_floor(), 0.0);
        let profile = decay_profile(&series).unwrap();
        assert!(
            (profile.fit_rate + std::f64::consts::LN_2).abs() < 1e-6,
            "rate {}",
            profile.fit_rate
        );
        assert!(profile.c_sum.is_finite());
    }

    #[test]
    fn geometric_series_sums_to_two() {
        let lags: Vec<u64> = (0..=10).collect();
        let values: Vec<f64> =
            lags.iter().map(|&n| 0.5f64.powi(n as i32)).collect();
        let series = CorrelationSeries::from_values(lags, values);
        let profile = decay_profile(&series).unwrap();
        assert!((profile.fit_rate + std::f64::consts::LN_2).abs() < 1e-9);
        assert!((profile.c_sum - 2.0).abs() < 1e-9, "sum {}", profile.c_sum);
        assert_eq!(profile.usable_lags, 11);
    }

    #[test]
    fn inverse_square_series_approaches_basel() {
        let lags: Vec<u64> = (1..=100).collect();
        let values: Vec<f64> =
            lags.iter().map(|&n| 1.0 / (n * n) as f64).collect();
        let series = CorrelationSeries::from_values(lags, values);
        let profile = decay_profile(&series).unwrap();
        let basel = std::f64::consts::PI.powi(2) / 6.0;
        assert!(
            (profile.c_sum - basel).abs() < 0.05 * basel,
            "sum {} vs {basel}",
            profile.c_sum
        );
    }

    #[test]
    fn too_few_usable_lags_is_an_error() {
        let series = CorrelationSeries::from_values(
            vec![0, 1, 2, 3],
            vec![1.0, 0.5, 0.25, 0.125],
        );
        let err = decay_profile(&series).unwrap_err();
        assert_eq!(err.slug(), "insufficient-signal");
        assert!(matches!(
            err,
            StatsError::InsufficientSignal { usable: 4 }
        ));

        // All-zero tails never rise above the floor.
        let map = doubling();
        let f = BVObservable::indicator(0.0, 0.5).unwrap();
        let series =
            correlation_series(&map, &f, &f, 8, None, Estimator::ExactDyadic)
                .unwrap();
        assert!(matches!(
            decay_profile(&series),
            Err(StatsError::InsufficientSignal { usable: 1 })
        ));
    }

    #[test]
    fn transfer_bound_formula() {
        assert_eq!(decay_transfer_bound(0.0, 1.0, 0.0), 1.0);
        assert_eq!(decay_transfer_bound(2.0, 1.0, 0.5), 2.5);
        // Energy-bound shape: C1 + (C1 + 2 min(r^-s)) p with C1 = c_s.
        let (c_s, min_pow, p) = (1.3, 4.0, 0.25);
        let got = decay_transfer_bound(2.0 * min_pow, c_s, p);
        assert!((got - (c_s + (c_s + 2.0 * min_pow) * p)).abs() < 1e-15);
    }
}

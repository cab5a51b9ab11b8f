//! The acceptance suite: ten end-to-end checks, one per subsystem
//! guarantee, each at its documented tolerance. `run_suite` prints one
//! PASS or FAIL line per check and reports the conjunction; the
//! `acceptance` integration test target runs the same functions, one
//! test per check.
//!
//! Quick mode shrinks the sampling budgets (fewer starts, shorter
//! orbits) for smoke runs; tolerances stay put except where the smaller
//! budget genuinely cannot reach the full-run tolerance, and those
//! relaxations are noted in the emitted detail string.

use std::time::Instant;

use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::map::PartitionedMap;
use crate::report::ArtifactWriter;
use crate::rng::TaskRng;
use crate::runner::{execute, RunError};
use crate::stats::{
    correlation_series, decay_profile, return_sequence,
    sum_growth_exponent, uniform_return_start, BVObservable, Estimator,
};
use crate::target::boxdim::{
    box_counting_dimension, default_levels, intersection_experiment,
};
use crate::target::energy::{ball_pair_energy_quadrature, Verdict};
use crate::target::{
    ball_pair_energy, dimension_formula, energy_scan, Ball,
    RadiusSchedule, WindowRule,
};
use crate::thermo::{
    ball_scaling_check, fit_gibbs, pressure, s0_estimate,
    stationary_density, ulam_matrix, Potential,
};

/// Outcome of one acceptance check.
#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CriterionResult {
    fn from(
        name: &'static str,
        body: Result<(bool, String), String>,
    ) -> CriterionResult {
        match body {
            Ok((passed, detail)) => CriterionResult { name, passed, detail },
            Err(message) => CriterionResult {
                name,
                passed: false,
                detail: format!("errored: {message}"),
            },
        }
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Seed bases for the suite's random draws. Sub-streams derive from a
/// base by XOR with small task indices, so distinct bases stay far
/// enough apart that no two checks share a stream.
mod seed {
    pub const KERNEL: u64 = 0x11 << 32;
    pub const ENERGY: u64 = 0x22 << 32;
    pub const BOXES: u64 = 0x33 << 32;
    pub const RETURNS: u64 = 0x44 << 32;
    pub const SCALING: u64 = 0x55 << 32;
}

/// The radius decay exponent alone decides the predicted dimension:
/// power(alpha) gives min(1, 1/alpha) and exponential schedules give 0.
pub fn check_dimension_formula(_quick: bool) -> CriterionResult {
    let body = (|| -> Result<(bool, String), String> {
        let mut worst = 0.0f64;
        for (alpha, want) in
            [(1.0, 1.0), (1.25, 0.8), (2.0, 0.5), (4.0, 0.25)]
        {
            let schedule = RadiusSchedule::power(alpha)
                .map_err(|e| e.to_string())?;
            let got = dimension_formula(&schedule, 1.0, 2048)
                .map_err(|e| e.to_string())?
                .value;
            worst = worst.max((got - want).abs());
        }
        let schedule = RadiusSchedule::exponential(0.5)
            .map_err(|e| e.to_string())?;
        let exp_value = dimension_formula(&schedule, 1.0, 2048)
            .map_err(|e| e.to_string())?
            .value;
        worst = worst.max(exp_value.abs());
        Ok((
            worst <= 1e-9,
            format!("max |predicted - expected| = {worst:.2e}"),
        ))
    })();
    CriterionResult::from("dimension-formula", body)
}

/// The closed-form pair kernel agrees with two-dimensional quadrature
/// to 1e-8 relative error across random geometries and exponents.
pub fn check_pair_kernel(quick: bool) -> CriterionResult {
    let body = (|| -> Result<(bool, String), String> {
        let pairs = if quick { 25 } else { 100 };
        let mut rng = TaskRng::for_task(seed::KERNEL, 0);
        let mut worst = 0.0f64;
        for pair in 0..pairs {
            let center_a = rng.f64_unit();
            let center_b = match pair % 5 {
                // Exercise nested and heavily overlapping geometry,
                // not just generic disjoint balls.
                0 => center_a,
                1 => center_a + 1e-7,
                _ => rng.f64_unit(),
            };
            // Forced-overlap pairs stay wide: the quadrature oracle
            // integrates the narrow side numerically, and its absolute
            // tolerance cannot certify 1e-8 relative on integrals that
            // are themselves ~1e-7.
            let radius_a = match pair % 5 {
                0 | 1 => 0.02 + 0.28 * rng.f64_unit(),
                _ => 1e-4 + (0.3 - 1e-4) * rng.f64_unit(),
            };
            let radius_b = match pair % 5 {
                0 => radius_a * 0.5,
                _ => 1e-4 + (0.3 - 1e-4) * rng.f64_unit(),
            };
            let a = Ball::new(center_a, radius_a);
            let b = Ball::new(center_b, radius_b);
            let (wide, narrow) = if a.radius >= b.radius { (a, b) } else { (b, a) };
            for k in 1..=9 {
                let s = k as f64 / 10.0;
                let closed = ball_pair_energy(&a, &b, s);
                let quad = ball_pair_energy_quadrature(&wide, &narrow, s);
                let rel = (closed - quad).abs() / quad.abs().max(1e-300);
                worst = worst.max(rel);
            }
        }
        Ok((
            worst <= 1e-8,
            format!("{pairs} pairs, max relative error = {worst:.2e}"),
        ))
    })();
    CriterionResult::from("pair-kernel", body)
}

/// The energy dichotomy around the predicted dimension 1/2 for the
/// doubling map with r_n = n^-2: stage energies stay bounded at
/// s = 0.4 and grow at s = 0.6.
pub fn check_energy_dichotomy(quick: bool) -> CriterionResult {
    let body = (|| -> Result<(bool, String), String> {
        let map = PartitionedMap::doubling();
        let schedule =
            RadiusSchedule::power(2.0).map_err(|e| e.to_string())?;
        let (starts, top) = if quick { (4, 10) } else { (20, 13) };
        let n_schedule: Vec<u64> = (6..=top).map(|k| 1u64 << k).collect();
        let bits = map.required_bits(*n_schedule.last().unwrap());
        let mut low = Vec::new();
        let mut high = Vec::new();
        for i in 0..starts {
            let x = TaskRng::for_task(seed::ENERGY, i).point(bits);
            let scan = energy_scan(
                &map,
                &x,
                &schedule,
                &[0.4, 0.6],
                &n_schedule,
                WindowRule::SqrtCeil,
                1 << 14,
            )
            .map_err(|e| e.to_string())?;
            for v in &scan.verdicts {
                if v.s == 0.4 {
                    low.push(v.slope);
                } else {
                    high.push(v.slope);
                }
            }
        }
        let med_low = median(&mut low);
        let med_high = median(&mut high);
        Ok((
            med_low <= 0.05 && med_high >= 0.10,
            format!(
                "{starts} starts, median slope at s=0.4: {med_low:.3} \
                 (<= 0.05), at s=0.6: {med_high:.3} (>= 0.10)"
            ),
        ))
    })();
    CriterionResult::from("energy-dichotomy", body)
}

/// Box counting recovers the predicted dimension 1/2 for the doubling
/// map with r_n = n^-2, and the intersection of two independent stages
/// keeps most of it.
pub fn check_box_counting(quick: bool) -> CriterionResult {
    let body = (|| -> Result<(bool, String), String> {
        let map = PartitionedMap::doubling();
        let schedule =
            RadiusSchedule::power(2.0).map_err(|e| e.to_string())?;
        let n_balls: u64 = if quick { 1 << 13 } else { 1 << 16 };
        let k_start = (n_balls as f64).sqrt().ceil() as u64;
        let levels = default_levels(n_balls);
        let bits = map.required_bits(n_balls);
        let x = TaskRng::for_task(seed::BOXES, 0).point(bits);
        let single = box_counting_dimension(
            &map, &x, &schedule, k_start, n_balls, &levels,
        )
        .map_err(|e| e.to_string())?;

        let y = TaskRng::for_task(seed::BOXES, 1).point(bits);
        let both = intersection_experiment(
            &map, &x, &y, &schedule, k_start, n_balls, &levels,
        )
        .map_err(|e| e.to_string())?;

        let single_ok = (single.slope - 0.5).abs() <= 0.08;
        let both_ok = both.slope >= 0.40;
        Ok((
            single_ok && both_ok,
            format!(
                "single-orbit slope {:.3} (0.5 +- 0.08), intersection \
                 slope {:.3} (>= 0.40)",
                single.slope, both.slope
            ),
        ))
    })();
    CriterionResult::from("box-counting", body)
}

/// Ulam densities match the closed forms: constant for the doubling
/// map, the two-level Parry density for the golden-ratio map.
pub fn check_invariant_densities(quick: bool) -> CriterionResult {
    let body = (|| -> Result<(bool, String), String> {
        let bins = if quick { 1024 } else { 4096 };

        let doubling = PartitionedMap::doubling();
        let op = ulam_matrix(&doubling, bins, None)
            .map_err(|e| e.to_string())?;
        let flat = stationary_density(&op).map_err(|e| e.to_string())?;
        let ones = vec![1.0; bins];
        let flat_l1 = flat.l1_distance(&ones);

        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let golden =
            PartitionedMap::beta_map(phi).map_err(|e| e.to_string())?;
        let op = ulam_matrix(&golden, bins, None)
            .map_err(|e| e.to_string())?;
        let density = stationary_density(&op).map_err(|e| e.to_string())?;
        // Parry density: (5 + 3 sqrt 5)/10 below 1/phi, (5 + sqrt 5)/10
        // above.
        let cut = 1.0 / phi;
        let lower = (5.0 + 3.0 * 5f64.sqrt()) / 10.0;
        let upper = (5.0 + 5f64.sqrt()) / 10.0;
        let parry: Vec<f64> = (0..bins)
            .map(|i| {
                let mid = (i as f64 + 0.5) / bins as f64;
                if mid < cut {
                    lower
                } else {
                    upper
                }
            })
            .collect();
        let parry_l1 = density.l1_distance(&parry);

        Ok((
            flat_l1 <= 1e-3 && parry_l1 <= 2e-2,
            format!(
                "doubling L1 error {flat_l1:.2e} (<= 1e-3), golden \
                 Parry L1 error {parry_l1:.2e} (<= 2e-2) at {bins} bins"
            ),
        ))
    })();
    CriterionResult::from("invariant-densities", body)
}

/// Pressure identities: P(0) = log 2 on the doubling map, the
/// geometric potential has pressure 0, and adding a constant shifts
/// pressure by exactly that constant.
pub fn check_pressure_identities(quick: bool) -> CriterionResult {
    let body = (|| -> Result<(bool, String), String> {
        let map = PartitionedMap::doubling();
        let bins = if quick { 1024 } else { 4096 };
        let n_max = 256;

        let p_zero = pressure(&map, &Potential::Zero, n_max, bins)
            .map_err(|e| e.to_string())?
            .value;
        let err_zero = (p_zero - 2f64.ln()).abs();

        let geometric = Potential::NegLogDeriv { scale: 1.0 };
        let p_geom = pressure(&map, &geometric, n_max, bins)
            .map_err(|e| e.to_string())?
            .value;
        let err_geom = p_geom.abs();

        let phi = Potential::Bernoulli { weights: vec![0.3, 0.7] };
        let p_phi = pressure(&map, &phi, n_max, bins)
            .map_err(|e| e.to_string())?
            .value;
        let shifted = phi.shifted(0.37);
        let p_shifted = pressure(&map, &shifted, n_max, bins)
            .map_err(|e| e.to_string())?
            .value;
        let err_shift = (p_shifted - p_phi - 0.37).abs();

        Ok((
            err_zero <= 1e-6 && err_geom <= 1e-6 && err_shift <= 1e-8,
            format!(
                "|P(0) - log 2| = {err_zero:.2e} (<= 1e-6), \
                 |P(-log|T'|)| = {err_geom:.2e} (<= 1e-6), \
                 |P(phi + 0.37) - P(phi) - 0.37| = {err_shift:.2e} \
                 (<= 1e-8)"
            ),
        ))
    })();
    CriterionResult::from("pressure-identities", body)
}

/// The critical exponent of the Bernoulli(1/4) measure on the doubling
/// map: cylinder quotients land on log(4/3)/log 2, and the ball-scaling
/// check agrees on which side of it is bounded.
pub fn check_scaling_exponent(quick: bool) -> CriterionResult {
    let body = (|| -> Result<(bool, String), String> {
        let map = PartitionedMap::doubling();
        let phi = Potential::Bernoulli { weights: vec![0.25, 0.75] };
        let bins = if quick { 1024 } else { 4096 };
        let m_schedule: &[u64] =
            if quick { &[4, 8, 12] } else { &[4, 8, 12, 16, 20] };

        let model =
            fit_gibbs(&map, &phi, bins).map_err(|e| e.to_string())?;
        let estimate = s0_estimate(&map, &phi, model.pressure, m_schedule)
            .map_err(|e| e.to_string())?;
        let target = (4.0f64 / 3.0).ln() / 2f64.ln();
        let err = (estimate.value - target).abs();

        let masses = model.mu_weights();
        let mut rng = TaskRng::for_task(seed::SCALING, 0);
        let below = ball_scaling_check(&masses, 0.41, 400, &mut rng)
            .map_err(|e| e.to_string())?;
        let mut rng = TaskRng::for_task(seed::SCALING, 1);
        let above = ball_scaling_check(&masses, 0.60, 400, &mut rng)
            .map_err(|e| e.to_string())?;
        let below_ok = matches!(below.verdict, Verdict::Bounded);
        let above_ok = matches!(above.verdict, Verdict::Divergent);

        Ok((
            err <= 0.02 && below_ok && above_ok,
            format!(
                "|s0 - log(4/3)/log 2| = {err:.2e} (<= 0.02), scaling \
                 verdict at s=0.41: {}, at s=0.60: {}",
                below.verdict.as_str(),
                above.verdict.as_str()
            ),
        ))
    })();
    CriterionResult::from("scaling-exponent", body)
}

/// Return-time partial sums grow linearly when returns are integrable
/// and near quadratically in the heavy-tailed regime, read off as the
/// median log-log growth exponent over independent seeds.
pub fn check_return_time_growth(quick: bool) -> CriterionResult {
    let body = (|| -> Result<(bool, String), String> {
        let (seeds, n_returns, cap) = if quick {
            (3u64, 1500usize, 100_000u64)
        } else {
            (10u64, 10_000usize, 1_000_000u64)
        };
        let gamma_median = |beta: f64| -> Result<f64, String> {
            let map = PartitionedMap::manneville_pomeau(beta)
                .map_err(|e| e.to_string())?;
            let mut gammas = Vec::new();
            for k in 0..seeds {
                let base = seed::RETURNS.wrapping_add(k << 32);
                let mut start_rng = TaskRng::for_task(base, 0);
                let x = uniform_return_start(&mut start_rng, 256);
                let mut restart_rng = TaskRng::for_task(base, 1);
                let series = return_sequence(
                    &map,
                    &x,
                    n_returns,
                    cap,
                    Some(&mut restart_rng),
                )
                .map_err(|e| e.to_string())?;
                gammas.push(
                    sum_growth_exponent(&series.partial_sums)
                        .map_err(|e| e.to_string())?,
                );
            }
            Ok(median(&mut gammas))
        };

        let tame = gamma_median(1.5)?;
        let heavy = gamma_median(3.0)?;
        let tame_ok = (0.95..=1.15).contains(&tame);
        let heavy_ok = (1.6..=2.4).contains(&heavy);
        Ok((
            tame_ok && heavy_ok,
            format!(
                "median growth exponent over {seeds} seeds: beta=1.5 \
                 gives {tame:.3} (in [0.95, 1.15]), beta=3 gives \
                 {heavy:.3} (in [1.6, 2.4])"
            ),
        ))
    })();
    CriterionResult::from("return-time-growth", body)
}

/// The exact dyadic estimator reproduces the identity-observable
/// covariances 2^-n / 12 on the doubling map, and the fitted decay
/// rate and correlation sum follow.
pub fn check_exact_correlations(quick: bool) -> CriterionResult {
    let body = (|| -> Result<(bool, String), String> {
        let map = PartitionedMap::doubling();
        let f = BVObservable::formula("x").map_err(|e| e.to_string())?;
        let max_lag = if quick { 12 } else { 20 };
        let series = correlation_series(
            &map,
            &f,
            &f,
            max_lag,
            None,
            Estimator::ExactDyadic,
        )
        .map_err(|e| e.to_string())?;
        let mut worst = 0.0f64;
        for (lag, value) in series.lags.iter().zip(&series.values) {
            let want = 0.5f64.powi(*lag as i32) / 12.0;
            worst = worst.max((value - want).abs());
        }
        let profile =
            decay_profile(&series).map_err(|e| e.to_string())?;
        let rate_err = (profile.fit_rate + 2f64.ln()).abs();
        Ok((
            worst <= 1e-12 && rate_err <= 1e-6 && profile.c_sum.is_finite(),
            format!(
                "max |C(n) - 2^-n/12| = {worst:.2e} (<= 1e-12) through \
                 lag {max_lag}, |rate + log 2| = {rate_err:.2e} \
                 (<= 1e-6), C_sum = {:.6}",
                profile.c_sum
            ),
        ))
    })();
    CriterionResult::from("exact-correlations", body)
}

/// Two runs with the same config and seed leave byte-identical CSV
/// artifacts, including the randomized estimators.
pub fn check_determinism(quick: bool) -> CriterionResult {
    let body = (|| -> Result<(bool, String), String> {
        let mut configs = vec![(
            "correlations.csv",
            r#"
                [run]
                operation = "correlations"
                seed = 5

                [map]
                builtin = "doubling"

                [params]
                f = "x"
                g = "x"
                max_lag = 6
                estimator = "monte_carlo"
                samples = 40000
            "#,
        )];
        if !quick {
            configs.push((
                "returns.csv",
                r#"
                    [run]
                    operation = "return-times"
                    seed = 9

                    [map]
                    builtin = "manneville_pomeau(3.0)"

                    [params]
                    n_returns = 1200
                    max_steps = 100000
                "#,
            ));
            configs.push((
                "energy.csv",
                r#"
                    [run]
                    operation = "energy-scan"
                    seed = 5

                    [map]
                    builtin = "doubling"

                    [radius]
                    kind = "power"
                    alpha = 2.0

                    [params]
                    s_grid = [0.4, 0.6]
                    n_schedule = [64, 128, 256, 512]
                "#,
            ));
        }
        let mut checked = 0usize;
        for (artifact, text) in configs {
            let bytes: Vec<Vec<u8>> = (0..2)
                .map(|run| -> Result<Vec<u8>, String> {
                    let dir = scratch_dir(artifact, run)?;
                    let cfg = ExperimentConfig::from_toml_str(text)
                        .map_err(|e| e.to_string())?;
                    execute(&cfg, Some(&dir)).map_err(|e| e.to_string())?;
                    let data = std::fs::read(dir.join(artifact))
                        .map_err(|e| e.to_string())?;
                    std::fs::remove_dir_all(&dir).ok();
                    Ok(data)
                })
                .collect::<Result<_, _>>()?;
            if bytes[0].is_empty() || bytes[0] != bytes[1] {
                return Ok((
                    false,
                    format!("{artifact} differs between identical runs"),
                ));
            }
            checked += 1;
        }
        Ok((
            true,
            format!("{checked} artifact kinds byte-identical across reruns"),
        ))
    })();
    CriterionResult::from("determinism", body)
}

fn scratch_dir(tag: &str, run: usize) -> Result<std::path::PathBuf, String> {
    let dir = std::env::temp_dir().join(format!(
        "shrink-targets-accept-{}-{tag}-{run}",
        std::process::id()
    ));
    if dir.exists() {
        std::fs::remove_dir_all(&dir).map_err(|e| e.to_string())?;
    }
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    Ok(dir)
}

/// Every check in suite order.
pub fn all_checks() -> Vec<(&'static str, fn(bool) -> CriterionResult)> {
    vec![
        ("dimension-formula", check_dimension_formula),
        ("pair-kernel", check_pair_kernel),
        ("energy-dichotomy", check_energy_dichotomy),
        ("box-counting", check_box_counting),
        ("invariant-densities", check_invariant_densities),
        ("pressure-identities", check_pressure_identities),
        ("scaling-exponent", check_scaling_exponent),
        ("return-time-growth", check_return_time_growth),
        ("exact-correlations", check_exact_correlations),
        ("determinism", check_determinism),
    ]
}

/// Runs the whole suite, printing one line per check, and returns the
/// results object for the run report.
pub fn run_suite(
    quick: bool,
    artifacts: &mut ArtifactWriter,
) -> Result<Value, RunError> {
    let mut criteria = Vec::new();
    let mut rows = String::from("criterion,passed,seconds\n");
    let mut all_passed = true;
    for (_, check) in all_checks() {
        let started = Instant::now();
        let result = check(quick);
        let seconds = started.elapsed().as_secs_f64();
        println!(
            "{} {} ({}) [{seconds:.1}s]",
            if result.passed { "PASS" } else { "FAIL" },
            result.name,
            result.detail
        );
        all_passed &= result.passed;
        rows.push_str(&format!(
            "{},{},{seconds:.3}\n",
            result.name, result.passed
        ));
        criteria.push(json!({
            "name": result.name,
            "passed": result.passed,
            "detail": result.detail,
            "seconds": seconds,
        }));
    }
    artifacts.write("acceptance.csv", &rows)?;
    Ok(json!({
        "mode": if quick { "quick" } else { "full" },
        "all_passed": all_passed,
        "criteria": criteria,
    }))
}

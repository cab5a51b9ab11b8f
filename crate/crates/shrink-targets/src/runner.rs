//! Operation dispatch: a validated config in, artifacts and a JSON run
//! report out.
//!
//! Error discipline: anything wrong with the requested experiment is a
//! configuration error (exit code 2); anything the mathematics refused
//! to deliver at run time (no convergence, no scaling window, a capped
//! excursion with restarts disabled) is a numerical failure (exit code
//! 3). The split is decided by the error slug, so modules stay free to
//! grow new variants without touching this file.

use std::path::Path;
use std::time::Instant;

use serde_json::{json, Value};

use crate::config::{ConfigError, ExperimentConfig, Operation, Params};
use crate::fixed::{FixedError, PrecisePoint};
use crate::map::MapError;
use crate::report::{self, ArtifactWriter};
use crate::rng::TaskRng;
use crate::stats::returns::RETURN_STEP_CAP;
use crate::stats::{
    correlation_series, decay_profile, return_sequence, sum_growth_exponent,
    uniform_return_start, BVObservable, Estimator, StatsError,
};
use crate::target::boxdim::{
    box_counting_dimension, default_levels, intersection_experiment,
    BoxError,
};
use crate::target::dimension::{DimensionError, Method};
use crate::target::energy::{EnergyError, DEFAULT_MAX_BALLS};
use crate::target::radius::RadiusError;
use crate::target::{dimension_formula, energy_scan, WindowRule};
use crate::thermo::{
    ball_scaling_check, fit_gibbs, pressure, s0_estimate,
    stationary_density, ulam_matrix, Potential, ThermoError,
};

/// Failures after config validation, split by exit code.
#[derive(Debug)]
pub enum RunError {
    /// The experiment was mis-specified (exit code 2).
    Config(String),
    /// The computation ran and failed numerically (exit code 3).
    Numerical { slug: String, message: String },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical { .. } => 3,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(msg) => write!(f, "config error: {msg}"),
            RunError::Numerical { slug, message } => {
                write!(f, "numerical failure ({slug}): {message}")
            }
        }
    }
}

/// Slugs that mean "the mathematics failed", not "the request was
/// malformed". Everything else maps to a config error.
const NUMERICAL_SLUGS: &[&str] = &[
    "no-convergence",
    "no-scaling-window",
    "bracket-too-wide",
    "undecidable",
    "insufficient-precision",
    "cap-exceeded",
    "insufficient-signal",
    "variation-unbounded",
    "at-partition-point",
    "hits-discontinuity",
    "arithmetic-error",
];

fn classify(slug: &str, message: String) -> RunError {
    if NUMERICAL_SLUGS.contains(&slug) {
        RunError::Numerical { slug: slug.to_string(), message }
    } else {
        RunError::Config(message)
    }
}

macro_rules! classify_from {
    ($($ty:ty),+) => {$(
        impl From<$ty> for RunError {
            fn from(err: $ty) -> RunError {
                classify(err.slug(), err.to_string())
            }
        }
    )+};
}

classify_from!(MapError, ThermoError, StatsError, EnergyError, BoxError,
    DimensionError);

impl From<ConfigError> for RunError {
    fn from(err: ConfigError) -> RunError {
        RunError::Config(err.to_string())
    }
}

impl From<RadiusError> for RunError {
    fn from(err: RadiusError) -> RunError {
        RunError::Config(err.to_string())
    }
}

impl From<FixedError> for RunError {
    fn from(err: FixedError) -> RunError {
        RunError::Config(err.to_string())
    }
}

impl From<std::io::Error> for RunError {
    fn from(err: std::io::Error) -> RunError {
        RunError::Config(format!("cannot write artifacts: {err}"))
    }
}

/// Seed-stream layout. Sub-streams for one task are derived by XORing a
/// base with small task indices, so two bases closer than the largest
/// index would share streams. Lanes keep every independent random role
/// a full 2^32 apart.
const SEED_STRIDE: u64 = 1 << 32;

/// Random roles, one lane each.
pub mod lane {
    pub const PRIMARY_START: u64 = 0;
    pub const SECOND_START: u64 = 1;
    pub const MONTE_CARLO: u64 = 2;
    pub const SCALING: u64 = 3;
    pub const RESTARTS: u64 = 4;
}

pub fn lane_rng(seed: u64, lane: u64) -> TaskRng {
    TaskRng::for_task(seed.wrapping_add(lane.wrapping_mul(SEED_STRIDE)), 0)
}

/// Runs one experiment. Artifacts and report.json go to `out_override`,
/// falling back to the config's own `out`; with neither, nothing is
/// written and only the report value is returned.
pub fn execute(
    cfg: &ExperimentConfig,
    out_override: Option<&Path>,
) -> Result<Value, RunError> {
    let started = Instant::now();
    let dir = out_override.or(cfg.out_dir.as_deref());
    let mut artifacts = ArtifactWriter::new(dir);
    let mut defaults = cfg.defaults.clone();

    let results = match cfg.operation {
        Operation::Density => {
            run_density(cfg, &mut artifacts, &mut defaults)?
        }
        Operation::Pressure => {
            run_pressure(cfg, &mut artifacts, &mut defaults)?
        }
        Operation::Correlations => {
            run_correlations(cfg, &mut artifacts, &mut defaults)?
        }
        Operation::ReturnTimes => {
            run_return_times(cfg, &mut artifacts, &mut defaults)?
        }
        Operation::Dimension => {
            run_dimension(cfg, &mut artifacts, &mut defaults)?
        }
        Operation::EnergyScan => {
            run_energy_scan(cfg, &mut artifacts, &mut defaults)?
        }
        Operation::BoxCount => {
            run_box_count(cfg, &mut artifacts, &mut defaults)?
        }
        Operation::S0 => run_s0(cfg, &mut artifacts, &mut defaults)?,
        Operation::Intersect => {
            run_intersect(cfg, &mut artifacts, &mut defaults)?
        }
        Operation::Acceptance => {
            crate::acceptance::run_suite(
                cfg.params.quick.unwrap_or(false),
                &mut artifacts,
            )?
        }
    };

    let mut report = report::skeleton(cfg);
    let map = report.as_object_mut().expect("skeleton is an object");
    map.insert("results".into(), results);
    map.insert("defaults_applied".into(), json!(defaults));
    map.insert("artifacts".into(), json!(artifacts.names()));
    map.insert(
        "wall_ms".into(),
        json!(started.elapsed().as_millis() as u64),
    );
    if let Some(dir) = dir {
        report::write_report(dir, &report)?;
    }
    Ok(report)
}

/// Applies a default, recording it for the report echo.
fn defaulted<T: Copy + std::fmt::Display>(
    given: Option<T>,
    name: &str,
    fallback: T,
    defaults: &mut Vec<String>,
) -> T {
    match given {
        Some(v) => v,
        None => {
            defaults.push(format!("{name} = {fallback}"));
            fallback
        }
    }
}

/// The width orbit experiments actually run at: the configured
/// precision, raised when the enforced rule (one lost bit per expansion
/// doubling, plus guard bits) demands more for `steps` iterations. The
/// raise is recorded for the report echo.
fn orbit_bits(
    cfg: &ExperimentConfig,
    steps: u64,
    defaults: &mut Vec<String>,
) -> u32 {
    let required = cfg.map.required_bits(steps);
    if required > cfg.precision_bits {
        defaults.push(format!(
            "precision_bits raised to {required} for {steps} orbit steps"
        ));
        required
    } else {
        cfg.precision_bits
    }
}

/// Orbit start from the `x`/`x2` parameter: a decimal in [0,1),
/// "hex:<mantissa>", or "random" (the default), drawn from the given
/// lane of the experiment seed. Explicit values are widened exactly to
/// the working width; only random draws fill every bit with entropy.
fn parse_start(
    spec: Option<&str>,
    cfg: &ExperimentConfig,
    bits: u32,
    lane: u64,
    name: &str,
    defaults: &mut Vec<String>,
) -> Result<PrecisePoint, RunError> {
    match spec {
        None => {
            defaults.push(format!("{name} = random"));
            Ok(lane_rng(cfg.seed, lane).point(bits))
        }
        Some("random") => Ok(lane_rng(cfg.seed, lane).point(bits)),
        Some(text) => {
            if let Some(hex) = text.strip_prefix("hex:") {
                // The hex string fixes its own width; the working
                // width is reached by exact widening (or truncation).
                let native = (hex.len() as u32).saturating_mul(4).max(4);
                let p = PrecisePoint::from_hex(hex, native)?;
                return Ok(p.with_bits(bits));
            }
            let v: f64 = text.parse().map_err(|_| {
                RunError::Config(format!(
                    "{name} must be a decimal in [0,1), \
                     \"hex:<mantissa>\", or \"random\"; got {text:?}"
                ))
            })?;
            Ok(PrecisePoint::from_f64(v, bits)?)
        }
    }
}

fn parse_window_rule(
    params: &Params,
    defaults: &mut Vec<String>,
) -> Result<WindowRule, RunError> {
    match params.m_rule.as_deref() {
        None => {
            defaults.push("m_rule = ceil(sqrt(n))".into());
            Ok(WindowRule::SqrtCeil)
        }
        Some("sqrt") => Ok(WindowRule::SqrtCeil),
        Some(text) => {
            if let Some(m) = text.strip_prefix("fixed:") {
                let m: u64 = m.parse().map_err(|_| {
                    RunError::Config(format!(
                        "m_rule fixed window must be an integer, got \
                         {text:?}"
                    ))
                })?;
                return Ok(WindowRule::Fixed(m));
            }
            Err(RunError::Config(format!(
                "m_rule must be \"sqrt\" or \"fixed:<m>\", got {text:?}"
            )))
        }
    }
}

fn parse_observable(
    spec: &str,
    name: &str,
) -> Result<BVObservable, RunError> {
    if let Some(inner) =
        spec.strip_prefix("indicator(").and_then(|s| s.strip_suffix(')'))
    {
        let parts: Vec<&str> = inner.split(',').collect();
        if parts.len() != 2 {
            return Err(RunError::Config(format!(
                "{name}: indicator takes two endpoints, got {spec:?}"
            )));
        }
        let lo: f64 = parts[0].trim().parse().map_err(|_| {
            RunError::Config(format!("{name}: bad endpoint in {spec:?}"))
        })?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| {
            RunError::Config(format!("{name}: bad endpoint in {spec:?}"))
        })?;
        return Ok(BVObservable::indicator(lo, hi)?);
    }
    Ok(BVObservable::formula(spec)?)
}

fn required_radius(
    cfg: &ExperimentConfig,
) -> Result<&crate::target::RadiusSchedule, RunError> {
    cfg.radius.as_ref().ok_or_else(|| {
        RunError::Config("this operation needs a [radius] section".into())
    })
}

fn run_density(
    cfg: &ExperimentConfig,
    artifacts: &mut ArtifactWriter,
    defaults: &mut Vec<String>,
) -> Result<Value, RunError> {
    if cfg.potential.is_some() {
        return Err(RunError::Config(
            "density estimates the unweighted invariant density; drop \
             the [potential] section (pressure and s0 consume \
             potentials)"
                .into(),
        ));
    }
    let bins = defaulted(cfg.params.bins, "bins", 4096, defaults);
    let op = ulam_matrix(&cfg.map, bins, None)?;
    let density = stationary_density(&op)?;
    artifacts.write("density.csv", &report::density_csv(&density))?;
    Ok(json!({
        "estimator": "ulam transfer matrix, power iteration",
        "bins": bins,
        "c_h": density.c_h,
        "iterations": density.iterations,
        "residual": density.residual,
    }))
}

fn run_pressure(
    cfg: &ExperimentConfig,
    artifacts: &mut ArtifactWriter,
    defaults: &mut Vec<String>,
) -> Result<Value, RunError> {
    let phi = match &cfg.potential {
        Some(phi) => phi.clone(),
        None => {
            defaults.push("potential = zero".into());
            Potential::Zero
        }
    };
    let bins = defaulted(cfg.params.bins, "bins", 4096, defaults);
    let n_max = defaulted(cfg.params.n_max, "n_max", 512, defaults);
    let estimate = pressure(&cfg.map, &phi, n_max, bins)?;
    artifacts.write("pressure.csv", &report::pressure_csv(&estimate))?;
    Ok(json!({
        "estimator": "transfer operator bracket, sup/inf of L^n 1",
        "value": estimate.value,
        "lower": estimate.lower,
        "upper": estimate.upper,
        "tolerance": estimate.width(),
        "n": estimate.n,
        "bins": estimate.bins,
    }))
}

fn run_correlations(
    cfg: &ExperimentConfig,
    artifacts: &mut ArtifactWriter,
    defaults: &mut Vec<String>,
) -> Result<Value, RunError> {
    let f_spec = cfg.params.f.clone().unwrap_or_else(|| {
        defaults.push("f = x".into());
        "x".into()
    });
    let g_spec = cfg.params.g.clone().unwrap_or_else(|| {
        defaults.push("g = x".into());
        "x".into()
    });
    let f = parse_observable(&f_spec, "f")?;
    let g = parse_observable(&g_spec, "g")?;
    let max_lag = defaulted(cfg.params.max_lag, "max_lag", 16, defaults);

    // The reference measure: Lebesgue, or the Gibbs measure of the
    // configured potential on an Ulam grid.
    let masses = match &cfg.potential {
        None => None,
        Some(phi) => {
            let bins = defaulted(cfg.params.bins, "bins", 4096, defaults);
            let model = fit_gibbs(&cfg.map, phi, bins)?;
            Some(model.mu_weights())
        }
    };

    let estimator = match cfg.params.estimator.as_deref() {
        None => {
            let pick = if cfg.map.name() == "doubling" && masses.is_none()
            {
                Estimator::ExactDyadic
            } else {
                Estimator::Quadrature
            };
            defaults.push(format!("estimator = {}", pick.label()));
            pick
        }
        Some("exact") | Some("exact_dyadic") => Estimator::ExactDyadic,
        Some("quadrature") => Estimator::Quadrature,
        Some("monte_carlo") => {
            let samples = defaulted(
                cfg.params.samples,
                "samples",
                65536u64,
                defaults,
            ) as usize;
            Estimator::MonteCarlo {
                samples,
                seed: cfg
                    .seed
                    .wrapping_add(lane::MONTE_CARLO * SEED_STRIDE),
            }
        }
        Some(other) => {
            return Err(RunError::Config(format!(
                "estimator must be exact, quadrature, or monte_carlo; \
                 got {other:?}"
            )));
        }
    };

    let series = correlation_series(
        &cfg.map,
        &f,
        &g,
        max_lag,
        masses.as_deref(),
        estimator,
    )?;
    artifacts
        .write("correlations.csv", &report::correlation_csv(&series))?;
    let profile = decay_profile(&series)?;
    Ok(json!({
        "estimator": estimator.label(),
        "f": f.describe(),
        "g": g.describe(),
        "max_lag": max_lag,
        "fit_rate": profile.fit_rate,
        "c_sum": finite_or_null(profile.c_sum),
        "usable_lags": profile.usable_lags,
        "noise_floor": series.noise_floor(),
    }))
}

fn run_return_times(
    cfg: &ExperimentConfig,
    artifacts: &mut ArtifactWriter,
    defaults: &mut Vec<String>,
) -> Result<Value, RunError> {
    let n_returns =
        defaulted(cfg.params.n_returns, "n_returns", 2000, defaults);
    let max_steps = defaulted(
        cfg.params.max_steps,
        "max_steps",
        RETURN_STEP_CAP,
        defaults,
    );
    let restart_on_cap =
        defaulted(cfg.params.restarts, "restarts", true, defaults);

    let x = match cfg.params.x.as_deref() {
        None => {
            defaults.push("x = random in [1/2, 1)".into());
            uniform_return_start(
                &mut lane_rng(cfg.seed, lane::PRIMARY_START),
                cfg.precision_bits,
            )
        }
        Some("random") => uniform_return_start(
            &mut lane_rng(cfg.seed, lane::PRIMARY_START),
            cfg.precision_bits,
        ),
        spec => {
            let x = parse_start(spec, cfg, cfg.precision_bits,
                lane::PRIMARY_START, "x", defaults)?;
            if !x.fixed().ge_half() {
                return Err(RunError::Config(format!(
                    "return-time starts must lie in the base [1/2, 1); \
                     got {}",
                    x.to_f64()
                )));
            }
            x
        }
    };

    let mut restart_rng = lane_rng(cfg.seed, lane::RESTARTS);
    let restarts =
        if restart_on_cap { Some(&mut restart_rng) } else { None };
    let series =
        return_sequence(&cfg.map, &x, n_returns, max_steps, restarts)?;
    artifacts.write("returns.csv", &report::returns_csv(&series))?;
    let gamma = sum_growth_exponent(&series.partial_sums)?;
    Ok(json!({
        "estimator": "log-log least squares on return partial sums",
        "x_hex": x.to_hex(),
        "n_returns": n_returns,
        "max_steps": max_steps,
        "skipped_starts": series.skipped_starts,
        "sum_exponent": gamma,
    }))
}

fn run_dimension(
    cfg: &ExperimentConfig,
    artifacts: &mut ArtifactWriter,
    defaults: &mut Vec<String>,
) -> Result<Value, RunError> {
    let schedule = required_radius(cfg)?;
    // The ambient interval caps every dimension at 1.
    let cap = 1.0;
    defaults.push("cap = 1".into());
    let n_check =
        defaulted(cfg.params.n_check, "n_check", 4096u64, defaults);
    let result = dimension_formula(schedule, cap, n_check as usize)?;
    let method = match result.method {
        Method::Closed => "closed",
        Method::Fitted => "fitted",
    };
    artifacts.write(
        "dimension.csv",
        &format!(
            "s,unclipped,method\n{},{},{method}\n",
            result.value, result.unclipped
        ),
    )?;
    Ok(json!({
        "estimator": "radius decay exponent, clipped to the ambient cap",
        "formula_s": result.value,
        "unclipped": finite_or_null(result.unclipped),
        "method": method,
        "cap": cap,
    }))
}

fn run_energy_scan(
    cfg: &ExperimentConfig,
    artifacts: &mut ArtifactWriter,
    defaults: &mut Vec<String>,
) -> Result<Value, RunError> {
    let schedule = required_radius(cfg)?;
    let s_grid = match &cfg.params.s_grid {
        Some(grid) => grid.clone(),
        None => {
            defaults.push("s_grid = 0.1..0.9 step 0.1".into());
            (1..=9).map(|k| k as f64 / 10.0).collect()
        }
    };
    let n_schedule = match &cfg.params.n_schedule {
        Some(schedule) => schedule.clone(),
        None => {
            defaults.push("n_schedule = 2^6..2^12".into());
            (6..=12).map(|k| 1u64 << k).collect()
        }
    };
    let rule = parse_window_rule(&cfg.params, defaults)?;
    let max_balls = defaulted(
        cfg.params.max_balls,
        "max_balls",
        DEFAULT_MAX_BALLS,
        defaults,
    );
    let longest = n_schedule.iter().copied().max().unwrap_or(0);
    let bits = orbit_bits(cfg, longest, defaults);
    let x = parse_start(
        cfg.params.x.as_deref(),
        cfg,
        bits,
        lane::PRIMARY_START,
        "x",
        defaults,
    )?;

    let scan = energy_scan(
        &cfg.map,
        &x,
        schedule,
        &s_grid,
        &n_schedule,
        rule,
        max_balls,
    )?;
    artifacts.write("energy.csv", &report::energy_csv(&scan))?;
    let verdicts: Vec<Value> = scan
        .verdicts
        .iter()
        .map(|v| {
            json!({
                "s": v.s,
                "slope": v.slope,
                "verdict": v.verdict.as_str(),
            })
        })
        .collect();
    Ok(json!({
        "estimator": "Riesz energy of finite stages, tail growth slope",
        "manifest": manifest(cfg, &x, rule.describe()),
        "verdicts": verdicts,
    }))
}

fn run_box_count(
    cfg: &ExperimentConfig,
    artifacts: &mut ArtifactWriter,
    defaults: &mut Vec<String>,
) -> Result<Value, RunError> {
    let schedule = required_radius(cfg)?;
    let n_balls =
        defaulted(cfg.params.n_balls, "n_balls", 1u64 << 16, defaults);
    let bits = orbit_bits(cfg, n_balls, defaults);
    let x = parse_start(
        cfg.params.x.as_deref(),
        cfg,
        bits,
        lane::PRIMARY_START,
        "x",
        defaults,
    )?;
    let k_start = defaulted(
        cfg.params.k_start,
        "k_start",
        (n_balls as f64).sqrt().ceil() as u64,
        defaults,
    );
    let levels = match &cfg.params.levels {
        Some(levels) => levels.clone(),
        None => {
            let levels = default_levels(n_balls);
            defaults.push(format!(
                "levels = {}..{}",
                levels.first().copied().unwrap_or_default(),
                levels.last().copied().unwrap_or_default()
            ));
            levels
        }
    };
    let count = box_counting_dimension(
        &cfg.map, &x, schedule, k_start, n_balls, &levels,
    )?;
    artifacts.write("boxcount.csv", &report::box_csv(&count.levels))?;
    Ok(json!({
        "estimator": "dyadic box counts, log2 slope over the fit window",
        "manifest": manifest(cfg, &x, format!("k_start = {k_start}")),
        "n_balls": n_balls,
        "slope": count.slope,
        "saturated": count.saturated,
        "window_levels": count
            .window
            .iter()
            .map(|&i| count.levels[i].level)
            .collect::<Vec<u32>>(),
    }))
}

fn run_s0(
    cfg: &ExperimentConfig,
    artifacts: &mut ArtifactWriter,
    defaults: &mut Vec<String>,
) -> Result<Value, RunError> {
    let Some(phi) = &cfg.potential else {
        return Err(RunError::Config(
            "s0 needs a [potential] section".into(),
        ));
    };
    let bins = defaulted(cfg.params.bins, "bins", 4096, defaults);
    let m_schedule = match &cfg.params.m_schedule {
        Some(schedule) => schedule.clone(),
        None => {
            defaults.push("m_schedule = 4, 8, 12, 16, 20".into());
            vec![4, 8, 12, 16, 20]
        }
    };
    let model = fit_gibbs(&cfg.map, phi, bins)?;
    let estimate =
        s0_estimate(&cfg.map, phi, model.pressure, &m_schedule)?;

    let mut csv = String::from("m,quotient,theta\n");
    for ((m, quotient), theta) in
        estimate.quotients.iter().zip(&estimate.thetas)
    {
        csv.push_str(&format!("{m},{quotient},{}\n", theta.value));
    }
    artifacts.write("s0.csv", &csv)?;

    let scaling = match cfg.params.s {
        None => Value::Null,
        Some(s) => {
            let samples = defaulted(
                cfg.params.samples,
                "samples",
                4096u64,
                defaults,
            ) as usize;
            let mut rng = lane_rng(cfg.seed, lane::SCALING);
            let check = ball_scaling_check(
                &model.mu_weights(),
                s,
                samples,
                &mut rng,
            )?;
            json!({
                "s": check.s,
                "c_s": check.c_s,
                "slope": check.slope,
                "verdict": check.verdict.as_str(),
            })
        }
    };

    Ok(json!({
        "estimator": "cylinder mass quotients at midpoints, best \
                      generation",
        "s0": estimate.value,
        "pressure": model.pressure,
        "h_bounds": [model.h_bounds.0, model.h_bounds.1],
        "quotients": estimate
            .quotients
            .iter()
            .map(|(m, q)| json!([m, q]))
            .collect::<Vec<Value>>(),
        "scaling": scaling,
    }))
}

fn run_intersect(
    cfg: &ExperimentConfig,
    artifacts: &mut ArtifactWriter,
    defaults: &mut Vec<String>,
) -> Result<Value, RunError> {
    let schedule = required_radius(cfg)?;
    let n_balls =
        defaulted(cfg.params.n_balls, "n_balls", 1u64 << 16, defaults);
    let bits = orbit_bits(cfg, n_balls, defaults);
    let x1 = parse_start(
        cfg.params.x.as_deref(),
        cfg,
        bits,
        lane::PRIMARY_START,
        "x",
        defaults,
    )?;
    let x2 = parse_start(
        cfg.params.x2.as_deref(),
        cfg,
        bits,
        lane::SECOND_START,
        "x2",
        defaults,
    )?;
    let k_start = defaulted(
        cfg.params.k_start,
        "k_start",
        (n_balls as f64).sqrt().ceil() as u64,
        defaults,
    );
    let levels = match &cfg.params.levels {
        Some(levels) => levels.clone(),
        None => {
            let levels = default_levels(n_balls);
            defaults.push(format!(
                "levels = {}..{}",
                levels.first().copied().unwrap_or_default(),
                levels.last().copied().unwrap_or_default()
            ));
            levels
        }
    };
    let count = intersection_experiment(
        &cfg.map, &x1, &x2, schedule, k_start, n_balls, &levels,
    )?;
    artifacts.write("intersect.csv", &report::box_csv(&count.levels))?;
    Ok(json!({
        "estimator": "dyadic box counts of the stage intersection",
        "x_hex": x1.to_hex(),
        "x2_hex": x2.to_hex(),
        "n_balls": n_balls,
        "slope": count.slope,
        "saturated": count.saturated,
    }))
}

/// The reproducibility manifest attached to orbit experiments.
fn manifest(
    cfg: &ExperimentConfig,
    x: &PrecisePoint,
    window: String,
) -> Value {
    json!({
        "map": cfg.map_label,
        "x_hex": x.to_hex(),
        "precision_bits": cfg.precision_bits,
        "radius": cfg.radius_label,
        "window": window,
        "seed": cfg.seed,
    })
}

fn finite_or_null(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

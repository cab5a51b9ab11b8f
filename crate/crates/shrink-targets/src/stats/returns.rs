//! First-return analysis on [1/2, 1) for neutral-fixed-point maps.
//!
//! The first return map S(x) = T^{R(x)}(x) induces a uniformly
//! expanding system on the base interval; the growth exponent of the
//! partial sums of return times separates integrable from heavy-tailed
//! return statistics. Orbits here run at a fixed mantissa width (no
//! per-step precision growth): an excursion near the neutral fixed
//! point can take millions of steps, so exact-orbit widths are out of
//! reach, and a fixed-width pseudo-orbit keeps every experiment
//! bit-reproducible while the return-time distribution is insensitive
//! to the shadowing error.

use super::StatsError;
use crate::fixed::{Fixed, PrecisePoint};
use crate::map::PartitionedMap;
use crate::rng::TaskRng;
use crate::target::dimension::least_squares_slope;

/// Step budget for a single excursion in exponent experiments.
pub const RETURN_STEP_CAP: u64 = 10_000_000;

/// Mantissa width for return-time pseudo-orbits.
pub const RETURN_ORBIT_BITS: u32 = 256;

/// Return times R_1..R_N off one orbit (restarted where excursions hit
/// the step cap), with their running sums.
#[derive(Debug, Clone)]
pub struct ReturnTimeSeries {
    pub base_interval: (f64, f64),
    pub times: Vec<u64>,
    pub partial_sums: Vec<u64>,
    /// Excursions abandoned at the step cap and replaced by a fresh
    /// start; zero when the whole series came from a single orbit.
    pub skipped_starts: u64,
}

/// A uniform draw from the base interval: 1/2 + u/2 with u uniform on
/// the width-`bits` grid of [0,1).
pub fn uniform_return_start(rng: &mut TaskRng, bits: u32) -> PrecisePoint {
    let u = rng.point(bits);
    let x = Fixed::from_f64(0.5, bits).add(&u.fixed().mul_f64(0.5));
    PrecisePoint::try_new(x).expect("1/2 + u/2 lies in [1/2, 1)")
}

fn in_base(x: &Fixed) -> bool {
    x.ge_half()
}

/// Smallest R >= 1 with T^R x in [1/2, 1), and the landing point.
///
/// The orbit runs at the width of `x`. An orbit that lands exactly on
/// the fixed point 0 never returns, so it reports the cap immediately
/// instead of spinning through the budget.
pub fn first_return(
    map: &PartitionedMap,
    x: &PrecisePoint,
    max_steps: u64,
) -> Result<(u64, PrecisePoint), StatsError> {
    if !in_base(x.fixed()) {
        return Err(StatsError::BadParameter(format!(
            "first_return needs a start in [1/2, 1), got {}",
            x.to_f64()
        )));
    }
    if max_steps == 0 {
        return Err(StatsError::BadParameter(
            "max_steps must be at least 1".into(),
        ));
    }
    let mut y = map.evaluate(x)?;
    for step in 1..=max_steps {
        if in_base(y.fixed()) {
            return Ok((step, y));
        }
        if y.fixed().is_zero() {
            break;
        }
        y = map.evaluate(&y)?;
    }
    Err(StatsError::CapExceeded { start: x.to_f64(), max_steps })
}

/// Runs the return map `n_returns` times from `x`.
///
/// With `restarts` supplied, an excursion that exhausts `max_steps` is
/// dropped and the orbit resumes from a fresh uniform start (the
/// skipped-start count is recorded); without it the cap propagates as
/// an error. Restart draws stop making progress when caps outnumber
/// returns four to one, and the last cap propagates.
pub fn return_sequence(
    map: &PartitionedMap,
    x: &PrecisePoint,
    n_returns: usize,
    max_steps: u64,
    mut restarts: Option<&mut TaskRng>,
) -> Result<ReturnTimeSeries, StatsError> {
    if n_returns == 0 {
        return Err(StatsError::BadParameter(
            "n_returns must be at least 1".into(),
        ));
    }
    let bits = x.bits();
    let mut times = Vec::with_capacity(n_returns);
    let mut partial_sums = Vec::with_capacity(n_returns);
    let mut total = 0u64;
    let mut skipped = 0u64;
    let mut current = x.clone();
    while times.len() < n_returns {
        match first_return(map, &current, max_steps) {
            Ok((r, landing)) => {
                total += r;
                times.push(r);
                partial_sums.push(total);
                current = landing;
            }
            Err(err @ StatsError::CapExceeded { .. }) => {
                let Some(rng) = restarts.as_deref_mut() else {
                    return Err(err);
                };
                skipped += 1;
                if skipped > 4 * n_returns as u64 {
                    return Err(err);
                }
                current = uniform_return_start(rng, bits);
            }
            Err(err) => return Err(err),
        }
    }
    Ok(ReturnTimeSeries {
        base_interval: (0.5, 1.0),
        times,
        partial_sums,
        skipped_starts: skipped,
    })
}

/// Growth exponent of S_n: least-squares slope of log S_n against
/// log n over the last decade n in [N/10, N].
pub fn sum_growth_exponent(partial_sums: &[u64]) -> Result<f64, StatsError> {
    let n = partial_sums.len();
    if n < 1000 {
        return Err(StatsError::BadParameter(format!(
            "the exponent fit needs at least 1000 returns, got {n}"
        )));
    }
    let lo = n / 10;
    let pts: Vec<(f64, f64)> = (lo..n)
        .map(|i| {
            let k = (i + 1) as f64;
            (k.ln(), (partial_sums[i] as f64).ln())
        })
        .collect();
    Ok(least_squares_slope(&pts))
}

/// Runs the return map under the standard step cap and fits the
/// partial-sum growth exponent.
pub fn return_sum_exponent(
    map: &PartitionedMap,
    x: &PrecisePoint,
    n_returns: usize,
    restarts: Option<&mut TaskRng>,
) -> Result<(ReturnTimeSeries, f64), StatsError> {
    let series =
        return_sequence(map, x, n_returns, RETURN_STEP_CAP, restarts)?;
    let gamma = sum_growth_exponent(&series.partial_sums)?;
    Ok((series, gamma))
}

//! Ulam discretization of the transfer operator.
//!
//! The grid is uniform: cells I_i = [i/k, (i+1)/k), i = 0..k. The
//! stored entry is
//!
//! ```text
//! A_ij = k * integral over I_i of w(y) 1{T(y) in I_j} dy
//! ```
//!
//! with weight w = 1 for the unweighted (Markov) operator and
//! w = e^{phi} |T'| for the weighted one. The unweighted matrix is the
//! classical row-stochastic Ulam chain, A_ij = |I_i cap T^{-1}I_j| / |I_i|.
//!
//! Why |T'| appears in the weighted entries: discretizing
//! (L_phi f)(x) = sum_{T(y)=x} e^{phi(y)} f(y) on cell averages turns
//! the preimage sum into integrals over T^{-1}(I_j), and the change of
//! variables back to y-space produces the Jacobian. Concretely, the
//! cell average of L_phi f over I_j is
//! (1/|I_j|) sum_i f_i * integral_{I_i cap T^{-1}I_j} e^{phi}|T'| dy,
//! which is [`UlamOperator::apply_function`] below. Dropping the
//! Jacobian would make the discrete L_0 1 row sums instead of preimage
//! counts and break every pressure identity.
//!
//! The same matrix drives both dual actions:
//! * functions (densities, L^n 1): f'_j = sum_i A_ij f_i,
//! * measures (conformal mass): v'_i = sum_j A_ij v_j,
//! so the conformal measure nu is a right eigenvector and the Gibbs
//! density h a left one, with the common eigenvalue e^{P(phi)}.

use rayon::prelude::*;

use crate::map::PartitionedMap;

use super::potential::Potential;
use super::ThermoError;

pub const POWER_TOL: f64 = 1e-12;
pub const POWER_CAP: u64 = 100_000;

#[derive(Debug, Clone)]
pub struct UlamOperator {
    bins: usize,
    weighted: bool,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

/// Piecewise-constant invariant density on the Ulam grid.
#[derive(Debug, Clone)]
pub struct InvariantDensity {
    /// Density value per cell; integrates to 1.
    pub values: Vec<f64>,
    /// max(sup h, 1/inf h): both-sided bound c_h^-1 < h < c_h.
    pub c_h: f64,
    pub iterations: u64,
    pub residual: f64,
}

impl UlamOperator {
    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn is_weighted(&self) -> bool {
        self.weighted
    }

    /// Function action (L_phi on cell averages): out_j = sum_i A_ij f_i.
    pub fn apply_function(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.bins);
        let mut out = vec![0.0; self.bins];
        for i in 0..self.bins {
            let fi = f[i];
            if fi == 0.0 {
                continue;
            }
            for e in self.row_ptr[i]..self.row_ptr[i + 1] {
                out[self.cols[e] as usize] += self.vals[e] * fi;
            }
        }
        out
    }

    /// Measure action (dual): out_i = sum_j A_ij v_j.
    pub fn apply_measure(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.bins);
        (0..self.bins)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .map(|e| self.vals[e] * v[self.cols[e] as usize])
                    .sum()
            })
            .collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.bins)
            .map(|i| self.vals[self.row_ptr[i]..self.row_ptr[i + 1]].iter().sum())
            .collect()
    }

    /// Dense row, mostly for tests and small-bin inspection.
    pub fn row(&self, i: usize) -> Vec<f64> {
        let mut r = vec![0.0; self.bins];
        for e in self.row_ptr[i]..self.row_ptr[i + 1] {
            r[self.cols[e] as usize] += self.vals[e];
        }
        r
    }
}

/// Assembles the Ulam matrix; `potential` absent gives the unweighted
/// row-stochastic chain, present gives the discretized L_phi with
/// weight e^{phi}|T'|.
pub fn ulam_matrix(
    map: &PartitionedMap,
    bins: usize,
    potential: Option<&Potential>,
) -> Result<UlamOperator, ThermoError> {
    if bins < 2 {
        return Err(ThermoError::BadParameter(format!(
            "need at least 2 bins, got {bins}"
        )));
    }
    if bins > (1 << 24) {
        return Err(ThermoError::BadParameter(format!(
            "{bins} bins would not fit memory"
        )));
    }
    if let Some(phi) = potential {
        phi.validate(map)?;
    }
    let k = bins as f64;
    let breakpoints =
        potential.map(|p| p.breakpoints()).unwrap_or_default();
    let rows: Vec<Vec<(u32, f64)>> = (0..bins)
        .into_par_iter()
        .map(|i| assemble_row(map, potential, &breakpoints, bins, i))
        .collect();
    let mut row_ptr = Vec::with_capacity(bins + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0);
    for row in &rows {
        for (j, v) in row {
            cols.push(*j);
            vals.push(*v * k);
        }
        row_ptr.push(cols.len());
    }
    Ok(UlamOperator {
        bins,
        weighted: potential.is_some(),
        row_ptr,
        cols,
        vals,
    })
}

/// Entries of row i before the k scaling: (j, integral of w over
/// I_i cap T^-1 I_j).
fn assemble_row(
    map: &PartitionedMap,
    potential: Option<&Potential>,
    breakpoints: &[f64],
    bins: usize,
    i: usize,
) -> Vec<(u32, f64)> {
    let k = bins as f64;
    let cell = (i as f64 / k, (i + 1) as f64 / k);
    let mut entries: Vec<(u32, f64)> = Vec::new();
    for (b, branch) in map.branches().iter().enumerate() {
        let lo = cell.0.max(branch.domain.0);
        let hi = cell.1.min(branch.domain.1);
        if hi <= lo {
            continue;
        }
        // Monotone image of the piece, clamped against f64 spill.
        let (ya, yb) = (branch.formula.eval_f64(lo), branch.formula.eval_f64(hi));
        let (ylo, yhi) = if ya <= yb { (ya, yb) } else { (yb, ya) };
        let (ylo, yhi) = (ylo.max(0.0), yhi.min(1.0));
        if yhi <= ylo {
            continue;
        }
        let j_lo = (ylo * k).floor() as usize;
        let j_hi = (((yhi * k).ceil() as usize).max(j_lo + 1) - 1).min(bins - 1);
        for j in j_lo..=j_hi {
            let tlo = ylo.max(j as f64 / k);
            let thi = yhi.min((j + 1) as f64 / k);
            if thi <= tlo {
                continue;
            }
            // Preimage subinterval inside [lo, hi].
            let (Some(x0), Some(x1)) =
                (map.inverse_in_branch(b, tlo), map.inverse_in_branch(b, thi))
            else {
                continue;
            };
            let (x0, x1) = if x0 <= x1 { (x0, x1) } else { (x1, x0) };
            let (x0, x1) = (x0.max(lo), x1.min(hi));
            if x1 <= x0 {
                continue;
            }
            let w = match potential {
                None => x1 - x0,
                Some(phi) => {
                    integrate_weight(map, phi, breakpoints, b, x0, x1)
                }
            };
            if w != 0.0 {
                entries.push((j as u32, w));
            }
        }
    }
    entries
}

/// integral over [x0, x1] of e^{phi(y)} |T'(y)| dy on branch b, split
/// at potential breakpoints so piecewise-constant phi is exact.
fn integrate_weight(
    map: &PartitionedMap,
    phi: &Potential,
    breakpoints: &[f64],
    b: usize,
    x0: f64,
    x1: f64,
) -> f64 {
    let mut total = 0.0;
    let mut seg_lo = x0;
    for &cut in breakpoints {
        if cut > seg_lo && cut < x1 {
            total += gauss8(map, phi, b, seg_lo, cut);
            seg_lo = cut;
        }
    }
    total + gauss8(map, phi, b, seg_lo, x1)
}

/// 8-point Gauss-Legendre on [lo, hi]; exact for the affine builtins
/// with piecewise-constant phi, ~1e-14 for smooth expressions.
fn gauss8(
    map: &PartitionedMap,
    phi: &Potential,
    b: usize,
    lo: f64,
    hi: f64,
) -> f64 {
    const NODES: [f64; 8] = [
        -0.960_289_856_497_536_2,
        -0.796_666_477_413_626_7,
        -0.525_532_409_916_329_0,
        -0.183_434_642_495_649_8,
        0.183_434_642_495_649_8,
        0.525_532_409_916_329_0,
        0.796_666_477_413_626_7,
        0.960_289_856_497_536_2,
    ];
    const WEIGHTS: [f64; 8] = [
        0.101_228_536_290_376_26,
        0.222_381_034_453_374_47,
        0.313_706_645_877_887_3,
        0.362_683_783_378_362,
        0.362_683_783_378_362,
        0.313_706_645_877_887_3,
        0.222_381_034_453_374_47,
        0.101_228_536_290_376_26,
    ];
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let branch = &map.branches()[b];
    let mut sum = 0.0;
    for (n, w) in NODES.iter().zip(WEIGHTS) {
        let y = mid + half * n;
        let deriv = branch.derivative.eval_f64(y).abs();
        sum += w * phi.eval_on_branch(map, b, y).exp() * deriv;
    }
    sum * half
}

/// Shared nonnegative power iteration. `apply` must preserve
/// nonnegativity; vectors are L1-normalized against `norm_weights`
/// (sum of v_i * norm_weights_i == 1).
pub(super) fn power_iterate(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    dim: usize,
    norm_weights: Option<&[f64]>,
) -> Result<(Vec<f64>, f64, u64, f64), ThermoError> {
    let weight = |v: &[f64], i: usize| match norm_weights {
        Some(w) => v[i] * w[i],
        None => v[i],
    };
    let mass = |v: &[f64]| (0..dim).map(|i| weight(v, i)).sum::<f64>();
    let mut v = vec![1.0; dim];
    let m = mass(&v);
    for x in &mut v {
        *x /= m;
    }
    for it in 1..=POWER_CAP {
        let mut next = apply(&v);
        for x in &mut next {
            // Rounding may push a zero entry slightly negative.
            if *x < 0.0 {
                *x = 0.0;
            }
        }
        let m = mass(&next);
        if !(m.is_finite() && m > 0.0) {
            return Err(ThermoError::NoConvergence {
                iterations: it,
                residual: f64::INFINITY,
            });
        }
        for x in &mut next {
            *x /= m;
        }
        let residual: f64 = (0..dim)
            .map(|i| (weight(&next, i) - weight(&v, i)).abs())
            .sum();
        v = next;
        if residual <= POWER_TOL {
            return Ok((v, m, it, residual));
        }
    }
    Err(ThermoError::NoConvergence {
        iterations: POWER_CAP,
        residual: f64::NAN,
    })
}

/// Stationary density of the unweighted chain: the fixed function of
/// the Perron-Frobenius action, normalized to integrate to 1.
pub fn stationary_density(
    op: &UlamOperator,
) -> Result<InvariantDensity, ThermoError> {
    if op.is_weighted() {
        return Err(ThermoError::BadParameter(
            "stationary density is defined for the unweighted operator".into(),
        ));
    }
    let k = op.bins();
    let cell = vec![1.0 / k as f64; k];
    let (values, _eigen, iterations, residual) =
        power_iterate(|f| op.apply_function(f), k, Some(&cell))?;
    // values currently integrate to 1 via the cell weights; express as
    // density per cell.
    let sup = values.iter().cloned().fold(f64::MIN, f64::max);
    let inf = values.iter().cloned().fold(f64::MAX, f64::min);
    let c_h = if inf > 0.0 { sup.max(1.0 / inf) } else { f64::INFINITY };
    Ok(InvariantDensity { values, c_h, iterations, residual })
}

impl InvariantDensity {
    /// L1 distance to another density on the same grid.
    pub fn l1_distance(&self, other: &[f64]) -> f64 {
        assert_eq!(self.values.len(), other.len());
        let k = self.values.len() as f64;
        self.values
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b).abs() / k)
            .sum()
    }
}

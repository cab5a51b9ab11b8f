//! Observables of bounded variation.
//!
//! An observable is a piecewise closed-form function on [0,1). Its total
//! variation is the sum of the per-piece variations (sampled increments
//! on a fine grid, exact for monotone pieces) plus the jump sizes at the
//! interior breakpoints. The combined norm pairs that variation with an
//! L1 norm against a reference measure, the shape every correlation
//! bound in this crate consumes.

use super::StatsError;
use crate::expr::Expr;

/// Increments sampled per piece when measuring variation; pieces are
/// closed-form and piecewise monotone in practice, where sampling is
/// exact once the grid separates the monotonicity intervals.
const VAR_SAMPLES: usize = 4096;

/// Midpoints per piece (Lebesgue) or per cell (weighted) for L1 norms.
const L1_SAMPLES: usize = 4096;

#[derive(Debug, Clone)]
struct Piece {
    lo: f64,
    hi: f64,
    expr: Expr,
    src: String,
}

/// A piecewise formula on [0,1) with precomputed variation and
/// Lebesgue L1 norm.
#[derive(Debug, Clone)]
pub struct BVObservable {
    pieces: Vec<Piece>,
    variation: f64,
    l1_norm: f64,
}

impl BVObservable {
    /// Builds an observable from `(lo, hi, formula)` pieces that must
    /// tile [0,1) in order.
    pub fn piecewise(pieces: &[(f64, f64, &str)]) -> Result<Self, StatsError> {
        if pieces.is_empty() {
            return Err(StatsError::BadParameter("no pieces given".into()));
        }
        if pieces[0].0 != 0.0 || pieces[pieces.len() - 1].1 != 1.0 {
            return Err(StatsError::BadParameter(
                "pieces must start at 0 and end at 1".into(),
            ));
        }
        let mut parsed = Vec::with_capacity(pieces.len());
        for (i, &(lo, hi, src)) in pieces.iter().enumerate() {
            if !(lo < hi) {
                return Err(StatsError::BadParameter(format!(
                    "piece {i} domain [{lo}, {hi}) is empty"
                )));
            }
            if i > 0 && pieces[i - 1].1 != lo {
                return Err(StatsError::BadParameter(format!(
                    "gap or overlap between pieces at {} vs {lo}",
                    pieces[i - 1].1
                )));
            }
            parsed.push(Piece {
                lo,
                hi,
                expr: Expr::parse(src)?,
                src: src.to_string(),
            });
        }
        let variation = total_variation(&parsed)?;
        let l1_norm = lebesgue_l1(&parsed);
        Ok(BVObservable { pieces: parsed, variation, l1_norm })
    }

    /// Single-formula observable on all of [0,1).
    pub fn formula(src: &str) -> Result<Self, StatsError> {
        BVObservable::piecewise(&[(0.0, 1.0, src)])
    }

    /// The indicator of [lo, hi).
    pub fn indicator(lo: f64, hi: f64) -> Result<Self, StatsError> {
        if !(0.0..1.0).contains(&lo) || hi <= lo || hi > 1.0 {
            return Err(StatsError::BadParameter(format!(
                "indicator needs 0 <= lo < hi <= 1, got [{lo}, {hi})"
            )));
        }
        let mut pieces: Vec<(f64, f64, &str)> = Vec::new();
        if lo > 0.0 {
            pieces.push((0.0, lo, "0"));
        }
        pieces.push((lo, hi, "1"));
        if hi < 1.0 {
            pieces.push((hi, 1.0, "0"));
        }
        BVObservable::piecewise(&pieces)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = self
            .pieces
            .iter()
            .rposition(|p| x >= p.lo)
            .unwrap_or(0);
        self.pieces[i].expr.eval_f64(x)
    }

    /// Total variation over [0,1).
    pub fn variation(&self) -> f64 {
        self.variation
    }

    /// Lebesgue L1 norm, fixed at construction.
    pub fn l1_norm(&self) -> f64 {
        self.l1_norm
    }

    /// Piece boundaries and parsed formulas, ascending.
    pub(crate) fn piece_exprs(&self) -> impl Iterator<Item = (f64, f64, &Expr)> {
        self.pieces.iter().map(|p| (p.lo, p.hi, &p.expr))
    }

    /// Source text of each piece, for error messages and run manifests.
    pub fn describe(&self) -> String {
        self.pieces
            .iter()
            .map(|p| format!("[{}, {}) {}", p.lo, p.hi, p.src))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

fn total_variation(pieces: &[Piece]) -> Result<f64, StatsError> {
    let mut var = 0.0f64;
    for p in pieces {
        let mut prev = f64::NAN;
        for j in 0..=VAR_SAMPLES {
            let t = p.lo + (p.hi - p.lo) * j as f64 / VAR_SAMPLES as f64;
            let v = p.expr.eval_f64(t);
            if !v.is_finite() {
                return Err(StatsError::VariationUnbounded(t));
            }
            if j > 0 {
                var += (v - prev).abs();
            }
            prev = v;
        }
    }
    for w in pieces.windows(2) {
        let left = w[0].expr.eval_f64(w[0].hi);
        let right = w[1].expr.eval_f64(w[1].lo);
        var += (right - left).abs();
    }
    if !var.is_finite() {
        return Err(StatsError::VariationUnbounded(f64::NAN));
    }
    Ok(var)
}

fn lebesgue_l1(pieces: &[Piece]) -> f64 {
    let mut total = 0.0;
    for p in pieces {
        let w = p.hi - p.lo;
        let mut acc = 0.0;
        for j in 0..L1_SAMPLES {
            let t = p.lo + w * (j as f64 + 0.5) / L1_SAMPLES as f64;
            acc += p.expr.eval_f64(t).abs();
        }
        total += acc * w / L1_SAMPLES as f64;
    }
    total
}

/// L1 norm, variation, and their sum, the norm the correlation bounds
/// use. `masses` supplies cell masses of the reference measure on a
/// uniform grid; None means Lebesgue.
pub fn bv_norm(
    g: &BVObservable,
    masses: Option<&[f64]>,
) -> Result<(f64, f64, f64), StatsError> {
    let l1 = match masses {
        None => g.l1_norm,
        Some(m) => {
            if m.is_empty() || m.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(StatsError::BadParameter(
                    "cell masses must be finite and nonnegative".into(),
                ));
            }
            let total: f64 = m.iter().sum();
            if total <= 0.0 {
                return Err(StatsError::BadParameter(
                    "cell masses sum to zero".into(),
                ));
            }
            let k = m.len();
            let per_cell = (L1_SAMPLES / k).max(8);
            let mut acc = 0.0;
            for (i, mass) in m.iter().enumerate() {
                let lo = i as f64 / k as f64;
                let hi = (i + 1) as f64 / k as f64;
                let mut cell = 0.0;
                for j in 0..per_cell {
                    let t = lo + (hi - lo) * (j as f64 + 0.5) / per_cell as f64;
                    cell += g.eval(t).abs();
                }
                acc += cell / per_cell as f64 * mass / total;
            }
            acc
        }
    };
    Ok((l1, g.variation, l1 + g.variation))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_indicator_norms() {
        let g = BVObservable::indicator(0.0, 0.5).unwrap();
        let (l1, var, combined) = bv_norm(&g, None).unwrap();
        assert!((l1 - 0.5).abs() < 1e-12);
        assert_eq!(var, 1.0);
        assert!((combined - 1.5).abs() < 1e-12);
    }

    #[test]
    fn identity_norms() {
        let g = BVObservable::formula("x").unwrap();
        let (l1, var, combined) = bv_norm(&g, None).unwrap();
        assert!((l1 - 0.5).abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-12);
        assert!((combined - 1.5).abs() < 1e-12);
    }

    #[test]
    fn middle_indicator_jumps_twice() {
        let g = BVObservable::indicator(0.25, 0.75).unwrap();
        assert_eq!(g.variation(), 2.0);
        assert_eq!(g.eval(0.3), 1.0);
        assert_eq!(g.eval(0.8), 0.0);
        assert_eq!(g.eval(0.75), 0.0);
        assert_eq!(g.eval(0.25), 1.0);
    }

    #[test]
    fn oscillating_piece_accumulates_variation() {
        // x(1-x) rises to 1/4 and falls back: variation 1/2.
        let g = BVObservable::formula("x * (1 - x)").unwrap();
        assert!((g.variation() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn diverging_piece_is_rejected() {
        let err = BVObservable::formula("1 / x").unwrap_err();
        assert_eq!(err.slug(), "variation-unbounded");
    }

    #[test]
    fn tiling_is_validated() {
        assert!(BVObservable::piecewise(&[(0.1, 1.0, "x")]).is_err());
        assert!(BVObservable::piecewise(&[(0.0, 0.4, "x"), (0.5, 1.0, "x")])
            .is_err());
        assert!(BVObservable::piecewise(&[(0.0, 0.5, "x")]).is_err());
    }

    #[test]
    fn weighted_l1_reweights_cells() {
        // All mass on [0, 1/2): |x| integrates to 1/4 there, times density 2.
        let g = BVObservable::formula("x").unwrap();
        let masses = [0.5, 0.5, 0.0, 0.0];
        let (l1, _, _) = bv_norm(&g, Some(&masses)).unwrap();
        assert!((l1 - 0.25).abs() < 1e-10, "got {l1}");
    }
}

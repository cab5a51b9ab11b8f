//! Potentials phi for the transfer operator.
//!
//! A potential is a bounded function on [0,1) whose exponential has
//! bounded variation. The variants cover everything the experiments
//! need: the zero potential (topological entropy), multiples of
//! -log|T'| (geometric potentials and invariant densities), per-branch
//! log-weights (Bernoulli-type Gibbs states), explicit piecewise
//! expressions, and constant shifts for pressure identities.

use crate::expr::Expr;
use crate::map::PartitionedMap;

use super::ThermoError;

#[derive(Debug, Clone)]
pub enum Potential {
    /// phi identically 0.
    Zero,
    /// phi = -scale * log|T'|; scale 1 is the geometric potential whose
    /// equilibrium state is the absolutely continuous one.
    NegLogDeriv { scale: f64 },
    /// phi = log weights[b] on branch b. With positive weights summing
    /// to 1 on a full shift this is the Bernoulli measure's potential
    /// and has pressure 0.
    Bernoulli { weights: Vec<f64> },
    /// Explicit pieces (lo, hi, formula) tiling [0,1). Pieces may cut
    /// across branch boundaries; integrators split at both.
    Piecewise(Vec<PotentialPiece>),
    /// base + offset, for identities like P(phi + c) = P(phi) + c.
    Shifted { base: Box<Potential>, offset: f64 },
}

#[derive(Debug, Clone)]
pub struct PotentialPiece {
    pub lo: f64,
    pub hi: f64,
    pub formula: Expr,
    pub src: String,
}

impl Potential {
    pub fn piecewise(pieces: &[(f64, f64, &str)]) -> Result<Potential, ThermoError> {
        let mut built = Vec::with_capacity(pieces.len());
        for (lo, hi, src) in pieces {
            let formula = Expr::parse(src)?;
            built.push(PotentialPiece {
                lo: *lo,
                hi: *hi,
                formula,
                src: (*src).to_string(),
            });
        }
        let p = Potential::Piecewise(built);
        p.validate_pieces()?;
        Ok(p)
    }

    pub fn shifted(self, offset: f64) -> Potential {
        Potential::Shifted { base: Box::new(self), offset }
    }

    /// Checks the variant against a concrete map (weight counts,
    /// finiteness on a sample grid).
    pub fn validate(&self, map: &PartitionedMap) -> Result<(), ThermoError> {
        match self {
            Potential::Zero => Ok(()),
            Potential::NegLogDeriv { scale } => {
                if !scale.is_finite() {
                    return Err(ThermoError::BadParameter(
                        "derivative-potential scale must be finite".into(),
                    ));
                }
                Ok(())
            }
            Potential::Bernoulli { weights } => {
                if weights.len() != map.branch_count() {
                    return Err(ThermoError::BadParameter(format!(
                        "{} branch weights for a map with {} branches",
                        weights.len(),
                        map.branch_count()
                    )));
                }
                if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
                    return Err(ThermoError::BadParameter(
                        "branch weights must be positive".into(),
                    ));
                }
                Ok(())
            }
            Potential::Piecewise(_) => {
                self.validate_pieces()?;
                // Boundedness on a sample grid; the grammar cannot
                // produce non-rectifiable pieces, only poles.
                for i in 0..=4096 {
                    let x = i as f64 / 4096.0;
                    let v = self.eval(map, x.min(1.0 - 1e-12));
                    if !v.is_finite() {
                        return Err(ThermoError::BadParameter(format!(
                            "potential unbounded near x = {x}"
                        )));
                    }
                }
                Ok(())
            }
            Potential::Shifted { base, offset } => {
                if !offset.is_finite() {
                    return Err(ThermoError::BadParameter(
                        "potential shift must be finite".into(),
                    ));
                }
                base.validate(map)
            }
        }
    }

    fn validate_pieces(&self) -> Result<(), ThermoError> {
        let Potential::Piecewise(pieces) = self else { return Ok(()) };
        if pieces.is_empty() {
            return Err(ThermoError::BadParameter(
                "piecewise potential needs at least one piece".into(),
            ));
        }
        let mut edge = 0.0;
        for p in pieces {
            if (p.lo - edge).abs() > 1e-12 || p.hi <= p.lo {
                return Err(ThermoError::BadParameter(format!(
                    "potential pieces must tile [0,1): gap or overlap at {}",
                    p.lo
                )));
            }
            edge = p.hi;
        }
        if (edge - 1.0).abs() > 1e-12 {
            return Err(ThermoError::BadParameter(
                "potential pieces must end at 1".into(),
            ));
        }
        Ok(())
    }

    /// phi(x), resolving the branch from x.
    pub fn eval(&self, map: &PartitionedMap, x: f64) -> f64 {
        self.eval_on_branch(map, map.branch_index_f64(x), x)
    }

    /// phi(x) for x known to lie on branch `j` (lets integrators keep
    /// the branch fixed at cell boundaries).
    pub fn eval_on_branch(&self, map: &PartitionedMap, j: usize, x: f64) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::NegLogDeriv { scale } => {
                let d = map.branches()[j].derivative.eval_f64(x).abs();
                -scale * d.ln()
            }
            Potential::Bernoulli { weights } => weights[j].ln(),
            Potential::Piecewise(pieces) => {
                let i = pieces
                    .iter()
                    .rposition(|p| x >= p.lo)
                    .unwrap_or(0);
                pieces[i].formula.eval_f64(x)
            }
            Potential::Shifted { base, offset } => {
                base.eval_on_branch(map, j, x) + offset
            }
        }
    }

    /// Interior breakpoints where phi may jump; integrators split
    /// integration intervals here so piecewise-constant potentials
    /// integrate exactly.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Potential::Piecewise(pieces) => pieces
                .iter()
                .skip(1)
                .map(|p| p.lo)
                .filter(|lo| *lo > 0.0 && *lo < 1.0)
                .collect(),
            Potential::Shifted { base, .. } => base.breakpoints(),
            _ => Vec::new(),
        }
    }

    /// Birkhoff sum S_n phi(x) along the f64 orbit of x.
    pub fn birkhoff(&self, map: &PartitionedMap, x: f64, n: u64) -> f64 {
        let mut y = x;
        let mut total = 0.0;
        for _ in 0..n {
            total += self.eval(map, y);
            y = map.evaluate_f64(y);
        }
        total
    }
}

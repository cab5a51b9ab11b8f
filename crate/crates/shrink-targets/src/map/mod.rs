//! Piecewise expanding maps of [0,1).
//!
//! A map is a finite partition of [0,1) into half-open intervals, each
//! carrying a monotone formula. Four builtins cover standard examples
//! and get exact evaluation paths; arbitrary maps come in as parsed
//! branch formulas.
//!
//! Exactness contract: for the builtins, [`PartitionedMap::evaluate`] is
//! the true map of the exactly-represented parameters. `beta_map(b)` is
//! b*x mod 1 for the dyadic rational b actually denoted by the `f64`
//! argument, computed with one floor truncation at the working width.
//! Branch membership near an irrational breakpoint j/b is decided by the
//! exact product, never by the `f64` shadow of the breakpoint, so orbits
//! cannot be misrouted in the one-ulp sliver around it. The declared
//! branch endpoints in [`Branch::domain`] are `f64` and serve geometry
//! consumers (bin overlap, cylinder pullbacks) whose own resolution is
//! far coarser.

use crate::expr::{Expr, ExprError};
use crate::fixed::{Fixed, FixedError, PrecisePoint};
use std::collections::BTreeMap;
use std::sync::Mutex;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MapError {
    #[error(
        "insufficient precision: {steps} steps of this map need {required} \
         bits, the point carries {available}"
    )]
    InsufficientPrecision { steps: u64, required: u32, available: u32 },
    #[error("branch {branch} formula left [0,1): T({x}) = {value}")]
    FormulaOutOfRange { branch: usize, x: f64, value: f64 },
    #[error("bad map parameter: {0}")]
    BadParameter(String),
    #[error("bad partition: {0}")]
    BadPartition(String),
    #[error("x = {x} is a branch endpoint; the derivative is one-sided there")]
    AtPartitionPoint { x: f64 },
    #[error("orbit lands exactly on a branch endpoint at step {step} (x = {x})")]
    HitsDiscontinuity { step: u64, x: f64 },
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Fixed(#[from] FixedError),
}

impl MapError {
    /// Stable machine-readable tag for CLI reports.
    pub fn slug(&self) -> &'static str {
        match self {
            MapError::InsufficientPrecision { .. } => "insufficient-precision",
            MapError::FormulaOutOfRange { .. } => "formula-out-of-range",
            MapError::BadParameter(_) => "bad-parameter",
            MapError::BadPartition(_) => "bad-partition",
            MapError::AtPartitionPoint { .. } => "at-partition-point",
            MapError::HitsDiscontinuity { .. } => "hits-discontinuity",
            MapError::Expr(_) => "formula-error",
            MapError::Fixed(_) => "arithmetic-error",
        }
    }
}

/// One monotone piece of the map, as geometry consumers see it.
#[derive(Debug)]
pub struct Branch {
    /// Half-open domain [lo, hi).
    pub domain: (f64, f64),
    pub formula: Expr,
    pub formula_src: String,
    pub derivative: Expr,
    pub derivative_src: String,
    pub increasing: bool,
}

#[derive(Debug)]
enum Kind {
    Doubling,
    /// b*x mod 1 for non-integer or integer b > 1.
    Beta(f64),
    /// k full affine branches, the k-ary shift.
    BernoulliMarkov(u32),
    /// x + 2^(b-1) x^b on [0,1/2), 2x-1 on [1/2,1); indifferent at 0.
    MannevillePomeau(f64),
    Custom,
}

#[derive(Debug)]
pub struct PartitionedMap {
    kind: Kind,
    name: String,
    branches: Vec<Branch>,
    expansion_sup: f64,
    /// Per-width cache of the Manneville-Pomeau coefficient 2^(b-1).
    mp_coeff: Mutex<BTreeMap<u32, Fixed>>,
}

/// Input form of a custom branch before validation.
pub struct BranchSpec {
    pub domain: (f64, f64),
    pub formula: String,
    pub derivative: String,
}

impl PartitionedMap {
    pub fn doubling() -> Self {
        let branches = vec![
            affine_branch((0.0, 0.5), 2.0, 0.0),
            affine_branch((0.5, 1.0), 2.0, -1.0),
        ];
        PartitionedMap {
            kind: Kind::Doubling,
            name: "doubling".into(),
            branches,
            expansion_sup: 2.0,
            mp_coeff: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn beta_map(beta: f64) -> Result<Self, MapError> {
        if !beta.is_finite() || beta <= 1.0 {
            return Err(MapError::BadParameter(format!(
                "beta map needs beta > 1, got {beta}"
            )));
        }
        let count = beta.ceil() as usize;
        let mut branches = Vec::with_capacity(count);
        for j in 0..count {
            let lo = j as f64 / beta;
            let hi = (((j + 1) as f64) / beta).min(1.0);
            branches.push(affine_branch((lo, hi), beta, -(j as f64)));
        }
        Ok(PartitionedMap {
            kind: Kind::Beta(beta),
            name: format!("beta({beta})"),
            branches,
            expansion_sup: beta,
            mp_coeff: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn bernoulli_markov(k: u32) -> Result<Self, MapError> {
        if k < 2 {
            return Err(MapError::BadParameter(format!(
                "bernoulli_markov needs k >= 2 branches, got {k}"
            )));
        }
        let branches = (0..k)
            .map(|j| {
                let lo = j as f64 / k as f64;
                let hi = (j + 1) as f64 / k as f64;
                affine_branch((lo, hi), k as f64, -(j as f64))
            })
            .collect();
        Ok(PartitionedMap {
            kind: Kind::BernoulliMarkov(k),
            name: format!("bernoulli_markov({k})"),
            branches,
            expansion_sup: k as f64,
            mp_coeff: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn manneville_pomeau(beta: f64) -> Result<Self, MapError> {
        if !beta.is_finite() || beta <= 1.0 {
            return Err(MapError::BadParameter(format!(
                "manneville_pomeau needs beta > 1, got {beta}"
            )));
        }
        let c = 2f64.powf(beta - 1.0);
        let left = BranchSpec {
            domain: (0.0, 0.5),
            formula: format!("x + {c}*x^{beta}"),
            derivative: format!("1 + {}*x^{}", c * beta, beta - 1.0),
        };
        let right = BranchSpec {
            domain: (0.5, 1.0),
            formula: "2*x - 1".into(),
            derivative: "2".into(),
        };
        let branches = vec![parse_branch(&left, 0)?, parse_branch(&right, 1)?];
        Ok(PartitionedMap {
            kind: Kind::MannevillePomeau(beta),
            name: format!("manneville_pomeau({beta})"),
            branches,
            expansion_sup: 1.0 + beta,
            mp_coeff: Mutex::new(BTreeMap::new()),
        })
    }

    /// Builds a map from user formulas. The domains must tile [0,1)
    /// exactly, each formula must stay inside [0,1) on its domain, and
    /// each piece must be monotone with |T'| >= 1.
    pub fn from_branches(specs: &[BranchSpec]) -> Result<Self, MapError> {
        if specs.is_empty() {
            return Err(MapError::BadPartition("no branches given".into()));
        }
        let mut branches = Vec::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            branches.push(parse_branch(spec, i)?);
        }
        if branches[0].domain.0 != 0.0 {
            return Err(MapError::BadPartition(
                "first branch must start at 0".into(),
            ));
        }
        if branches.last().unwrap().domain.1 != 1.0 {
            return Err(MapError::BadPartition(
                "last branch must end at 1".into(),
            ));
        }
        for w in branches.windows(2) {
            if w[0].domain.1 != w[1].domain.0 {
                return Err(MapError::BadPartition(format!(
                    "gap or overlap between branches at {} vs {}",
                    w[0].domain.1, w[1].domain.0
                )));
            }
        }
        let mut sup: f64 = 0.0;
        for (i, b) in branches.iter().enumerate() {
            let (lo, hi) = b.domain;
            if !(lo < hi) {
                return Err(MapError::BadPartition(format!(
                    "branch {i} domain [{lo}, {hi}) is empty"
                )));
            }
            let mut min_abs = f64::INFINITY;
            let mut max_abs: f64 = 0.0;
            let mut sign = 0.0;
            for s in 0..SUP_SAMPLES {
                let t = lo + (hi - lo) * (s as f64 + 0.5) / SUP_SAMPLES as f64;
                let v = b.formula.eval_f64(t);
                if !(0.0..1.0).contains(&v) {
                    return Err(MapError::FormulaOutOfRange {
                        branch: i,
                        x: t,
                        value: v,
                    });
                }
                let d = b.derivative.eval_f64(t);
                if !d.is_finite() || d == 0.0 {
                    return Err(MapError::BadPartition(format!(
                        "branch {i} derivative is {d} at x = {t}"
                    )));
                }
                if sign == 0.0 {
                    sign = d.signum();
                } else if sign != d.signum() {
                    return Err(MapError::BadPartition(format!(
                        "branch {i} derivative changes sign"
                    )));
                }
                min_abs = min_abs.min(d.abs());
                max_abs = max_abs.max(d.abs());
            }
            if min_abs < 1.0 - 1e-9 {
                return Err(MapError::BadParameter(format!(
                    "branch {i} is not expanding: |T'| falls to {min_abs}"
                )));
            }
            sup = sup.max(max_abs);
        }
        // Headroom because the sup came from sampling.
        let expansion_sup = sup * 1.05;
        Ok(PartitionedMap {
            kind: Kind::Custom,
            name: format!("custom({} branches)", branches.len()),
            branches,
            expansion_sup,
            mp_coeff: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    /// Upper bound on |T'| used by the orbit precision rule.
    pub fn expansion_sup(&self) -> f64 {
        self.expansion_sup
    }

    /// True when the map has a neutral fixed point (the precision rule
    /// still uses the global sup, which is then conservative).
    pub fn is_indifferent(&self) -> bool {
        matches!(self.kind, Kind::MannevillePomeau(_))
    }

    /// Interior partition points (branch boundaries), ascending.
    pub fn partition_points(&self) -> Vec<f64> {
        self.branches.iter().skip(1).map(|b| b.domain.0).collect()
    }

    /// Fractional width needed to trust the leading 64 bits of every
    /// point on an n-step orbit: each step multiplies truncation error
    /// by at most sup |T'| and adds one ulp.
    pub fn required_bits(&self, steps: u64) -> u32 {
        let growth = steps as f64 * self.expansion_sup.log2().max(0.0);
        (growth.ceil() as u64 + 64)
            .try_into()
            .expect("orbit length implies width beyond u32")
    }

    /// One exact step of the map.
    pub fn evaluate(&self, x: &PrecisePoint) -> Result<PrecisePoint, MapError> {
        match &self.kind {
            Kind::Doubling => Ok(PrecisePoint::wrap(x.fixed().mul_f64(2.0))),
            Kind::Beta(b) => Ok(PrecisePoint::wrap(x.fixed().mul_f64(*b))),
            Kind::BernoulliMarkov(k) => {
                Ok(PrecisePoint::wrap(x.fixed().mul_f64(*k as f64)))
            }
            Kind::MannevillePomeau(b) => {
                if !x.fixed().ge_half() {
                    let bits = x.bits();
                    let c = self.mp_coefficient(*b, bits);
                    // Excursions near the neutral point spend millions
                    // of consecutive steps on this branch, so the
                    // common integer exponents run on raw mantissas:
                    // the identical floor-per-multiply sequence as the
                    // generic path with half the temporaries.
                    let y = if *b == 2.0 || *b == 3.0 {
                        let mx = x.fixed().mantissa();
                        let mut p = (mx * mx) >> bits;
                        if *b == 3.0 {
                            p = (&p * mx) >> bits;
                        }
                        p = (c.mantissa() * &p) >> bits;
                        Fixed::from_mantissa(mx + p, bits)
                    } else {
                        let xp = x.fixed().pow_dyadic(*b)?;
                        x.fixed().add(&c.mul(&xp))
                    };
                    // x + 2^(b-1) x^b < 1 on [0,1/2) and truncation only
                    // rounds down, so the wrap never fires; it guards the
                    // type invariant.
                    Ok(PrecisePoint::wrap(y))
                } else {
                    Ok(PrecisePoint::wrap(x.fixed().mul_f64(2.0)))
                }
            }
            Kind::Custom => {
                let j = self.branch_index(x);
                let y = self.branches[j].formula.eval_fixed(x.fixed())?;
                PrecisePoint::try_new(y).map_err(|_| {
                    MapError::FormulaOutOfRange {
                        branch: j,
                        x: x.to_f64(),
                        value: self.branches[j].formula.eval_f64(x.to_f64()),
                    }
                })
            }
        }
    }

    /// f64 shadow of [`Self::evaluate`] for coarse geometry work.
    pub fn evaluate_f64(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Doubling => (2.0 * x).rem_euclid(1.0),
            Kind::Beta(b) => (b * x).rem_euclid(1.0),
            Kind::BernoulliMarkov(k) => (*k as f64 * x).rem_euclid(1.0),
            _ => {
                let j = self.branch_index_f64(x);
                self.branches[j].formula.eval_f64(x)
            }
        }
    }

    /// Index of the branch whose domain holds x, decided exactly.
    pub fn branch_index(&self, x: &PrecisePoint) -> usize {
        match &self.kind {
            Kind::Doubling | Kind::MannevillePomeau(_) => {
                usize::from(x.fixed().ge_half())
            }
            Kind::Beta(b) => {
                // floor(b*x) is exact in fixed point; the f64 domain
                // endpoints are only approximations of j/b.
                let j = x.fixed().mul_f64(*b).floor_i64();
                (j.max(0) as usize).min(self.branches.len() - 1)
            }
            Kind::BernoulliMarkov(k) => {
                let j = x.fixed().mul_f64(*k as f64).floor_i64();
                (j.max(0) as usize).min(self.branches.len() - 1)
            }
            Kind::Custom => {
                let bits = x.bits();
                for (i, b) in self.branches.iter().enumerate().rev() {
                    if *x.fixed() >= Fixed::from_f64(b.domain.0, bits) {
                        return i;
                    }
                }
                0
            }
        }
    }

    pub fn branch_index_f64(&self, x: f64) -> usize {
        match &self.kind {
            Kind::Doubling | Kind::MannevillePomeau(_) => usize::from(x >= 0.5),
            Kind::Beta(b) => {
                ((b * x).floor().max(0.0) as usize).min(self.branches.len() - 1)
            }
            Kind::BernoulliMarkov(k) => ((*k as f64 * x).floor().max(0.0)
                as usize)
                .min(self.branches.len() - 1),
            Kind::Custom => {
                match self
                    .branches
                    .binary_search_by(|b| b.domain.0.partial_cmp(&x).unwrap())
                {
                    Ok(i) => i,
                    Err(i) => i.saturating_sub(1),
                }
            }
        }
    }

    /// True when x coincides exactly with a branch endpoint (0 included:
    /// it is the left end of the first branch).
    fn on_branch_endpoint(&self, x: &PrecisePoint) -> bool {
        if x.fixed().is_zero() {
            return true;
        }
        let bits = x.bits();
        self.branches
            .iter()
            .skip(1)
            .any(|b| *x.fixed() == Fixed::from_f64(b.domain.0, bits))
    }

    /// T'(x) with the branch resolved exactly; signed, so decreasing
    /// custom branches report negative slopes.
    pub fn derivative(&self, x: &PrecisePoint) -> Result<f64, MapError> {
        if self.on_branch_endpoint(x) {
            return Err(MapError::AtPartitionPoint { x: x.to_f64() });
        }
        let j = self.branch_index(x);
        Ok(self.branches[j].derivative.eval_f64(x.to_f64()))
    }

    /// |T'(x)| from the branch metadata.
    pub fn derivative_f64(&self, x: f64) -> f64 {
        let j = self.branch_index_f64(x);
        self.branches[j].derivative.eval_f64(x).abs()
    }

    /// Branch-local inverse: the unique preimage of y under branch j, or
    /// None when y is outside the branch image. Closed-form for affine
    /// builtins, bisection otherwise.
    pub fn inverse_in_branch(&self, j: usize, y: f64) -> Option<f64> {
        let b = &self.branches[j];
        let (lo, hi) = b.domain;
        match &self.kind {
            Kind::Doubling => affine_inverse(2.0, -(j as f64), lo, hi, y),
            Kind::Beta(bt) => affine_inverse(*bt, -(j as f64), lo, hi, y),
            Kind::BernoulliMarkov(k) => {
                affine_inverse(*k as f64, -(j as f64), lo, hi, y)
            }
            Kind::MannevillePomeau(_) if j == 1 => {
                affine_inverse(2.0, -1.0, lo, hi, y)
            }
            _ => {
                // Monotone bisection on the branch closure.
                let f = |t: f64| b.formula.eval_f64(t);
                let (mut a, mut c) = (lo, hi);
                let (fa, fc) = (f(a), f(c));
                let (ylo, yhi) = if b.increasing { (fa, fc) } else { (fc, fa) };
                if y < ylo - 1e-12 || y > yhi + 1e-12 {
                    return None;
                }
                for _ in 0..90 {
                    let m = 0.5 * (a + c);
                    if (f(m) < y) == b.increasing {
                        a = m;
                    } else {
                        c = m;
                    }
                }
                Some(0.5 * (a + c))
            }
        }
    }

    /// The generation-n cylinder around x: the maximal half-open interval
    /// whose points share x's branch itinerary through the first n
    /// choices, so every T^k with k < n is monotone on it. Computed by
    /// reading the itinerary off the exact orbit and pulling the final
    /// branch domain back through the preceding branch inverses.
    ///
    /// n = 0 imposes no constraint and returns all of [0,1). The orbit
    /// precision rule applies to the n-1 steps taken.
    pub fn cylinder_of(
        &self,
        x: &PrecisePoint,
        n: u64,
    ) -> Result<(f64, f64), MapError> {
        if n == 0 {
            return Ok((0.0, 1.0));
        }
        let mut itinerary = Vec::with_capacity(n as usize);
        for (step, point) in self.orbit(x, n - 1)?.enumerate() {
            let point = point?;
            if self.on_branch_endpoint(&point) {
                return Err(MapError::HitsDiscontinuity {
                    step: step as u64,
                    x: point.to_f64(),
                });
            }
            itinerary.push(self.branch_index(&point));
        }
        let (mut lo, mut hi) = self.branches[itinerary[n as usize - 1]].domain;
        for &j in itinerary[..n as usize - 1].iter().rev() {
            let b = &self.branches[j];
            let fa = b.formula.eval_f64(b.domain.0);
            let fb = b.formula.eval_f64(b.domain.1);
            let (img_lo, img_hi) = if b.increasing { (fa, fb) } else { (fb, fa) };
            // The deeper interval contains T of a point of this branch, so
            // after clamping to the image both pullbacks exist.
            let a = self
                .inverse_in_branch(j, lo.clamp(img_lo, img_hi))
                .expect("clamped endpoint lies in the branch image");
            let c = self
                .inverse_in_branch(j, hi.clamp(img_lo, img_hi))
                .expect("clamped endpoint lies in the branch image");
            (lo, hi) = if b.increasing { (a, c) } else { (c, a) };
        }
        Ok((lo, hi))
    }

    /// The exact orbit x, Tx, ..., T^n x (n+1 points). Errors out up
    /// front unless the point's width meets [`Self::required_bits`].
    pub fn iterate_orbit(
        &self,
        x0: &PrecisePoint,
        n: u64,
    ) -> Result<Vec<PrecisePoint>, MapError> {
        let mut out = Vec::with_capacity(n as usize + 1);
        for step in self.orbit(x0, n)? {
            out.push(step?);
        }
        Ok(out)
    }

    /// Iterator form of [`Self::iterate_orbit`]; yields x first.
    pub fn orbit<'m>(
        &'m self,
        x0: &PrecisePoint,
        n: u64,
    ) -> Result<Orbit<'m>, MapError> {
        let required = self.required_bits(n);
        if x0.bits() < required {
            return Err(MapError::InsufficientPrecision {
                steps: n,
                required,
                available: x0.bits(),
            });
        }
        Ok(Orbit {
            map: self,
            state: Some(x0.clone()),
            pending_err: None,
            remaining: n,
        })
    }

    fn mp_coefficient(&self, beta: f64, bits: u32) -> Fixed {
        let mut cache = self.mp_coeff.lock().expect("coefficient cache");
        cache
            .entry(bits)
            .or_insert_with(|| {
                Fixed::from_u64(2, bits)
                    .pow_dyadic(beta - 1.0)
                    .expect("2^(beta-1) with beta > 1")
            })
            .clone()
    }
}

const SUP_SAMPLES: u32 = 4096;

pub struct Orbit<'m> {
    map: &'m PartitionedMap,
    state: Option<PrecisePoint>,
    pending_err: Option<MapError>,
    remaining: u64,
}

impl Iterator for Orbit<'_> {
    type Item = Result<PrecisePoint, MapError>;

    fn next(&mut self) -> Option<Self::Item> {
        if let Some(e) = self.pending_err.take() {
            return Some(Err(e));
        }
        let current = self.state.take()?;
        if self.remaining > 0 {
            self.remaining -= 1;
            match self.map.evaluate(&current) {
                Ok(next) => self.state = Some(next),
                // Deliver the current point now, the error on the next
                // call; iteration then stops.
                Err(e) => self.pending_err = Some(e),
            }
        }
        Some(Ok(current))
    }
}

fn affine_branch(domain: (f64, f64), a: f64, b: f64) -> Branch {
    let formula_src = if b == 0.0 {
        format!("{a}*x")
    } else {
        format!("{a}*x - {}", -b)
    };
    let derivative_src = format!("{a}");
    Branch {
        domain,
        formula: Expr::parse(&formula_src).expect("builtin formula parses"),
        formula_src,
        derivative: Expr::parse(&derivative_src).expect("builtin derivative"),
        derivative_src,
        increasing: a > 0.0,
    }
}

fn parse_branch(spec: &BranchSpec, index: usize) -> Result<Branch, MapError> {
    let formula = Expr::parse(&spec.formula).map_err(|e| {
        MapError::BadPartition(format!("branch {index} formula: {e}"))
    })?;
    let derivative = Expr::parse(&spec.derivative).map_err(|e| {
        MapError::BadPartition(format!("branch {index} derivative: {e}"))
    })?;
    let mid = 0.5 * (spec.domain.0 + spec.domain.1);
    let increasing = derivative.eval_f64(mid) > 0.0;
    Ok(Branch {
        domain: spec.domain,
        formula,
        formula_src: spec.formula.clone(),
        derivative,
        derivative_src: spec.derivative.clone(),
        increasing,
    })
}

fn affine_inverse(a: f64, b: f64, lo: f64, hi: f64, y: f64) -> Option<f64> {
    // Inverse of y = a*x + b restricted to [lo, hi).
    let x = (y - b) / a;
    if x >= lo - 1e-12 && x <= hi + 1e-12 {
        Some(x.clamp(lo, hi))
    } else {
        None
    }
}

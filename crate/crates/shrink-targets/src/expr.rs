//! Formula parser and evaluator for map branches and potentials.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr   := term  { ("+" | "-") term }
//! term   := unary { ("*" | "/" | "%") unary }
//! unary  := "-" unary | power
//! power  := atom [ "^" unary ]            (right-associative)
//! atom   := number | "pi" | "x" | name "(" expr ")" | "(" expr ")"
//! name   := "log" | "exp" | "abs" | "sqrt"
//! ```
//!
//! `%` is the mathematical remainder (result has the divisor's sign
//! range, so `expr % 1` always lands in [0,1)). `log` is natural.
//!
//! Every expression evaluates two ways. [`Expr::eval_f64`] is plain
//! floating point. [`Expr::eval_fixed`] runs on [`Fixed`] operands for
//! exact orbit work; there, numeric literals and `pi` enter at the exact
//! dyadic value of their `f64` representation, `^` requires a constant
//! exponent (it lowers to square-root chains), and `log`/`exp` are
//! rejected since they have no finite dyadic form.

use crate::fixed::{Fixed, FixedError};
use num_integer::Integer;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("`{0}` has no exact fixed-point form; usable only in f64 contexts")]
    TranscendentalInExact(&'static str),
    #[error("exponent must be a constant expression, found one depending on x")]
    VariableExponent,
    #[error("fixed-point arithmetic failed: {0}")]
    Fixed(#[from] FixedError),
    #[error("modulus by zero")]
    ZeroModulus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Log,
    Exp,
    Abs,
    Sqrt,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Pi,
    Var,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Rem(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn parse(input: &str) -> Result<Expr, ExprError> {
        let mut p = Parser { buf: input.as_bytes(), pos: 0 };
        p.skip_ws();
        if p.pos == p.buf.len() {
            return Err(p.err("empty formula"));
        }
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.buf.len() {
            return Err(p.err("trailing input"));
        }
        Ok(e)
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        match self {
            Expr::Num(c) => *c,
            Expr::Pi => std::f64::consts::PI,
            Expr::Var => x,
            Expr::Neg(a) => -a.eval_f64(x),
            Expr::Add(a, b) => a.eval_f64(x) + b.eval_f64(x),
            Expr::Sub(a, b) => a.eval_f64(x) - b.eval_f64(x),
            Expr::Mul(a, b) => a.eval_f64(x) * b.eval_f64(x),
            Expr::Div(a, b) => a.eval_f64(x) / b.eval_f64(x),
            Expr::Rem(a, b) => a.eval_f64(x).rem_euclid(b.eval_f64(x)),
            Expr::Pow(a, b) => a.eval_f64(x).powf(b.eval_f64(x)),
            Expr::Call(Func::Log, a) => a.eval_f64(x).ln(),
            Expr::Call(Func::Exp, a) => a.eval_f64(x).exp(),
            Expr::Call(Func::Abs, a) => a.eval_f64(x).abs(),
            Expr::Call(Func::Sqrt, a) => a.eval_f64(x).sqrt(),
        }
    }

    pub fn eval_fixed(&self, x: &Fixed) -> Result<Fixed, ExprError> {
        let bits = x.bits();
        Ok(match self {
            Expr::Num(c) => Fixed::from_f64(*c, bits),
            Expr::Pi => Fixed::from_f64(std::f64::consts::PI, bits),
            Expr::Var => x.clone(),
            Expr::Neg(a) => a.eval_fixed(x)?.neg(),
            Expr::Add(a, b) => a.eval_fixed(x)?.add(&b.eval_fixed(x)?),
            Expr::Sub(a, b) => a.eval_fixed(x)?.sub(&b.eval_fixed(x)?),
            Expr::Mul(a, b) => a.eval_fixed(x)?.mul(&b.eval_fixed(x)?),
            Expr::Div(a, b) => a.eval_fixed(x)?.div(&b.eval_fixed(x)?)?,
            Expr::Rem(a, b) => {
                let av = a.eval_fixed(x)?;
                let bv = b.eval_fixed(x)?;
                if bv.is_zero() {
                    return Err(ExprError::ZeroModulus);
                }
                // a - b * floor(a/b), with the integer quotient taken on
                // the raw mantissas so the reduction is exact.
                let q = av.mantissa().div_floor(bv.mantissa());
                let prod = Fixed::from_mantissa(bv.mantissa() * &q, bits);
                av.sub(&prod)
            }
            Expr::Pow(a, b) => {
                let e = b.eval_const().ok_or(ExprError::VariableExponent)?;
                let base = a.eval_fixed(x)?;
                if e == 0.0 {
                    Fixed::one(bits)
                } else if e > 0.0 {
                    base.pow_dyadic(e)?
                } else {
                    Fixed::one(bits).div(&base.pow_dyadic(-e)?)?
                }
            }
            Expr::Call(Func::Log, _) => {
                return Err(ExprError::TranscendentalInExact("log"))
            }
            Expr::Call(Func::Exp, _) => {
                return Err(ExprError::TranscendentalInExact("exp"))
            }
            Expr::Call(Func::Abs, a) => a.eval_fixed(x)?.abs(),
            Expr::Call(Func::Sqrt, a) => a.eval_fixed(x)?.sqrt()?,
        })
    }

    /// Value if the expression does not depend on x.
    pub fn eval_const(&self) -> Option<f64> {
        match self {
            Expr::Var => None,
            Expr::Num(c) => Some(*c),
            Expr::Pi => Some(std::f64::consts::PI),
            Expr::Neg(a) => Some(-a.eval_const()?),
            Expr::Add(a, b) => Some(a.eval_const()? + b.eval_const()?),
            Expr::Sub(a, b) => Some(a.eval_const()? - b.eval_const()?),
            Expr::Mul(a, b) => Some(a.eval_const()? * b.eval_const()?),
            Expr::Div(a, b) => Some(a.eval_const()? / b.eval_const()?),
            Expr::Rem(a, b) => Some(a.eval_const()?.rem_euclid(b.eval_const()?)),
            Expr::Pow(a, b) => Some(a.eval_const()?.powf(b.eval_const()?)),
            Expr::Call(f, a) => {
                let v = a.eval_const()?;
                Some(match f {
                    Func::Log => v.ln(),
                    Func::Exp => v.exp(),
                    Func::Abs => v.abs(),
                    Func::Sqrt => v.sqrt(),
                })
            }
        }
    }

    /// Dense coefficient list (constant term first) if the expression is
    /// a polynomial in x of degree <= 64. Division only by constants,
    /// powers only with small nonnegative integer exponents, and no
    /// transcendental calls. Used by the closed-form correlation path.
    pub fn as_polynomial(&self) -> Option<Vec<f64>> {
        const MAX_DEG: usize = 64;
        fn trim(mut v: Vec<f64>) -> Vec<f64> {
            while v.len() > 1 && v.last() == Some(&0.0) {
                v.pop();
            }
            v
        }
        let poly = match self {
            Expr::Num(c) => vec![*c],
            Expr::Pi => vec![std::f64::consts::PI],
            Expr::Var => vec![0.0, 1.0],
            Expr::Neg(a) => a.as_polynomial()?.iter().map(|c| -c).collect(),
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                let sign = if matches!(self, Expr::Sub(..)) { -1.0 } else { 1.0 };
                let (pa, pb) = (a.as_polynomial()?, b.as_polynomial()?);
                let n = pa.len().max(pb.len());
                (0..n)
                    .map(|i| {
                        pa.get(i).copied().unwrap_or(0.0)
                            + sign * pb.get(i).copied().unwrap_or(0.0)
                    })
                    .collect()
            }
            Expr::Mul(a, b) => {
                let (pa, pb) = (a.as_polynomial()?, b.as_polynomial()?);
                if pa.len() + pb.len() > MAX_DEG + 2 {
                    return None;
                }
                let mut out = vec![0.0; pa.len() + pb.len() - 1];
                for (i, ca) in pa.iter().enumerate() {
                    for (j, cb) in pb.iter().enumerate() {
                        out[i + j] += ca * cb;
                    }
                }
                out
            }
            Expr::Div(a, b) => {
                let c = b.eval_const()?;
                a.as_polynomial()?.iter().map(|v| v / c).collect()
            }
            Expr::Pow(a, b) => {
                let e = b.eval_const()?;
                if e < 0.0 || e.fract() != 0.0 || e > MAX_DEG as f64 {
                    return None;
                }
                let mut acc = vec![1.0];
                for _ in 0..e as usize {
                    acc = Expr::Mul(
                        Box::new(poly_expr(&acc)),
                        Box::new((**a).clone()),
                    )
                    .as_polynomial()?;
                }
                acc
            }
            Expr::Rem(..) | Expr::Call(..) => return None,
        };
        if poly.len() > MAX_DEG + 1 {
            return None;
        }
        Some(trim(poly))
    }
}

/// Rebuilds an Expr whose polynomial is exactly `coeffs` (helper for the
/// power case above; never shown to users).
fn poly_expr(coeffs: &[f64]) -> Expr {
    let mut e = Expr::Num(coeffs[0]);
    for (i, &c) in coeffs.iter().enumerate().skip(1) {
        let mut term = Expr::Num(c);
        for _ in 0..i {
            term = Expr::Mul(Box::new(term), Box::new(Expr::Var));
        }
        e = Expr::Add(Box::new(e), Box::new(term));
    }
    e
}

struct Parser<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> ExprError {
        ExprError::Parse { pos: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.buf.len() && self.buf[self.pos].is_ascii_whitespace()
        {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.buf.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(b'%') => {
                    self.pos += 1;
                    lhs = Expr::Rem(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(_) => Err(self.err("expected a value")),
            None => Err(self.err("unexpected end of formula")),
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        while self
            .buf
            .get(self.pos)
            .is_some_and(|c| c.is_ascii_digit() || *c == b'.')
        {
            self.pos += 1;
        }
        // Exponent suffix like 1e-3.
        if self.buf.get(self.pos).is_some_and(|c| *c == b'e' || *c == b'E') {
            let mut probe = self.pos + 1;
            if self.buf.get(probe).is_some_and(|c| *c == b'+' || *c == b'-') {
                probe += 1;
            }
            if self.buf.get(probe).is_some_and(u8::is_ascii_digit) {
                self.pos = probe;
                while self.buf.get(self.pos).is_some_and(u8::is_ascii_digit) {
                    self.pos += 1;
                }
            }
        }
        let text = std::str::from_utf8(&self.buf[start..self.pos]).unwrap();
        text.parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| ExprError::Parse {
                pos: start,
                msg: format!("bad number `{text}`"),
            })
    }

    fn ident(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        while self
            .buf
            .get(self.pos)
            .is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.buf[start..self.pos]).unwrap();
        let func = match name {
            "x" => return Ok(Expr::Var),
            "pi" => return Ok(Expr::Pi),
            "log" => Func::Log,
            "exp" => Func::Exp,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            other => {
                return Err(ExprError::Parse {
                    pos: start,
                    msg: format!("unknown name `{other}`"),
                })
            }
        };
        if self.peek() != Some(b'(') {
            return Err(self.err("function name needs `(`"));
        }
        self.pos += 1;
        let arg = self.expr()?;
        if self.peek() != Some(b')') {
            return Err(self.err("expected `)`"));
        }
        self.pos += 1;
        Ok(Expr::Call(func, Box::new(arg)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, x: f64) -> f64 {
        Expr::parse(src).unwrap().eval_f64(x)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", 0.0), 7.0);
        assert_eq!(ev("2 ^ 3 ^ 2", 0.0), 512.0); // right-assoc
        assert_eq!(ev("-2 ^ 2", 0.0), -4.0); // power binds tighter than neg
        assert_eq!(ev("2 ^ -1", 0.0), 0.5);
        assert_eq!(ev("(1 + 2) * 3", 0.0), 9.0);
    }

    #[test]
    fn doubling_formula() {
        assert_eq!(ev("2*x % 1", 0.3), 0.6);
        assert_eq!(ev("2*x % 1", 0.7), (2.0 * 0.7_f64).rem_euclid(1.0));
    }

    #[test]
    fn rem_is_mathematical() {
        assert_eq!(ev("-0.25 % 1", 0.0), 0.75);
        assert_eq!(ev("3.5 % 1", 0.0), 0.5);
    }

    #[test]
    fn functions_and_pi() {
        assert!((ev("log(exp(x))", 1.3) - 1.3).abs() < 1e-15);
        assert_eq!(ev("abs(-x)", 0.4), 0.4);
        assert_eq!(ev("sqrt(x)", 0.25), 0.5);
        assert!((ev("pi", 0.0) - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn scientific_notation_literals() {
        assert_eq!(ev("1e-3 + x", 0.0), 1e-3);
        assert_eq!(ev("2.5E2", 0.0), 250.0);
    }

    #[test]
    fn parse_errors_carry_position() {
        assert!(matches!(
            Expr::parse("2 *"),
            Err(ExprError::Parse { .. })
        ));
        assert!(Expr::parse("foo(x)").is_err());
        assert!(Expr::parse("(1 + 2").is_err());
        assert!(Expr::parse("").is_err());
        assert!(Expr::parse("1 2").is_err());
    }

    #[test]
    fn fixed_eval_matches_f64_for_algebraic_formulas() {
        let cases = [
            ("2*x % 1", 0.7),
            ("x + 0.125 * x^2", 0.3),
            ("(x - 0.5) * 3", 0.9),
            ("sqrt(x) + x^1.5", 0.42),
            ("abs(x - 0.75)", 0.25),
        ];
        for (src, x) in cases {
            let e = Expr::parse(src).unwrap();
            let fx = Fixed::from_f64(x, 512);
            let got = e.eval_fixed(&fx).unwrap().to_f64();
            let want = e.eval_f64(x);
            assert!(
                (got - want).abs() < 1e-13,
                "{src} at {x}: fixed {got} vs f64 {want}"
            );
        }
    }

    #[test]
    fn fixed_eval_rem_wraps_into_unit_interval() {
        let e = Expr::parse("3*x % 1").unwrap();
        let fx = Fixed::from_f64(0.9, 256);
        let got = e.eval_fixed(&fx).unwrap().to_f64();
        assert!((got - 0.7).abs() < 1e-15);
    }

    #[test]
    fn fixed_eval_rejects_log_and_exp() {
        let fx = Fixed::from_f64(0.5, 128);
        assert!(matches!(
            Expr::parse("log(x)").unwrap().eval_fixed(&fx),
            Err(ExprError::TranscendentalInExact("log"))
        ));
        assert!(matches!(
            Expr::parse("exp(x)").unwrap().eval_fixed(&fx),
            Err(ExprError::TranscendentalInExact("exp"))
        ));
    }

    #[test]
    fn fixed_eval_rejects_variable_exponent() {
        let fx = Fixed::from_f64(0.5, 128);
        assert!(matches!(
            Expr::parse("2^x").unwrap().eval_fixed(&fx),
            Err(ExprError::VariableExponent)
        ));
    }

    #[test]
    fn fixed_eval_negative_constant_exponent() {
        let fx = Fixed::from_f64(0.25, 256);
        let got = Expr::parse("x^-1").unwrap().eval_fixed(&fx).unwrap();
        assert_eq!(got.to_f64(), 4.0);
    }

    #[test]
    fn polynomial_extraction() {
        let p = Expr::parse("(x - 0.5) * (x + 0.5)").unwrap();
        assert_eq!(p.as_polynomial().unwrap(), vec![-0.25, 0.0, 1.0]);
        let q = Expr::parse("x^3 - 2*x + 1").unwrap();
        assert_eq!(q.as_polynomial().unwrap(), vec![1.0, -2.0, 0.0, 1.0]);
        assert_eq!(Expr::parse("x/4").unwrap().as_polynomial().unwrap(), vec![
            0.0, 0.25
        ]);
        assert!(Expr::parse("sqrt(x)").unwrap().as_polynomial().is_none());
        assert!(Expr::parse("x % 1").unwrap().as_polynomial().is_none());
        assert!(Expr::parse("x^0.5").unwrap().as_polynomial().is_none());
    }

    #[test]
    fn const_detection() {
        assert_eq!(Expr::parse("2^3").unwrap().eval_const(), Some(8.0));
        assert_eq!(Expr::parse("x").unwrap().eval_const(), None);
        assert_eq!(
            Expr::parse("log(exp(1))").unwrap().eval_const(),
            Some(1.0)
        );
    }
}

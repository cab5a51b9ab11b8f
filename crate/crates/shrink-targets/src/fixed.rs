//! Arbitrary-precision fixed-point reals.
//!
//! Orbit computations in this crate run on dyadic fixed-point numbers
//! `mant / 2^bits` with a caller-chosen fractional width, not on `f64`.
//! The point is control over truncation: every operation here rounds
//! toward negative infinity by construction (floor), so a computed orbit
//! is the exact orbit of an exactly-represented initial point under the
//! exactly-represented map, up to one ulp of floor error per arithmetic
//! step. Combined with the bit-width rule enforced by the orbit iterator
//! (width >= n * log2(sup |T'|) + 64), the first 64 bits of every orbit
//! point are trustworthy.
//!
//! Two types:
//!
//! * [`Fixed`]: signed, unbounded integer part, fixed fractional width.
//!   The workhorse for intermediate arithmetic (map formulas may pass
//!   through values outside [0,1)).
//! * [`PrecisePoint`]: a [`Fixed`] constrained to [0,1), the state space
//!   of the interval maps.
//!
//! Powers with non-integer exponents use the dyadic decomposition of the
//! `f64` exponent: e = m * 2^-k with m odd, so x^e = (x^(1/2^k))^m via k
//! integer square roots followed by square-and-multiply. The exponent is
//! honored exactly as the dyadic rational the caller's `f64` denotes;
//! half-integer and integer exponents take the cheap path automatically.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::fmt;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FixedError {
    #[error("fractional widths differ: {0} vs {1} bits")]
    WidthMismatch(u32, u32),
    #[error("square root of a negative value")]
    NegativeSqrt,
    #[error("power with non-positive base requires a positive integer exponent")]
    NegativeBase,
    #[error("exponent {0} is not a usable dyadic (must be finite and positive)")]
    BadExponent(f64),
    #[error("integer exponent {0} too large")]
    ExponentTooLarge(u64),
    #[error("division by zero")]
    DivisionByZero,
    #[error("value {0} outside the unit interval [0,1)")]
    OutsideUnitInterval(f64),
    #[error("invalid hex mantissa")]
    BadHex,
}

/// Signed fixed-point number `mant / 2^bits`.
#[derive(Debug, Clone)]
pub struct Fixed {
    mant: BigInt,
    bits: u32,
}

impl Fixed {
    pub fn zero(bits: u32) -> Self {
        Fixed { mant: BigInt::zero(), bits }
    }

    pub fn one(bits: u32) -> Self {
        Fixed { mant: BigInt::from(1u8) << bits, bits }
    }

    pub fn from_u64(v: u64, bits: u32) -> Self {
        Fixed { mant: BigInt::from(v) << bits, bits }
    }

    /// Exact conversion when `bits` covers the `f64`'s scale (any normal
    /// number >= 2^-971 at 1024 bits); otherwise floor-truncates.
    pub fn from_f64(v: f64, bits: u32) -> Self {
        assert!(v.is_finite(), "Fixed::from_f64 requires a finite value");
        let (m, e) = f64_decompose(v);
        let shift = e + bits as i64;
        let mant = if shift >= 0 {
            BigInt::from(m) << (shift as u64)
        } else {
            floor_shr(&BigInt::from(m), (-shift) as u64)
        };
        Fixed { mant, bits }
    }

    pub fn from_mantissa(mant: BigInt, bits: u32) -> Self {
        Fixed { mant, bits }
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.mant
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn is_negative(&self) -> bool {
        self.mant.is_negative()
    }

    pub fn is_zero(&self) -> bool {
        self.mant.is_zero()
    }

    /// True when the value is at least one half. Decided from the
    /// mantissa width alone, so orbit loops can branch on it without
    /// building a comparison constant.
    pub fn ge_half(&self) -> bool {
        !self.mant.is_negative() && self.mant.bits() >= self.bits as u64
    }

    /// Round-to-nearest within one ulp: top 63 mantissa bits, then an
    /// exact power-of-two scaling. Values below the `f64` subnormal range
    /// flush to zero.
    pub fn to_f64(&self) -> f64 {
        let nb = self.mant.bits();
        if nb == 0 {
            return 0.0;
        }
        let neg = self.mant.sign() == Sign::Minus;
        let mag = self.mant.magnitude();
        let (top, dropped) = if nb <= 63 {
            (mag.to_u64().expect("<=63 bits fits u64"), 0i64)
        } else {
            let s = nb - 63;
            ((mag >> s).to_u64().expect("63-bit window"), s as i64)
        };
        let v = scale_pow2(top as f64, dropped - self.bits as i64);
        if neg {
            -v
        } else {
            v
        }
    }

    /// Change fractional width; widening is exact, narrowing floors.
    pub fn with_bits(&self, bits: u32) -> Fixed {
        if bits == self.bits {
            self.clone()
        } else if bits > self.bits {
            Fixed { mant: &self.mant << (bits - self.bits), bits }
        } else {
            Fixed { mant: floor_shr(&self.mant, (self.bits - bits) as u64), bits }
        }
    }

    fn check_widths(&self, other: &Fixed) -> Result<(), FixedError> {
        if self.bits != other.bits {
            return Err(FixedError::WidthMismatch(self.bits, other.bits));
        }
        Ok(())
    }

    pub fn add(&self, other: &Fixed) -> Fixed {
        self.check_widths(other).expect("fixed-point width mismatch");
        Fixed { mant: &self.mant + &other.mant, bits: self.bits }
    }

    pub fn sub(&self, other: &Fixed) -> Fixed {
        self.check_widths(other).expect("fixed-point width mismatch");
        Fixed { mant: &self.mant - &other.mant, bits: self.bits }
    }

    pub fn neg(&self) -> Fixed {
        Fixed { mant: -&self.mant, bits: self.bits }
    }

    pub fn abs(&self) -> Fixed {
        Fixed { mant: self.mant.abs(), bits: self.bits }
    }

    /// Floor-truncated product.
    pub fn mul(&self, other: &Fixed) -> Fixed {
        self.check_widths(other).expect("fixed-point width mismatch");
        let wide = &self.mant * &other.mant;
        Fixed { mant: floor_shr(&wide, self.bits as u64), bits: self.bits }
    }

    /// Multiply by the exact dyadic value of an `f64` constant. The
    /// constant's 53-bit mantissa keeps this O(limbs) regardless of the
    /// working width, which is what makes kilobit affine orbits cheap.
    pub fn mul_f64(&self, c: f64) -> Fixed {
        assert!(c.is_finite());
        let (m, e) = f64_decompose(c);
        let prod = &self.mant * BigInt::from(m);
        let mant = if e >= 0 {
            prod << (e as u64)
        } else {
            floor_shr(&prod, (-e) as u64)
        };
        Fixed { mant, bits: self.bits }
    }

    /// Floor-truncated quotient.
    pub fn div(&self, other: &Fixed) -> Result<Fixed, FixedError> {
        self.check_widths(other)?;
        if other.mant.is_zero() {
            return Err(FixedError::DivisionByZero);
        }
        let num = &self.mant << self.bits;
        Ok(Fixed { mant: num.div_floor(&other.mant), bits: self.bits })
    }

    /// Fractional part in [0,1): x - floor(x), exact.
    pub fn frac(&self) -> Fixed {
        let modulus = BigInt::from(1u8) << self.bits;
        Fixed { mant: self.mant.mod_floor(&modulus), bits: self.bits }
    }

    /// Integer part rounded toward negative infinity.
    pub fn floor_i64(&self) -> i64 {
        floor_shr(&self.mant, self.bits as u64)
            .to_i64()
            .expect("integer part fits i64")
    }

    /// Floor square root; the argument must be nonnegative.
    pub fn sqrt(&self) -> Result<Fixed, FixedError> {
        if self.mant.is_negative() {
            return Err(FixedError::NegativeSqrt);
        }
        let wide: BigInt = &self.mant << self.bits;
        Ok(Fixed { mant: wide.sqrt(), bits: self.bits })
    }

    /// x^n by square-and-multiply with floor truncation at each step.
    pub fn powi(&self, n: u64) -> Fixed {
        if n == 0 {
            return Fixed::one(self.bits);
        }
        let mut acc = Fixed::one(self.bits);
        let mut started = false;
        for i in (0..64 - n.leading_zeros()).rev() {
            if started {
                acc = acc.mul(&acc);
            }
            if (n >> i) & 1 == 1 {
                acc = if started { acc.mul(self) } else { self.clone() };
            }
            started = true;
        }
        acc
    }

    /// x^e for x >= 0 and e > 0, honoring e as the exact dyadic rational
    /// m * 2^-k its `f64` bit pattern denotes: k floor square roots, then
    /// an m-th power. Exponents reducing to integers skip the root chain.
    pub fn pow_dyadic(&self, e: f64) -> Result<Fixed, FixedError> {
        if self.mant.is_negative() {
            return Err(FixedError::NegativeBase);
        }
        if !e.is_finite() || e <= 0.0 {
            return Err(FixedError::BadExponent(e));
        }
        let (m, k) = f64_decompose(e);
        debug_assert!(m > 0);
        let m = m as u64;
        if k >= 0 {
            // Integer exponent m * 2^k.
            let shifted = (m as u128) << k;
            if shifted > 1 << 40 {
                return Err(FixedError::ExponentTooLarge(m));
            }
            Ok(self.powi(shifted as u64))
        } else {
            let mut base = self.clone();
            for _ in 0..(-k) {
                base = base.sqrt()?;
            }
            Ok(base.powi(m))
        }
    }

    pub fn cmp_value(&self, other: &Fixed) -> Ordering {
        self.check_widths(other).expect("fixed-point width mismatch");
        self.mant.cmp(&other.mant)
    }
}

impl PartialEq for Fixed {
    fn eq(&self, other: &Self) -> bool {
        self.cmp_value(other) == Ordering::Equal
    }
}

impl Eq for Fixed {}

impl PartialOrd for Fixed {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp_value(other))
    }
}

impl Ord for Fixed {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cmp_value(other)
    }
}

impl fmt::Display for Fixed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

/// A point of the unit interval [0,1) at fixed precision.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PrecisePoint {
    fx: Fixed,
}

impl PrecisePoint {
    /// Wraps a [`Fixed`] that must already lie in [0,1).
    pub fn try_new(fx: Fixed) -> Result<Self, FixedError> {
        // mant in [0, 2^bits) <=> at most `bits` significant bits.
        if fx.is_negative() || fx.mantissa().bits() > fx.bits() as u64 {
            return Err(FixedError::OutsideUnitInterval(fx.to_f64()));
        }
        Ok(PrecisePoint { fx })
    }

    /// Reduce any Fixed modulo 1 into [0,1). Exact.
    pub fn wrap(fx: Fixed) -> Self {
        PrecisePoint { fx: fx.frac() }
    }

    pub fn from_f64(v: f64, bits: u32) -> Result<Self, FixedError> {
        if !(0.0..1.0).contains(&v) {
            return Err(FixedError::OutsideUnitInterval(v));
        }
        PrecisePoint::try_new(Fixed::from_f64(v, bits))
    }

    /// Builds a point from raw mantissa bits (used by the seeded RNG).
    pub fn from_raw_bits(mag: BigUint, bits: u32) -> Result<Self, FixedError> {
        PrecisePoint::try_new(Fixed::from_mantissa(BigInt::from(mag), bits))
    }

    pub fn zero(bits: u32) -> Self {
        PrecisePoint { fx: Fixed::zero(bits) }
    }

    pub fn fixed(&self) -> &Fixed {
        &self.fx
    }

    pub fn bits(&self) -> u32 {
        self.fx.bits()
    }

    pub fn to_f64(&self) -> f64 {
        self.fx.to_f64()
    }

    pub fn with_bits(&self, bits: u32) -> PrecisePoint {
        PrecisePoint { fx: self.fx.with_bits(bits) }
    }

    /// |a - b| as a Fixed of the common width.
    pub fn distance(&self, other: &PrecisePoint) -> Fixed {
        self.fx.sub(&other.fx).abs()
    }

    /// Hex mantissa, zero-padded to bits/4 nibbles (most significant first).
    pub fn to_hex(&self) -> String {
        let width = (self.fx.bits() as usize + 3) / 4;
        format!("{:0>width$x}", self.fx.mantissa().magnitude(), width = width)
    }

    pub fn from_hex(hex: &str, bits: u32) -> Result<Self, FixedError> {
        let mag =
            BigUint::parse_bytes(hex.as_bytes(), 16).ok_or(FixedError::BadHex)?;
        PrecisePoint::from_raw_bits(mag, bits)
    }
}

impl fmt::Display for PrecisePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

/// (m, e) with v = m * 2^e exactly and m odd (m = 0 for v = 0).
fn f64_decompose(v: f64) -> (i64, i64) {
    if v == 0.0 {
        return (0, 0);
    }
    let bits = v.to_bits();
    let neg = bits >> 63 == 1;
    let biased = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mut m, mut e) = if biased == 0 {
        (frac, -1074i64)
    } else {
        (frac | (1 << 52), biased - 1075)
    };
    let tz = m.trailing_zeros();
    m >>= tz;
    e += tz as i64;
    let m = m as i64;
    (if neg { -m } else { m }, e)
}

/// Arithmetic right shift with floor semantics for both signs.
fn floor_shr(v: &BigInt, shift: u64) -> BigInt {
    if shift == 0 {
        return v.clone();
    }
    let divisor = BigInt::from(1u8) << shift;
    v.div_floor(&divisor)
}

/// v * 2^e without overflow/underflow surprises for |e| beyond f64 range.
fn scale_pow2(v: f64, e: i64) -> f64 {
    if e == 0 {
        v
    } else if e > 1023 {
        f64::INFINITY * v.signum()
    } else if e >= -1021 {
        v * f64::from_bits(((e + 1023) as u64) << 52)
    } else if e < -1140 {
        0.0
    } else {
        // Split to dodge subnormal rounding until the final step.
        v * f64::from_bits(((-1021 + 1023) as u64) << 52)
            * f64::from_bits(((e + 1021 + 1023) as u64) << 52)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f64_roundtrip_is_exact_at_wide_widths() {
        for &v in &[0.0, 0.5, 0.3, 0.7, 1.0 / 3.0, 0.9999999, 1e-9, 0.125] {
            let fx = Fixed::from_f64(v, 1024);
            assert_eq!(fx.to_f64(), v, "roundtrip of {v}");
        }
    }

    #[test]
    fn negative_values_roundtrip() {
        let fx = Fixed::from_f64(-0.375, 256);
        assert_eq!(fx.to_f64(), -0.375);
        assert!(fx.is_negative());
        assert_eq!(fx.abs().to_f64(), 0.375);
    }

    #[test]
    fn floor_shr_rounds_toward_negative_infinity() {
        assert_eq!(floor_shr(&BigInt::from(-1), 1), BigInt::from(-1));
        assert_eq!(floor_shr(&BigInt::from(-3), 1), BigInt::from(-2));
        assert_eq!(floor_shr(&BigInt::from(3), 1), BigInt::from(1));
    }

    #[test]
    fn mul_matches_f64_on_exact_dyadics() {
        let a = Fixed::from_f64(0.375, 128);
        let b = Fixed::from_f64(0.25, 128);
        assert_eq!(a.mul(&b).to_f64(), 0.09375);
    }

    #[test]
    fn mul_f64_equals_full_mul() {
        let a = Fixed::from_f64(0.7, 512);
        let c = 1.618033988749895_f64;
        let full = a.mul(&Fixed::from_f64(c, 512));
        let fast = a.mul_f64(c);
        assert_eq!(full.mantissa(), fast.mantissa());
    }

    #[test]
    fn frac_wraps_exactly() {
        let x = Fixed::from_f64(1.32, 256);
        let f = x.frac();
        assert!((f.to_f64() - 0.32).abs() < 1e-15);
        let neg = Fixed::from_f64(-0.25, 256);
        assert_eq!(neg.frac().to_f64(), 0.75);
    }

    #[test]
    fn sqrt_of_quarter_is_half() {
        let q = Fixed::from_f64(0.25, 512);
        assert_eq!(q.sqrt().unwrap().to_f64(), 0.5);
    }

    #[test]
    fn sqrt_rejects_negative() {
        let v = Fixed::from_f64(-1.0, 64);
        assert!(matches!(v.sqrt(), Err(FixedError::NegativeSqrt)));
    }

    #[test]
    fn pow_dyadic_integer_exponents() {
        let x = Fixed::from_f64(0.5, 256);
        assert_eq!(x.pow_dyadic(2.0).unwrap().to_f64(), 0.25);
        assert_eq!(x.pow_dyadic(3.0).unwrap().to_f64(), 0.125);
        assert_eq!(x.pow_dyadic(1.0).unwrap().to_f64(), 0.5);
    }

    #[test]
    fn pow_dyadic_half_integer_matches_f64() {
        let x = Fixed::from_f64(0.37, 512);
        let got = x.pow_dyadic(1.5).unwrap().to_f64();
        let want = 0.37_f64.powf(1.5);
        assert!((got - want).abs() < 1e-14, "got {got} want {want}");
    }

    #[test]
    fn pow_dyadic_generic_exponent_matches_f64() {
        // 1.1 decomposes to a 51-deep square-root chain; accuracy should
        // still be far below f64 noise at 512 bits.
        let x = Fixed::from_f64(0.8, 512);
        let got = x.pow_dyadic(1.1).unwrap().to_f64();
        let want = 0.8_f64.powf(1.1);
        assert!((got - want).abs() < 1e-13, "got {got} want {want}");
    }

    #[test]
    fn pow_dyadic_base_above_one() {
        let two = Fixed::from_u64(2, 512);
        let got = two.pow_dyadic(0.5).unwrap().to_f64();
        assert!((got - std::f64::consts::SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn powi_truncation_stays_below_exact_value() {
        // Floor rounding at every step can only undershoot.
        let x = Fixed::from_f64(0.9, 64);
        let exact = 0.9_f64.powi(20);
        let got = x.powi(20).to_f64();
        assert!(got <= exact + 1e-15);
        assert!((got - exact).abs() < 1e-12);
    }

    #[test]
    fn division_floor() {
        let a = Fixed::from_f64(1.0, 128);
        let b = Fixed::from_f64(3.0, 128);
        let t = a.div(&b).unwrap().to_f64();
        assert!((t - 1.0 / 3.0).abs() < 1e-30);
        assert!(matches!(
            a.div(&Fixed::zero(128)),
            Err(FixedError::DivisionByZero)
        ));
    }

    #[test]
    fn unit_interval_guard() {
        assert!(PrecisePoint::from_f64(1.0, 64).is_err());
        assert!(PrecisePoint::from_f64(-0.1, 64).is_err());
        assert!(PrecisePoint::from_f64(0.0, 64).is_ok());
        assert!(PrecisePoint::try_new(Fixed::one(64)).is_err());
    }

    #[test]
    fn hex_roundtrip() {
        let p = PrecisePoint::from_f64(0.3, 1024).unwrap();
        let hex = p.to_hex();
        assert_eq!(hex.len(), 256);
        let q = PrecisePoint::from_hex(&hex, 1024).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn to_f64_handles_very_wide_widths() {
        let p = PrecisePoint::from_f64(0.625, 70_000).unwrap();
        assert_eq!(p.to_f64(), 0.625);
        let tiny = Fixed::from_mantissa(BigInt::from(1), 70_000);
        assert_eq!(tiny.to_f64(), 0.0); // below subnormal range
    }

    #[test]
    fn distance_is_symmetric() {
        let a = PrecisePoint::from_f64(0.2, 256).unwrap();
        let b = PrecisePoint::from_f64(0.9, 256).unwrap();
        assert_eq!(a.distance(&b).to_f64(), 0.7);
        assert_eq!(b.distance(&a).to_f64(), 0.7);
    }

    #[test]
    fn scale_pow2_deep_negative_exponents() {
        assert_eq!(scale_pow2(1.0, -1070), 2f64.powi(-1070));
        assert_eq!(scale_pow2(1.0, -2000), 0.0);
        assert!(scale_pow2(1.0, 1024).is_infinite());
    }
}

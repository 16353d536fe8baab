//! Numeric field abstraction so the same analytic sums run in exact rational
//! or floating-point arithmetic.

use std::fmt::Debug;
use std::ops::Neg;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

pub trait Scalar:
    Clone + Debug + PartialEq + Send + Sync + num::Num + Neg<Output = Self> + 'static
{
    fn from_rational(r: &Rational) -> Self;
    fn from_i64(v: i64) -> Self;
    fn as_f64(&self) -> f64;
    /// Exact types compare with `==`; floats with a relative tolerance.
    fn is_exact() -> bool;

    fn from_u64_pow(base: u64, exp: usize) -> Self {
        Self::from_rational(&Rational::from_integer(BigInt::from(base).pow(exp as u32)))
    }

    fn abs_val(&self) -> Self;
}

impl Scalar for f64 {
    fn from_rational(r: &Rational) -> Self {
        rational_to_f64(r)
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn as_f64(&self) -> f64 {
        *self
    }
    fn is_exact() -> bool {
        false
    }
    fn from_u64_pow(base: u64, exp: usize) -> Self {
        (base as f64).powi(exp as i32)
    }
    fn abs_val(&self) -> Self {
        self.abs()
    }
}

impl Scalar for Rational {
    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }
    fn from_i64(v: i64) -> Self {
        Rational::from_integer(BigInt::from(v))
    }
    fn as_f64(&self) -> f64 {
        rational_to_f64(self)
    }
    fn is_exact() -> bool {
        true
    }
    fn abs_val(&self) -> Self {
        self.abs()
    }
}

/// Correctly scaled conversion that survives numerators and denominators
/// beyond the f64 range.
pub fn rational_to_f64(r: &Rational) -> f64 {
    if let Some(v) = ToPrimitive::to_f64(r) {
        if v.is_finite() && (v != 0.0 || r.is_zero()) {
            return v;
        }
    }
    let n = r.numer();
    let d = r.denom();
    let shift = n.bits() as i64 - d.bits() as i64;
    // bring the quotient into [2^-1, 2^1) before converting
    let (nn, dd) = if shift > 0 {
        (n.clone(), d << (shift as usize))
    } else {
        (n << ((-shift) as usize), d.clone())
    };
    let scale = 60usize;
    let q = (nn << scale) / dd;
    q.to_f64().unwrap_or(f64::NAN) * 2f64.powi(shift as i32 - scale as i32)
}

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Parse `"p/q"`, `"p"` or a decimal literal such as `"0.25"` exactly.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let n: BigInt = a.trim().parse().ok()?;
        let d: BigInt = b.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    if let Ok(n) = s.parse::<BigInt>() {
        return Some(Rational::from_integer(n));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int, frac) = body.split_once('.')?;
    if !int.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int}{frac}");
    let n: BigInt = if digits.is_empty() { return None } else { digits.parse().ok()? };
    let d = BigInt::from(10).pow(frac.len() as u32);
    let r = Rational::new(n, d);
    Some(if neg { -r } else { r })
}

pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Relative comparison used for float-mode consistency checks.
pub fn approx_eq<T: Scalar>(a: &T, b: &T, rel: f64) -> bool {
    if T::is_exact() {
        return a == b;
    }
    let (x, y) = (a.as_f64(), b.as_f64());
    (x - y).abs() <= rel * x.abs().max(y.abs()).max(1.0)
}

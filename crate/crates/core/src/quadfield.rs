//! Exact arithmetic in `Z[sqrt2]` and `Q(sqrt2)`.
//!
//! Every element is stored as `(a + b*sqrt2)/c` in lowest terms with `c > 0`.
//! Coefficients are `i64`; intermediate products are formed in `i128` and any
//! result that does not fit back into `i64` is reported as [`Error::Overflow`].
//! Orderings are decided without floating point: the sign of `A + B*sqrt2` is
//! read off the signs of `A` and `B`, or from `A^2 - 2B^2` when they differ.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Coefficient bound beyond which the float embedding is no longer trusted
/// to ulp-scale accuracy.
pub const COEFF_LIMIT: i64 = 1 << 40;

/// `sqrt2 - SQRT_2`, the rounding error of the float constant.
const SQRT_2_LO: f64 = -9.667_293_313_452_913e-17;

/// An exact element `(a + b*sqrt2)/c` of the quadratic field `Q(sqrt2)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawNumber", into = "RawNumber")]
pub struct AlgebraicNumber {
    a: i64,
    b: i64,
    c: i64,
}

#[derive(Serialize, Deserialize)]
struct RawNumber {
    a: i64,
    b: i64,
    c: i64,
}

impl TryFrom<RawNumber> for AlgebraicNumber {
    type Error = Error;

    fn try_from(raw: RawNumber) -> Result<Self> {
        AlgebraicNumber::new(raw.a, raw.b, raw.c)
    }
}

impl From<AlgebraicNumber> for RawNumber {
    fn from(x: AlgebraicNumber) -> Self {
        RawNumber { a: x.a, b: x.b, c: x.c }
    }
}

fn gcd(mut u: i128, mut v: i128) -> i128 {
    u = u.abs();
    v = v.abs();
    while v != 0 {
        let t = u % v;
        u = v;
        v = t;
    }
    u
}

/// Sign of `a + b*sqrt2`, or `None` if the squares overflow.
fn wide_sign(a: i128, b: i128) -> Option<Ordering> {
    let zero = 0i128;
    match (a.cmp(&zero), b.cmp(&zero)) {
        (Ordering::Equal, s) | (s, Ordering::Equal) => Some(s),
        (Ordering::Greater, Ordering::Greater) => Some(Ordering::Greater),
        (Ordering::Less, Ordering::Less) => Some(Ordering::Less),
        (sa, _) => {
            let a2 = a.checked_mul(a)?;
            let b2 = b.checked_mul(b)?.checked_mul(2)?;
            // a^2 == 2 b^2 is impossible for nonzero integers
            if a2 > b2 {
                Some(sa)
            } else {
                Some(sa.reverse())
            }
        }
    }
}

impl AlgebraicNumber {
    pub const ZERO: Self = Self::integer(0);
    pub const ONE: Self = Self::integer(1);
    pub const SQRT2: Self = Self { a: 0, b: 1, c: 1 };

    /// `(a + b*sqrt2)/c`, reduced to lowest terms.
    pub fn new(a: i64, b: i64, c: i64) -> Result<Self> {
        if c == 0 {
            return Err(Error::DivisionByZero);
        }
        Self::from_wide(a as i128, b as i128, c as i128)
    }

    pub const fn integer(n: i64) -> Self {
        Self { a: n, b: 0, c: 1 }
    }

    /// The lattice point `m + n*sqrt2`.
    pub const fn from_ints(m: i64, n: i64) -> Self {
        Self { a: m, b: n, c: 1 }
    }

    /// The rational number `p/q`.
    pub fn rational(p: i64, q: i64) -> Result<Self> {
        Self::new(p, 0, q)
    }

    /// The silver mean `1 + sqrt2`.
    pub const fn silver_mean() -> Self {
        Self::from_ints(1, 1)
    }

    fn from_wide(mut a: i128, mut b: i128, mut c: i128) -> Result<Self> {
        if c == 0 {
            return Err(Error::DivisionByZero);
        }
        if c < 0 {
            a = -a;
            b = -b;
            c = -c;
        }
        let g = gcd(gcd(a, b), c);
        if g > 1 {
            a /= g;
            b /= g;
            c /= g;
        }
        let conv = |v: i128| i64::try_from(v).map_err(|_| Error::Overflow);
        Ok(Self {
            a: conv(a)?,
            b: conv(b)?,
            c: conv(c)?,
        })
    }

    pub fn a(&self) -> i64 {
        self.a
    }

    pub fn b(&self) -> i64 {
        self.b
    }

    pub fn c(&self) -> i64 {
        self.c
    }

    /// Galois conjugation `sqrt2 -> -sqrt2`.
    pub fn star(&self) -> Self {
        Self {
            a: self.a,
            b: -self.b,
            c: self.c,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.a == 0 && self.b == 0
    }

    pub fn is_integer(&self) -> bool {
        self.b == 0 && self.c == 1
    }

    pub fn is_rational(&self) -> bool {
        self.b == 0
    }

    /// Membership in `Z[sqrt2]`.
    pub fn is_lattice_point(&self) -> bool {
        self.c == 1
    }

    /// Trace `x + x*`, always rational.
    pub fn trace(&self) -> Self {
        // 2a/c
        Self::from_wide(2 * self.a as i128, 0, self.c as i128).expect("trace fits")
    }

    /// Float embedding. When `a` and `b` have opposite signs the sum cancels,
    /// so the value is taken as `(a^2 - 2b^2) / (a - b sqrt2)` with the norm
    /// computed exactly.
    pub fn to_f64(&self) -> f64 {
        let (a, b, c) = (self.a as f64, self.b as f64, self.c as f64);
        if (self.a < 0) != (self.b < 0) && self.a != 0 && self.b != 0 {
            let (wa, wb) = (self.a as i128, self.b as i128);
            if let Some(norm) = wb
                .checked_mul(wb)
                .and_then(|v| v.checked_mul(2))
                .and_then(|v| (wa * wa).checked_sub(v))
            {
                let conj = (-b).mul_add(SQRT_2, a);
                return norm as f64 / conj / c;
            }
        }
        b.mul_add(SQRT_2, a) / c
    }

    /// Value as an unevaluated sum `hi + lo`, accurate to roughly twice the
    /// float precision. Used where a single rounding of a large coordinate
    /// would be amplified, such as phases `k x` with `|x|` in the thousands.
    pub fn to_f64_pair(&self) -> (f64, f64) {
        let (a, b, c) = (self.a as f64, self.b as f64, self.c as f64);
        let p_hi = b * SQRT_2;
        let p_lo = b.mul_add(SQRT_2, -p_hi) + b * SQRT_2_LO;
        let s = a + p_hi;
        let bb = s - a;
        let e = (a - (s - bb)) + (p_hi - bb);
        let (hi, lo) = fast_two_sum(s, e + p_lo);
        let q1 = hi / c;
        let r = (-q1).mul_add(c, hi);
        fast_two_sum(q1, (r + lo) / c)
    }

    pub fn signum(&self) -> Ordering {
        // i64 squares always fit in i128
        wide_sign(self.a as i128, self.b as i128).expect("i64 squares fit in i128")
    }

    pub fn abs(&self) -> Self {
        if self.signum() == Ordering::Less {
            -*self
        } else {
            *self
        }
    }

    pub fn checked_neg(&self) -> Result<Self> {
        Self::from_wide(-(self.a as i128), -(self.b as i128), self.c as i128)
    }

    pub fn checked_add(&self, rhs: &Self) -> Result<Self> {
        let (a1, b1, c1) = self.wide();
        let (a2, b2, c2) = rhs.wide();
        if c1 == c2 {
            return Self::from_wide(a1 + a2, b1 + b2, c1);
        }
        Self::from_wide(a1 * c2 + a2 * c1, b1 * c2 + b2 * c1, c1 * c2)
    }

    pub fn checked_sub(&self, rhs: &Self) -> Result<Self> {
        self.checked_add(&rhs.checked_neg()?)
    }

    pub fn checked_mul(&self, rhs: &Self) -> Result<Self> {
        let (a1, b1, c1) = self.wide();
        let (a2, b2, c2) = rhs.wide();
        let a = a1
            .checked_mul(a2)
            .zip(b1.checked_mul(b2).and_then(|v| v.checked_mul(2)))
            .and_then(|(x, y)| x.checked_add(y))
            .ok_or(Error::Overflow)?;
        let b = a1
            .checked_mul(b2)
            .zip(a2.checked_mul(b1))
            .and_then(|(x, y)| x.checked_add(y))
            .ok_or(Error::Overflow)?;
        Self::from_wide(a, b, c1 * c2)
    }

    /// Multiplicative inverse: `c (a - b sqrt2) / (a^2 - 2 b^2)`.
    pub fn checked_inv(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let (a, b, c) = self.wide();
        let norm = (a * a)
            .checked_sub(b.checked_mul(b).and_then(|v| v.checked_mul(2)).ok_or(Error::Overflow)?)
            .ok_or(Error::Overflow)?;
        let na = c.checked_mul(a).ok_or(Error::Overflow)?;
        let nb = c.checked_mul(-b).ok_or(Error::Overflow)?;
        Self::from_wide(na, nb, norm)
    }

    pub fn checked_div(&self, rhs: &Self) -> Result<Self> {
        self.checked_mul(&rhs.checked_inv()?)
    }

    /// Exact ordering of `self` against `other`.
    pub fn exact_compare(&self, other: &Self) -> Result<Ordering> {
        let (a1, b1, c1) = self.wide();
        let (a2, b2, c2) = other.wide();
        // c1, c2 > 0 so the sign of the cross-multiplied difference is the sign of x - y
        let a = a1 * c2 - a2 * c1;
        let b = b1 * c2 - b2 * c1;
        wide_sign(a, b).ok_or(Error::Overflow)
    }

    fn wide(&self) -> (i128, i128, i128) {
        (self.a as i128, self.b as i128, self.c as i128)
    }
}

fn fast_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

impl Default for AlgebraicNumber {
    fn default() -> Self {
        Self::ZERO
    }
}

impl PartialOrd for AlgebraicNumber {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Total order. Panics if the comparison overflows `i128`, which needs
/// coefficients near `2^62`; use [`AlgebraicNumber::exact_compare`] when
/// that is reachable.
impl Ord for AlgebraicNumber {
    fn cmp(&self, other: &Self) -> Ordering {
        self.exact_compare(other)
            .expect("overflow comparing elements of Q(sqrt2)")
    }
}

macro_rules! panicking_op {
    ($trait:ident, $method:ident, $checked:ident) => {
        impl $trait for AlgebraicNumber {
            type Output = AlgebraicNumber;

            fn $method(self, rhs: Self) -> Self {
                self.$checked(&rhs)
                    .expect(concat!("overflow in Q(sqrt2) ", stringify!($method)))
            }
        }
    };
}

panicking_op!(Add, add, checked_add);
panicking_op!(Sub, sub, checked_sub);
panicking_op!(Mul, mul, checked_mul);

impl Neg for AlgebraicNumber {
    type Output = AlgebraicNumber;

    fn neg(self) -> Self {
        self.checked_neg().expect("overflow in Q(sqrt2) neg")
    }
}

impl From<i64> for AlgebraicNumber {
    fn from(n: i64) -> Self {
        Self::integer(n)
    }
}

impl fmt::Display for AlgebraicNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.b < 0 { '-' } else { '+' };
        write!(f, "({}{}{}*sqrt2)/{}", self.a, sign, self.b.unsigned_abs(), self.c)
    }
}

impl fmt::Debug for AlgebraicNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Parses a plain decimal such as `-12.375` into an exact rational.
fn parse_decimal(s: &str) -> Option<AlgebraicNumber> {
    if s.is_empty() {
        return None;
    }
    let (int_part, frac_part) = match s.split_once('.') {
        Some((i, f)) => (i, f),
        None => (s, ""),
    };
    let digits_ok = |t: &str| t.chars().all(|ch| ch.is_ascii_digit());
    if !digits_ok(int_part) || !digits_ok(frac_part) || (int_part.is_empty() && frac_part.is_empty())
    {
        return None;
    }
    if frac_part.len() > 15 {
        return None;
    }
    let den = 10i64.checked_pow(frac_part.len() as u32)?;
    let whole: i64 = if int_part.is_empty() { 0 } else { int_part.parse().ok()? };
    let frac: i64 = if frac_part.is_empty() { 0 } else { frac_part.parse().ok()? };
    let num = whole.checked_mul(den)?.checked_add(frac)?;
    AlgebraicNumber::new(num, 0, den).ok()
}

fn parse_term(term: &str) -> Option<AlgebraicNumber> {
    if let Some(rest) = term.strip_prefix('-') {
        return parse_term(rest)?.checked_neg().ok();
    }
    if let Some((num, den)) = term.rsplit_once('/') {
        if let Ok(den) = den.parse::<i64>() {
            return parse_term(num)?.checked_div(&AlgebraicNumber::integer(den)).ok();
        }
    }
    if let Some(coef) = term.strip_suffix("sqrt2") {
        let coef = coef.strip_suffix('*').unwrap_or(coef);
        let c = if coef.is_empty() { AlgebraicNumber::ONE } else { parse_term(coef)? };
        c.checked_mul(&AlgebraicNumber::SQRT2).ok()
    } else {
        parse_decimal(term)
    }
}

fn parse_sum(s: &str) -> Option<AlgebraicNumber> {
    let mut total = AlgebraicNumber::ZERO;
    let mut start = 0;
    let bytes = s.as_bytes();
    let mut i = 0;
    while i <= bytes.len() {
        let at_split = i == bytes.len()
            || (i > start
                && (bytes[i] == b'+' || bytes[i] == b'-')
                && !matches!(bytes[i - 1], b'+' | b'-' | b'*'));
        if at_split {
            let chunk = &s[start..i];
            let (neg, body) = match chunk.as_bytes().first() {
                Some(b'-') => (true, &chunk[1..]),
                Some(b'+') => (false, &chunk[1..]),
                _ => (false, chunk),
            };
            let t = parse_term(body)?;
            total = if neg { total.checked_sub(&t).ok()? } else { total.checked_add(&t).ok()? };
            start = i;
        }
        i += 1;
    }
    Some(total)
}

/// Accepts `(a+b*sqrt2)/c`, sums of terms such as `3-2*sqrt2`, `1+sqrt2`,
/// `0.5`, `1/2`, `sqrt2/4`, and the spellings `sqrt(2)` and `√2`.
impl FromStr for AlgebraicNumber {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(s.to_string());
        let norm: String = s
            .replace("sqrt(2)", "sqrt2")
            .replace('√', "sqrt")
            .chars()
            .filter(|c| !c.is_whitespace())
            .collect();
        if norm.is_empty() {
            return Err(bad());
        }
        if let Some(rest) = norm.strip_prefix('(') {
            let (inner, den) = rest.split_once(")/").ok_or_else(bad)?;
            let num = parse_sum(inner).ok_or_else(bad)?;
            let den: i64 = den.parse().map_err(|_| bad())?;
            return num.checked_div(&AlgebraicNumber::integer(den)).map_err(|_| bad());
        }
        parse_sum(&norm).ok_or_else(bad)
    }
}

/// A real parameter or coordinate: exact in `Q(sqrt2)` when possible,
/// otherwise a float.
#[derive(Clone, Copy, Debug)]
pub enum Real {
    Exact(AlgebraicNumber),
    Float(f64),
}

impl Real {
    pub fn value(&self) -> f64 {
        match self {
            Real::Exact(x) => x.to_f64(),
            Real::Float(v) => *v,
        }
    }

    pub fn exact(&self) -> Option<AlgebraicNumber> {
        match self {
            Real::Exact(x) => Some(*x),
            Real::Float(_) => None,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Real::Exact(_))
    }

    /// Floats that are dyadic rationals with small denominators become exact.
    pub fn from_f64(v: f64) -> Self {
        if v.is_finite() && v.abs() < (1u64 << 40) as f64 {
            let scaled = v * 65536.0;
            if scaled.fract() == 0.0 {
                if let Ok(x) = AlgebraicNumber::new(scaled as i64, 0, 65536) {
                    return Real::Exact(x);
                }
            }
        }
        Real::Float(v)
    }

    fn combine(
        self,
        rhs: Real,
        exact: impl Fn(&AlgebraicNumber, &AlgebraicNumber) -> Result<AlgebraicNumber>,
        float: impl Fn(f64, f64) -> f64,
    ) -> Result<Real> {
        match (self, rhs) {
            (Real::Exact(x), Real::Exact(y)) => exact(&x, &y).map(Real::Exact),
            (x, y) => Ok(Real::Float(float(x.value(), y.value()))),
        }
    }

    pub fn checked_add(self, rhs: Real) -> Result<Real> {
        self.combine(rhs, AlgebraicNumber::checked_add, |x, y| x + y)
    }

    pub fn checked_sub(self, rhs: Real) -> Result<Real> {
        self.combine(rhs, AlgebraicNumber::checked_sub, |x, y| x - y)
    }

    pub fn checked_mul(self, rhs: Real) -> Result<Real> {
        self.combine(rhs, AlgebraicNumber::checked_mul, |x, y| x * y)
    }

    /// Exact when both sides are exact, by float value otherwise.
    pub fn total_cmp(&self, other: &Real) -> Ordering {
        match (self, other) {
            (Real::Exact(x), Real::Exact(y)) => x
                .exact_compare(y)
                .unwrap_or_else(|_| x.to_f64().total_cmp(&y.to_f64())),
            _ => self.value().total_cmp(&other.value()),
        }
    }

    /// Coincidence test used when merging atoms: exact equality for exact
    /// pairs, distance below `tol` otherwise.
    pub fn coincides(&self, other: &Real, tol: f64) -> bool {
        match (self, other) {
            (Real::Exact(x), Real::Exact(y)) => x == y,
            _ => (self.value() - other.value()).abs() < tol,
        }
    }
}

impl From<AlgebraicNumber> for Real {
    fn from(x: AlgebraicNumber) -> Self {
        Real::Exact(x)
    }
}

impl From<f64> for Real {
    fn from(v: f64) -> Self {
        Real::Float(v)
    }
}

impl PartialEq for Real {
    fn eq(&self, other: &Self) -> bool {
        self.total_cmp(other) == Ordering::Equal
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Real::Exact(x) => write!(f, "{x}"),
            Real::Float(v) => write!(f, "{v}"),
        }
    }
}

impl Neg for Real {
    type Output = Real;

    fn neg(self) -> Real {
        match self {
            Real::Exact(x) => Real::Exact(-x),
            Real::Float(v) => Real::Float(-v),
        }
    }
}

impl FromStr for Real {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Ok(x) = s.parse::<AlgebraicNumber>() {
            return Ok(Real::Exact(x));
        }
        s.trim()
            .parse::<f64>()
            .map(Real::Float)
            .map_err(|_| Error::Parse(s.to_string()))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RealRepr {
    Exact(AlgebraicNumber),
    Int(i64),
    Number(f64),
    Text(String),
}

impl Serialize for Real {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Real::Exact(x) => x.serialize(s),
            Real::Float(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(match RealRepr::deserialize(d)? {
            RealRepr::Exact(x) => Real::Exact(x),
            RealRepr::Int(n) => Real::Exact(AlgebraicNumber::integer(n)),
            RealRepr::Number(v) => Real::from_f64(v),
            RealRepr::Text(t) => t.parse().map_err(serde::de::Error::custom)?,
        })
    }
}

/// Coordinates `(m, n)` with `k = m/2 + n*sqrt2/4`, if `k` lies in the dual
/// module `L°`.
pub fn dual_coordinates(k: &AlgebraicNumber) -> Option<(i64, i64)> {
    // 4k = 2m + n sqrt2
    if 4 % k.c() != 0 {
        return None;
    }
    let f = 4 / k.c();
    let two_m = k.a().checked_mul(f)?;
    let n = k.b().checked_mul(f)?;
    if two_m % 2 != 0 {
        return None;
    }
    Some((two_m / 2, n))
}

pub fn is_in_dual(k: &AlgebraicNumber) -> bool {
    dual_coordinates(k).is_some()
}

/// The element `m/2 + n*sqrt2/4` of `L°`.
pub fn dual_element(m: i64, n: i64) -> Result<AlgebraicNumber> {
    AlgebraicNumber::new(m.checked_mul(2).ok_or(Error::Overflow)?, n, 4)
}

/// Conjugate bound used by [`enumerate_dual`], relative to `k_max`.
pub const DEFAULT_STAR_FACTOR: f64 = 2.0;

/// All `k` in `L°` with `|k| <= k_max` and `|k*| <= 2 k_max`, sorted ascending.
///
/// `L°` is dense in the line, so a bound on the conjugate is needed to make
/// the set finite.
pub fn enumerate_dual(k_max: f64) -> Result<Vec<AlgebraicNumber>> {
    enumerate_dual_box(k_max, DEFAULT_STAR_FACTOR * k_max)
}

/// All `k` in `L°` with `|k| <= k_max` and `|k*| <= star_max`, sorted ascending.
pub fn enumerate_dual_box(k_max: f64, star_max: f64) -> Result<Vec<AlgebraicNumber>> {
    for (name, v) in [("k_max", k_max), ("star_max", star_max)] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidInput(format!("{name} must be finite and >= 0, got {v}")));
        }
    }
    if k_max + star_max > COEFF_LIMIT as f64 / 8.0 {
        return Err(Error::Overflow);
    }
    // k + k* = m and k - k* = n sqrt2 / 2
    let n_max = ((k_max + star_max) * SQRT_2).ceil() as i64 + 1;
    let mut out = Vec::new();
    for n in -n_max..=n_max {
        let shift = n as f64 * SQRT_2;
        let lo = (-4.0 * k_max - shift).max(-4.0 * star_max + shift) / 2.0;
        let hi = (4.0 * k_max - shift).min(4.0 * star_max + shift) / 2.0;
        if lo > hi + 2.0 {
            continue;
        }
        for m in (lo.floor() as i64 - 1)..=(hi.ceil() as i64 + 1) {
            let k = dual_element(m, n)?;
            if k.to_f64().abs() <= k_max && k.star().to_f64().abs() <= star_max {
                out.push(k);
            }
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

//! Double-double arithmetic: an unevaluated sum `hi + lo` of two `f64`s with
//! `|lo| <= ulp(hi)/2`, giving about 106 bits (31–32 decimal digits).
//!
//! Algorithms follow the classic error-free transformations (Knuth two-sum,
//! FMA two-product) and the QD library's accurate addition, long division and
//! Newton-corrected square root. `exp` uses argument reduction by `ln 2` and
//! `2^-10` followed by a Taylor series; `ln` is one Newton step on `exp`.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::num::FpCategory;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Rem, Sub, SubAssign};
use std::str::FromStr;

use num_traits::{FromPrimitive, Num, NumCast, One, Signed, ToPrimitive, Zero};

use crate::real::{Precision, Real};

#[derive(Clone, Copy, Default)]
pub struct Dd {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

const LN2: Dd = Dd {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    /// 2^-104.
    pub const EPSILON: Dd = Dd {
        hi: 4.930_380_657_631_324e-32,
        lo: 0.0,
    };

    #[inline]
    pub const fn from_f64(v: f64) -> Dd {
        Dd { hi: v, lo: 0.0 }
    }

    /// Builds a value from two components, renormalising them.
    #[inline]
    pub fn from_parts(hi: f64, lo: f64) -> Dd {
        let (h, l) = two_sum(hi, lo);
        Dd { hi: h, lo: l }
    }

    #[inline]
    pub fn hi(self) -> f64 {
        self.hi
    }

    #[inline]
    pub fn lo(self) -> f64 {
        self.lo
    }

    #[inline]
    fn mul_f64(self, b: f64) -> Dd {
        let (p, e) = two_prod(self.hi, b);
        let e = e + self.lo * b;
        let (h, l) = quick_two_sum(p, e);
        Dd { hi: h, lo: l }
    }

    /// Multiplication by an exact power of two.
    #[inline]
    fn scale2(self, k: i32) -> Dd {
        let f = 2f64.powi(k);
        Dd {
            hi: self.hi * f,
            lo: self.lo * f,
        }
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            -self
        } else {
            self
        }
    }

    pub fn sqrt(self) -> Dd {
        if self.hi == 0.0 {
            return Dd::ZERO;
        }
        if self.hi < 0.0 {
            return Dd::from_f64(f64::NAN);
        }
        if !self.hi.is_finite() {
            return self;
        }
        let x = 1.0 / self.hi.sqrt();
        let ax = self.hi * x;
        let (p, e) = two_prod(ax, ax);
        let r = self - Dd::from_parts(p, e);
        Dd::from_f64(ax) + Dd::from_f64(r.hi * (x * 0.5))
    }

    pub fn exp(self) -> Dd {
        if self.hi > 709.7 {
            return Dd::from_f64(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Dd::ZERO;
        }
        if self.hi == 0.0 && self.lo == 0.0 {
            return Dd::ONE;
        }
        if !self.hi.is_finite() {
            return Dd::from_f64(self.hi.exp());
        }
        let m = (self.hi / LN2.hi + 0.5).floor();
        let r = (self - LN2.mul_f64(m)).scale2(-10);
        // expm1(r) by Taylor series; |r| < 3.4e-4 so 11 terms reach 2^-106.
        let mut term = r;
        let mut sum = r;
        let mut k = 2.0;
        loop {
            term = term * r / Dd::from_f64(k);
            sum += term;
            if term.hi.abs() < 1e-36 * sum.hi.abs().max(1e-300) || k > 30.0 {
                break;
            }
            k += 1.0;
        }
        // expm1(2r) = 2 expm1(r) + expm1(r)^2, ten times.
        for _ in 0..10 {
            sum = sum.scale2(1) + sum * sum;
        }
        let e = sum + Dd::ONE;
        let mi = m as i32;
        // Split the power of two so neither factor overflows.
        let h = mi / 2;
        e.scale2(h).scale2(mi - h)
    }

    pub fn ln(self) -> Dd {
        if self.hi <= 0.0 {
            return Dd::from_f64(if self.hi == 0.0 { f64::NEG_INFINITY } else { f64::NAN });
        }
        if !self.hi.is_finite() {
            return self;
        }
        let x = Dd::from_f64(self.hi.ln());
        x + self * (-x).exp() - Dd::ONE
    }

    pub fn powi(self, n: i32) -> Dd {
        if n == 0 {
            return Dd::ONE;
        }
        let mut base = self;
        let mut e = n.unsigned_abs();
        let mut acc = Dd::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            e >>= 1;
        }
        if n < 0 {
            Dd::ONE / acc
        } else {
            acc
        }
    }

    pub fn floor(self) -> Dd {
        let hi = self.hi.floor();
        if hi == self.hi {
            Dd::from_parts(hi, self.lo.floor())
        } else {
            Dd::from_f64(hi)
        }
    }

    pub fn trunc(self) -> Dd {
        if self.hi >= 0.0 {
            self.floor()
        } else {
            -(-self).floor()
        }
    }

    pub fn is_finite(self) -> bool {
        self.hi.is_finite()
    }

    pub fn is_nan(self) -> bool {
        self.hi.is_nan()
    }

    /// Scientific notation with `digits` significant digits.
    pub fn to_sci(self, digits: usize) -> String {
        match self.hi.classify() {
            FpCategory::Nan => return "NaN".into(),
            FpCategory::Infinite => return if self.hi > 0.0 { "inf".into() } else { "-inf".into() },
            FpCategory::Zero => return format!("{:.*}e0", digits.saturating_sub(1), 0.0),
            _ => {}
        }
        let digits = digits.clamp(1, 34);
        let neg = self.hi < 0.0;
        let mut v = self.abs();
        let mut e10 = v.hi.log10().floor() as i32;
        v = v / Dd::from_f64(10.0).powi(e10);
        if v.hi >= 10.0 {
            v = v / Dd::from_f64(10.0);
            e10 += 1;
        } else if v.hi < 1.0 {
            v = v * Dd::from_f64(10.0);
            e10 -= 1;
        }
        let mut ds: Vec<u8> = Vec::with_capacity(digits + 1);
        for _ in 0..=digits {
            let d = v.floor().as_f64().clamp(0.0, 9.0);
            ds.push(d as u8);
            v = (v - Dd::from_f64(d)) * Dd::from_f64(10.0);
        }
        // round half up on the guard digit
        if ds[digits] >= 5 {
            let mut i = digits;
            loop {
                if i == 0 {
                    ds.insert(0, 1);
                    e10 += 1;
                    break;
                }
                i -= 1;
                if ds[i] == 9 {
                    ds[i] = 0;
                } else {
                    ds[i] += 1;
                    break;
                }
            }
        }
        ds.truncate(digits);
        let mut s = String::with_capacity(digits + 8);
        if neg {
            s.push('-');
        }
        s.push((b'0' + ds[0]) as char);
        if digits > 1 {
            s.push('.');
            for d in &ds[1..] {
                s.push((b'0' + d) as char);
            }
        }
        s.push('e');
        s.push_str(&e10.to_string());
        s
    }
}

impl From<f64> for Dd {
    fn from(v: f64) -> Dd {
        Dd::from_f64(v)
    }
}

impl From<i32> for Dd {
    fn from(v: i32) -> Dd {
        Dd::from_f64(v as f64)
    }
}

impl Neg for Dd {
    type Output = Dd;
    #[inline]
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, b: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let s2 = s2 + t1;
        let (s1, s2) = quick_two_sum(s1, s2);
        let s2 = s2 + t2;
        let (h, l) = quick_two_sum(s1, s2);
        Dd { hi: h, lo: l }
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (h, l) = quick_two_sum(p, e);
        Dd { hi: h, lo: l }
    }
}

impl Div for Dd {
    type Output = Dd;
    #[inline]
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        if !q1.is_finite() {
            return Dd::from_f64(q1);
        }
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (h, l) = quick_two_sum(q1, q2);
        Dd { hi: h, lo: l } + Dd::from_f64(q3)
    }
}

impl Rem for Dd {
    type Output = Dd;
    fn rem(self, b: Dd) -> Dd {
        self - b * (self / b).trunc()
    }
}

macro_rules! assign_op {
    ($tr:ident, $f:ident, $op:tt) => {
        impl $tr for Dd {
            #[inline]
            fn $f(&mut self, b: Dd) {
                *self = *self $op b;
            }
        }
    };
}
assign_op!(AddAssign, add_assign, +);
assign_op!(SubAssign, sub_assign, -);
assign_op!(MulAssign, mul_assign, *);
assign_op!(DivAssign, div_assign, /);

impl Sum for Dd {
    fn sum<I: Iterator<Item = Dd>>(iter: I) -> Dd {
        iter.fold(Dd::ZERO, |a, b| a + b)
    }
}

impl PartialEq for Dd {
    fn eq(&self, o: &Dd) -> bool {
        self.hi == o.hi && self.lo == o.lo
    }
}

impl PartialOrd for Dd {
    fn partial_cmp(&self, o: &Dd) -> Option<Ordering> {
        match self.hi.partial_cmp(&o.hi)? {
            Ordering::Equal => self.lo.partial_cmp(&o.lo),
            ord => Some(ord),
        }
    }
}

impl fmt::Debug for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dd({})", self.to_sci(32))
    }
}

impl fmt::Display for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = f.precision().map(|p| p + 1).unwrap_or(32);
        f.write_str(&self.to_sci(digits))
    }
}

impl fmt::LowerExp for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Parse error for decimal strings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseDdError;

impl fmt::Display for ParseDdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("invalid decimal literal")
    }
}

impl std::error::Error for ParseDdError {}

impl FromStr for Dd {
    type Err = ParseDdError;

    /// Decimal literal such as `-1.25e-3`, accumulated digit by digit in
    /// double-double so inputs keep all 32 digits.
    fn from_str(s: &str) -> Result<Dd, ParseDdError> {
        let s = s.trim();
        let (neg, body) = match s.as_bytes().first() {
            Some(b'-') => (true, &s[1..]),
            Some(b'+') => (false, &s[1..]),
            _ => (false, s),
        };
        let (mant, exp) = match body.find(['e', 'E']) {
            Some(i) => (
                &body[..i],
                body[i + 1..].parse::<i32>().map_err(|_| ParseDdError)?,
            ),
            None => (body, 0),
        };
        let mut v = Dd::ZERO;
        let mut frac = 0i32;
        let mut seen_dot = false;
        let mut any = false;
        for ch in mant.chars() {
            match ch {
                '0'..='9' => {
                    v = v.mul_f64(10.0) + Dd::from_f64((ch as u8 - b'0') as f64);
                    if seen_dot {
                        frac += 1;
                    }
                    any = true;
                }
                '.' if !seen_dot => seen_dot = true,
                _ => return Err(ParseDdError),
            }
        }
        if !any {
            return Err(ParseDdError);
        }
        let e = exp - frac;
        let ten = Dd::from_f64(10.0);
        let v = if e >= 0 { v * ten.powi(e) } else { v / ten.powi(-e) };
        Ok(if neg { -v } else { v })
    }
}

impl Zero for Dd {
    fn zero() -> Dd {
        Dd::ZERO
    }
    fn is_zero(&self) -> bool {
        self.hi == 0.0
    }
}

impl One for Dd {
    fn one() -> Dd {
        Dd::ONE
    }
}

impl Num for Dd {
    type FromStrRadixErr = ParseDdError;
    fn from_str_radix(s: &str, radix: u32) -> Result<Dd, ParseDdError> {
        if radix != 10 {
            return Err(ParseDdError);
        }
        s.parse()
    }
}

impl Signed for Dd {
    fn abs(&self) -> Dd {
        Dd::abs(*self)
    }
    fn abs_sub(&self, o: &Dd) -> Dd {
        if *self <= *o {
            Dd::ZERO
        } else {
            *self - *o
        }
    }
    fn signum(&self) -> Dd {
        if self.hi > 0.0 {
            Dd::ONE
        } else if self.hi < 0.0 {
            -Dd::ONE
        } else {
            Dd::ZERO
        }
    }
    fn is_positive(&self) -> bool {
        self.hi > 0.0
    }
    fn is_negative(&self) -> bool {
        self.hi < 0.0
    }
}

impl ToPrimitive for Dd {
    fn to_i64(&self) -> Option<i64> {
        let t = self.trunc();
        (t.hi as i128 + t.lo as i128).try_into().ok()
    }
    fn to_u64(&self) -> Option<u64> {
        let t = self.trunc();
        (t.hi as i128 + t.lo as i128).try_into().ok()
    }
    fn to_f64(&self) -> Option<f64> {
        Some(self.hi + self.lo)
    }
}

impl NumCast for Dd {
    fn from<T: ToPrimitive>(n: T) -> Option<Dd> {
        // integers beyond 2^53 keep their low bits
        if let Some(i) = n.to_i64() {
            let hi = i as f64;
            let lo = (i - hi as i64) as f64;
            return Some(Dd::from_parts(hi, lo));
        }
        n.to_f64().map(Dd::from_f64)
    }
}

impl FromPrimitive for Dd {
    fn from_i64(n: i64) -> Option<Dd> {
        <Dd as NumCast>::from(n)
    }
    fn from_u64(n: u64) -> Option<Dd> {
        let hi = n as f64;
        let lo = (n as i128 - hi as i128) as f64;
        Some(Dd::from_parts(hi, lo))
    }
    fn from_f64(n: f64) -> Option<Dd> {
        Some(Dd::from_f64(n))
    }
}

impl Real for Dd {
    const PRECISION: Precision = Precision::Extended;
    #[inline]
    fn of(v: f64) -> Dd {
        Dd::from_f64(v)
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self.hi + self.lo
    }
    #[inline]
    fn sqrt(self) -> Dd {
        Dd::sqrt(self)
    }
    fn exp(self) -> Dd {
        Dd::exp(self)
    }
    fn ln(self) -> Dd {
        Dd::ln(self)
    }
    fn powi(self, n: i32) -> Dd {
        Dd::powi(self, n)
    }
    fn floor(self) -> Dd {
        Dd::floor(self)
    }
    fn is_finite(self) -> bool {
        Dd::is_finite(self)
    }
    fn epsilon() -> Dd {
        Dd::EPSILON
    }
}

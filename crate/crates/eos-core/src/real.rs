//! Scalar abstraction shared by every model in the crate.
//!
//! The math only needs field arithmetic plus `sqrt`, `exp`, `ln` and integer
//! powers, so `Real` asks for exactly that on top of the `num-traits` basics.
//! `num_traits::Float` is deliberately not required: it drags in
//! trigonometry and bit-level decoding that a double-double type cannot
//! provide at full accuracy.

use std::fmt;
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, Neg, SubAssign};

use num_traits::{FromPrimitive, Num, NumCast, Signed};

/// Working precision of a scalar type, recorded in run manifests.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    Single,
    Double,
    Extended,
}

impl Precision {
    pub fn as_str(self) -> &'static str {
        match self {
            Precision::Single => "single",
            Precision::Double => "double",
            Precision::Extended => "extended",
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub trait Real:
    Copy
    + Send
    + Sync
    + 'static
    + fmt::Debug
    + fmt::Display
    + fmt::LowerExp
    + PartialOrd
    + Num
    + NumCast
    + FromPrimitive
    + Signed
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
{
    const PRECISION: Precision;

    /// Conversion from an `f64` literal (exact except for `f32`).
    fn of(v: f64) -> Self;
    /// Nearest `f64`.
    fn as_f64(self) -> f64;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn floor(self) -> Self;
    fn is_finite(self) -> bool;
    /// Unit roundoff of the representation.
    fn epsilon() -> Self;

    /// Fourth root, the exponent that appears throughout the reparameterisation.
    #[inline]
    fn root4(self) -> Self {
        self.sqrt().sqrt()
    }
    #[inline]
    fn sq(self) -> Self {
        self * self
    }
    #[inline]
    fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }
    #[inline]
    fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }
    /// `self` raised to a real power (positive base only).
    #[inline]
    fn powf(self, p: Self) -> Self {
        (self.ln() * p).exp()
    }
}

macro_rules! impl_real_prim {
    ($t:ty, $prec:expr) => {
        impl Real for $t {
            const PRECISION: Precision = $prec;
            #[inline]
            fn of(v: f64) -> Self {
                v as $t
            }
            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }
            #[inline]
            fn sqrt(self) -> Self {
                <$t>::sqrt(self)
            }
            #[inline]
            fn exp(self) -> Self {
                <$t>::exp(self)
            }
            #[inline]
            fn ln(self) -> Self {
                <$t>::ln(self)
            }
            #[inline]
            fn powi(self, n: i32) -> Self {
                <$t>::powi(self, n)
            }
            #[inline]
            fn floor(self) -> Self {
                <$t>::floor(self)
            }
            #[inline]
            fn is_finite(self) -> bool {
                <$t>::is_finite(self)
            }
            #[inline]
            fn epsilon() -> Self {
                <$t>::EPSILON
            }
            #[inline]
            fn powf(self, p: Self) -> Self {
                <$t>::powf(self, p)
            }
        }
    };
}

impl_real_prim!(f32, Precision::Single);
impl_real_prim!(f64, Precision::Double);

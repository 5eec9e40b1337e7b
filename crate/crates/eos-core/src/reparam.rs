//! Coordinates along and across the minima manifold.
//!
//! `(c, d) = (sqrt(x^2 - y^2), xy)` on the quadrant `x > y > 0`, and
//! `(a, b) = (c - c̆, d - 1)` with `c̆ = (eta^-2 - 4)^(1/4)`, so that the
//! eta-EoS minimum sits at the origin. Also: the parabola residual `ξ`, the
//! quantity `δ` that drives the across-manifold update, and the three
//! closed-form solution families of the continuous-time approximation.

use crate::error::{domain, Result};
use crate::real::Real;
use crate::scalar_model::Xy;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cd<T> {
    pub c: T,
    pub d: T,
}

/// Offsets from the eta-EoS minimum: `a` along the manifold, `b` across it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ab<T> {
    pub a: T,
    pub b: T,
}

impl<T: Real> Ab<T> {
    pub fn new(a: T, b: T) -> Self {
        Ab { a, b }
    }

    pub fn to_f64(self) -> Ab<f64> {
        Ab {
            a: self.a.as_f64(),
            b: self.b.as_f64(),
        }
    }
}

pub fn xy_to_cd<T: Real>(s: Xy<T>) -> Result<Cd<T>> {
    if !(s.y > T::zero() && s.x > s.y) {
        return domain(format!("xy_to_cd needs x > y > 0, got ({}, {})", s.x, s.y));
    }
    // (x − y)(x + y) keeps full relative accuracy when x ≈ y
    Ok(Cd {
        c: ((s.x - s.y) * (s.x + s.y)).sqrt(),
        d: s.x * s.y,
    })
}

pub fn cd_to_xy<T: Real>(s: Cd<T>) -> Result<Xy<T>> {
    if !(s.c > T::zero() && s.d > T::zero()) {
        return domain(format!("cd_to_xy needs c, d > 0, got ({}, {})", s.c, s.d));
    }
    let c2 = s.c * s.c;
    let x = ((c2 + (c2 * c2 + T::of(4.0) * s.d * s.d).sqrt()) / T::of(2.0)).sqrt();
    Ok(Xy { x, y: s.d / x })
}

/// `c̆ = (eta^-2 - 4)^(1/4)`, the `c` coordinate of the eta-EoS minimum.
pub fn c_breve<T: Real>(eta: T) -> T {
    (T::one() - T::of(4.0) * eta * eta).root4() / eta.sqrt()
}

/// `κ c̆ = (1 - 4κ^4)^(1/4)`, the O(1) form used inside the maps.
pub fn kappa_c_breve<T: Real>(kappa: T) -> T {
    (T::one() - T::of(4.0) * kappa.powi(4)).root4()
}

pub fn cd_to_ab<T: Real>(s: Cd<T>, eta: T) -> Ab<T> {
    Ab {
        a: s.c - c_breve(eta),
        b: s.d - T::one(),
    }
}

pub fn ab_to_cd<T: Real>(s: Ab<T>, eta: T) -> Cd<T> {
    Cd {
        c: s.a + c_breve(eta),
        d: s.b + T::one(),
    }
}

pub fn xy_to_ab<T: Real>(s: Xy<T>, eta: T) -> Result<Ab<T>> {
    Ok(cd_to_ab(xy_to_cd(s)?, eta))
}

pub fn ab_to_xy<T: Real>(s: Ab<T>, eta: T) -> Result<Xy<T>> {
    cd_to_xy(ab_to_cd(s, eta))
}

/// Signed parabola residual `b^2 - aκ/2 - κ^4/16`.
pub fn xi<T: Real>(s: Ab<T>, kappa: T) -> T {
    s.b * s.b - s.a * kappa / T::of(2.0) - kappa.powi(4) / T::of(16.0)
}

/// `δ = sqrt(4κ^4 (1+b)^2 + (aκ + (1-4κ^4)^(1/4))^4)`, which equals
/// `eta (x^2 + y^2)`.
pub fn delta_exact<T: Real>(s: Ab<T>, kappa: T) -> T {
    let k4 = kappa.powi(4);
    let u = s.a * kappa + kappa_c_breve(kappa);
    let u2 = u * u;
    (T::of(4.0) * k4 * (T::one() + s.b).sq() + u2 * u2).sqrt()
}

/// `1 + 2aκ + a^2κ^2 + 2b(2+b)κ^4`; accurate to O(κ^5) for `κ < 0.1`,
/// `|a| < 1/κ`, `|b| < 1`.
pub fn delta_taylor<T: Real>(s: Ab<T>, kappa: T) -> T {
    let two = T::of(2.0);
    let ak = s.a * kappa;
    T::one() + two * ak + ak * ak + two * s.b * (two + s.b) * kappa.powi(4)
}

/// Solution families of the continuous-time approximation
/// `db/da = (4b^3 - 2abκ) / (b^2 κ^3)` of the two-step dynamics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OdeFamily {
    /// `b = sqrt(2/eta) sqrt(gamma - a^2)`
    Ellipse,
    /// `b = gamma exp(4a eta^(-3/2))`
    Exponential,
    /// `b = sqrt(aκ/2 + eta^2/16 + gamma exp(8a eta^(-3/2)))`; `gamma = 0`
    /// is the attracting parabola `ξ = 0`.
    ParabolaFamily,
}

/// Evaluates the positive branch of `family` at along-manifold offset
/// `along` (the `a` coordinate), returning the across offset.
pub fn ode_family<T: Real>(family: OdeFamily, gamma: T, along: T, eta: T) -> Result<T> {
    let kappa = eta.sqrt();
    let k3 = eta * kappa;
    match family {
        OdeFamily::Ellipse => {
            let r = gamma - along * along;
            if r < T::zero() {
                return domain("ellipse family needs gamma >= a^2");
            }
            Ok((T::of(2.0) / eta).sqrt() * r.sqrt())
        }
        OdeFamily::Exponential => Ok(gamma * (T::of(4.0) * along / k3).exp()),
        OdeFamily::ParabolaFamily => {
            let mut r = along * kappa / T::of(2.0) + eta * eta / T::of(16.0);
            if gamma != T::zero() {
                r += gamma * (T::of(8.0) * along / k3).exp();
            }
            if r < T::zero() {
                return domain("parabola family radicand is negative");
            }
            Ok(r.sqrt())
        }
    }
}

//! The quartic scalar model `L(x, y) = (1 - x^2 y^2)^2 / 4`, its exact
//! gradient-descent map, Hessian spectrum and the eta-EoS minimum; plus the
//! quadratic model `(1 - xy)^2 / 2` used as a contrast.

use crate::error::{domain, Result};
use crate::real::Real;

/// A point of the scalar model. The phase analysis assumes `x > y > 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Xy<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Xy<T> {
    pub fn new(x: T, y: T) -> Self {
        Xy { x, y }
    }

    pub fn to_f64(self) -> Xy<f64> {
        Xy {
            x: self.x.as_f64(),
            y: self.y.as_f64(),
        }
    }

    pub fn from_f64(s: Xy<f64>) -> Self {
        Xy {
            x: T::of(s.x),
            y: T::of(s.y),
        }
    }
}

/// Absolute coordinate size past which a run is declared diverged.
pub const DIVERGENCE_GUARD: f64 = 1e12;

pub fn loss<T: Real>(s: Xy<T>) -> T {
    let p = s.x * s.y;
    (T::one() - p * p).sq() / T::of(4.0)
}

pub fn gradient<T: Real>(s: Xy<T>) -> (T, T) {
    let p = s.x * s.y;
    let r = p * p - T::one();
    (s.x * s.y * s.y * r, s.x * s.x * s.y * r)
}

/// One GD step; both coordinates use the same `(x_t, y_t)`.
pub fn gd_step<T: Real>(s: Xy<T>, eta: T) -> Xy<T> {
    let (gx, gy) = gradient(s);
    Xy {
        x: s.x - eta * gx,
        y: s.y - eta * gy,
    }
}

/// Eigenvalues of the Hessian of `(1 - xyzw)^2 / 2` at `(x, x, y, y)`,
/// returned as `[λ1, λ2, λ3, λ4]` with `λ1 >= λ2`; `λ1` is the sharpness
/// that tracks the stability threshold.
pub fn hessian_eigenvalues<T: Real>(s: Xy<T>) -> [T; 4] {
    let g = s.x * s.y;
    let g2 = g * g;
    let sum = s.x * s.x + s.y * s.y;
    let three = T::of(3.0);
    let tr = sum * (three * g2 - T::one());
    let disc = (sum * sum * (T::one() - three * g2).sq()
        + T::of(4.0) * g2 * (three - T::of(10.0) * g2 + T::of(7.0) * g2 * g2))
        .sqrt();
    let half = T::of(0.5);
    // The remaining pair carries (1 - γ²), not (1 - γ): checked against the
    // numeric Hessian in the tests.
    let w = T::one() - g2;
    [half * (tr + disc), half * (tr - disc), s.x * s.x * w, s.y * s.y * w]
}

pub fn sharpness<T: Real>(s: Xy<T>) -> T {
    hessian_eigenvalues(s)[0]
}

/// The global minimum whose sharpness is exactly `2 / eta`.
pub fn eos_minimum<T: Real>(eta: T) -> Result<Xy<T>> {
    if !(eta > T::zero() && eta < T::of(0.5)) {
        return domain(format!("eos_minimum needs 0 < eta < 1/2, got {eta}"));
    }
    let inv = T::one() / eta;
    let u = (inv * inv - T::of(4.0)).sqrt() + inv;
    let r2 = T::of(2.0).sqrt();
    let su = u.sqrt();
    Ok(Xy {
        x: su / r2,
        y: r2 / su,
    })
}

pub fn degree2_loss<T: Real>(s: Xy<T>) -> T {
    (T::one() - s.x * s.y).sq() / T::of(2.0)
}

/// GD on `(1 - xy)^2 / 2`.
pub fn degree2_gd_step<T: Real>(s: Xy<T>, eta: T) -> Xy<T> {
    let r = T::one() - s.x * s.y;
    Xy {
        x: s.x + eta * s.y * r,
        y: s.y + eta * s.x * r,
    }
}

/// Sharpness of the quadratic model at a point on `xy = 1` is `x^2 + y^2`;
/// elsewhere this is the top eigenvalue of its 2x2 Hessian.
pub fn degree2_sharpness<T: Real>(s: Xy<T>) -> T {
    // H = [[y², 2xy − 1], [2xy − 1, x²]]
    let a = s.y * s.y;
    let c = s.x * s.x;
    let b = T::of(2.0) * s.x * s.y - T::one();
    let half = T::of(0.5);
    half * (a + c) + (half * half * (a - c).sq() + b * b).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    Diverged,
    MaxSteps,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Converged => "converged",
            StopReason::Diverged => "diverged",
            StopReason::MaxSteps => "max_steps",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct StopSpec<T> {
    /// Stop once the loss drops strictly below this value.
    pub loss_below: T,
    /// Keep every n-th step in the record (0 keeps only the endpoints).
    pub record_every: usize,
}

impl<T: Real> StopSpec<T> {
    pub fn new(loss_below: T) -> Self {
        StopSpec {
            loss_below,
            record_every: 1,
        }
    }

    pub fn quiet(loss_below: T) -> Self {
        StopSpec {
            loss_below,
            record_every: 0,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct StepRecord<T> {
    pub step: usize,
    pub state: Xy<T>,
    pub loss: T,
    pub sharpness: T,
}

#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    pub records: Vec<StepRecord<T>>,
    pub last: StepRecord<T>,
    pub stop: StopReason,
}

impl<T: Real> Trajectory<T> {
    pub fn steps(&self) -> usize {
        self.last.step
    }
}

fn diverged<T: Real>(s: Xy<T>) -> bool {
    let g = T::of(DIVERGENCE_GUARD);
    !(s.x.is_finite() && s.y.is_finite()) || s.x.abs() > g || s.y.abs() > g
}

/// Iterates [`gd_step`] from `s0`. Stops on `loss < stop.loss_below`,
/// divergence, or after `max_steps` steps.
pub fn run_trajectory<T: Real>(s0: Xy<T>, eta: T, max_steps: usize, stop: StopSpec<T>) -> Trajectory<T> {
    let rec = |step, state| StepRecord {
        step,
        state,
        loss: loss(state),
        sharpness: sharpness(state),
    };
    let mut records = Vec::new();
    let mut s = s0;
    let mut step = 0usize;
    let reason = loop {
        if diverged(s) {
            break StopReason::Diverged;
        }
        let l = loss(s);
        if stop.record_every > 0 && step % stop.record_every == 0 {
            records.push(rec(step, s));
        }
        if l < stop.loss_below {
            break StopReason::Converged;
        }
        if step >= max_steps {
            break StopReason::MaxSteps;
        }
        s = gd_step(s, eta);
        step += 1;
    };
    let last = rec(step, s);
    if records.last().map(|r| r.step) != Some(step) {
        records.push(last);
    }
    Trajectory {
        records,
        last,
        stop: reason,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Dd;

    #[test]
    fn loss_examples() {
        assert_eq!(loss(Xy::new(1.0, 1.0)), 0.0);
        assert_eq!(loss(Xy::new(0.0, 0.0)), 0.25);
        assert_eq!(loss(Xy::new(2.0, 0.5)), 0.0);
    }

    #[test]
    fn gradient_examples() {
        assert_eq!(gradient(Xy::new(1.0, 1.0)), (0.0, 0.0));
        assert_eq!(gradient(Xy::new(0.0, 3.0)), (0.0, 0.0));
        // x y²(x²y²−1) = 1.2·0.44, x²y(x²y²−1) = 1.44·0.44
        let (gx, gy) = gradient(Xy::new(Dd::from(1.2), Dd::from(1.0)));
        assert!((gx.as_f64() - 0.528).abs() < 1e-15);
        assert!((gy.as_f64() - 0.6336).abs() < 1e-15);
    }

    #[test]
    fn step_examples() {
        assert_eq!(gd_step(Xy::new(1.0, 1.0), 0.3), Xy::new(1.0, 1.0));
        assert_eq!(gd_step(Xy::new(0.0, 0.0), 0.2), Xy::new(0.0, 0.0));
        let s = gd_step(Xy::new(2.3f64, 0.43), 0.2);
        // reference values from a 40-digit evaluation of the update
        assert!((s.x - 2.301_860_896_466).abs() < 1e-14, "{s:?}");
        assert!((s.y - 0.439_953_632_26).abs() < 1e-14, "{s:?}");
    }

    #[test]
    fn eos_minimum_eta_02() {
        let m = eos_minimum(0.2f64).unwrap();
        assert!((m.x - 2.188_901_059_316_733).abs() < 1e-12);
        assert!((m.x * m.y - 1.0).abs() < 1e-15);
        assert!((sharpness(m) - 10.0).abs() < 1e-12);
        assert!(eos_minimum(0.5).is_err());
        assert!(eos_minimum(-0.1).is_err());
    }

    #[test]
    fn degree2_examples() {
        assert_eq!(degree2_gd_step(Xy::new(1.0, 1.0), 0.2), Xy::new(1.0, 1.0));
        assert_eq!(degree2_gd_step(Xy::new(2.0, 0.5), 0.2), Xy::new(2.0, 0.5));
        let s = degree2_gd_step(Xy::new(1.5f64, 0.5), 0.1);
        assert!((s.x - 1.5125).abs() < 1e-15 && (s.y - 0.5375).abs() < 1e-15);
        assert!((degree2_sharpness(Xy::new(2.0f64, 0.5)) - 4.25).abs() < 1e-14);
    }

    #[test]
    fn trajectory_stop_reasons() {
        let t = run_trajectory(Xy::new(1.0, 1.0), 0.2, 10, StopSpec::new(1e-12));
        assert_eq!(t.stop, StopReason::Converged);
        assert_eq!(t.steps(), 0);
        assert_eq!(t.last.loss, 0.0);
        let t = run_trajectory(Xy::new(3.0, 3.0), 0.4, 1000, StopSpec::quiet(1e-12));
        assert_eq!(t.stop, StopReason::Diverged);
        let t = run_trajectory(Xy::new(2.6, 1.001 / 2.6), 0.2, 50_000, StopSpec::quiet(0.0));
        assert_eq!(t.stop, StopReason::MaxSteps);
        let s = t.last.sharpness;
        assert!(s < 10.0 && s > 9.9, "{s}");
    }
}

//! Exact one- and two-step maps in `(a, b)` coordinates, the polynomial
//! two-step approximations, the regime predicates under which the
//! approximation lemmas hold, and residual checks against their bounds.
//!
//! The exact map is written so that no step subtracts two O(1/κ) numbers:
//! `a' = a s - c̆ X / (1 + s)` with `s = sqrt(1 - X)`, instead of the
//! textbook `(a + c̆) s - c̆`. With that form even double precision resolves
//! the residuals at moderate κ; the strict bounds still need [`crate::Dd`].

use std::fmt;

use rand::Rng;

use crate::error::{domain, Error, Result};
use crate::real::Real;
use crate::reparam::{ab_to_xy, kappa_c_breve, xi, xy_to_ab, Ab};
use crate::scalar_model::gd_step;

/// The exact `(a, b)` map at a fixed κ with its constants precomputed; use
/// this for long runs.
#[derive(Clone, Copy, Debug)]
pub struct AbStepper<T> {
    pub kappa: T,
    k4: T,
    /// `(1 - 4κ⁴)^(1/4)`
    kcb: T,
    /// `c̆ = kcb / κ`
    cb: T,
}

impl<T: Real> AbStepper<T> {
    pub fn new(kappa: T) -> Self {
        let kcb = kappa_c_breve(kappa);
        AbStepper {
            kappa,
            k4: kappa.powi(4),
            kcb,
            cb: kcb / kappa,
        }
    }

    pub fn step(&self, s: Ab<T>) -> Result<Ab<T>> {
        let one = T::one();
        let p = one + s.b; // d
        let q = s.b * (T::of(2.0) + s.b); // d² − 1
        let pq = p * q; // d³ − d
        let x = self.k4 * pq * pq;
        if x > one {
            return domain(format!("1 - κ⁴(d³ - d)² < 0 at (a, b) = ({}, {})", s.a, s.b));
        }
        let sq = (one - x).sqrt();
        let a = s.a * sq - self.cb * x / (one + sq);
        // δ = sqrt(4κ⁴d² + (aκ + κc̆)⁴)
        let u = s.a * self.kappa + self.kcb;
        let u2 = u * u;
        let delta = (T::of(4.0) * self.k4 * p * p + u2 * u2).sqrt();
        let b = s.b + p * p * pq * q * self.k4 - pq * delta;
        Ok(Ab { a, b })
    }

    pub fn two_step(&self, s: Ab<T>) -> Result<Ab<T>> {
        self.step(self.step(s)?)
    }
}

/// Exact GD step expressed in `(a, b)`.
pub fn ab_one_step_exact<T: Real>(s: Ab<T>, kappa: T) -> Result<Ab<T>> {
    AbStepper::new(kappa).step(s)
}

pub fn ab_two_step_exact<T: Real>(s: Ab<T>, kappa: T) -> Result<Ab<T>> {
    AbStepper::new(kappa).two_step(s)
}

/// The same step taken through `(x, y)`: `ab -> xy -> gd_step -> ab`.
/// Used as an independent route when checking [`ab_one_step_exact`].
pub fn ab_one_step_via_xy<T: Real>(s: Ab<T>, kappa: T) -> Result<Ab<T>> {
    let eta = kappa * kappa;
    xy_to_ab(gd_step(ab_to_xy(s, eta)?, eta), eta)
}

/// `a - 2b²κ³`
pub fn a_one_step_approx<T: Real>(s: Ab<T>, kappa: T) -> T {
    s.a - T::of(2.0) * s.b * s.b * kappa.powi(3)
}

/// `-b - 4abκ - 3b² - b³`
pub fn b_one_step_approx<T: Real>(s: Ab<T>, kappa: T) -> T {
    let b = s.b;
    -b - T::of(4.0) * s.a * b * kappa - T::of(3.0) * b * b - b * b * b
}

/// `b - 16b³ + 8abκ`
pub fn b_two_step_approx<T: Real>(s: Ab<T>, kappa: T) -> T {
    s.b - T::of(16.0) * s.b.powi(3) + T::of(8.0) * s.a * s.b * kappa
}

/// `a - 4b²κ³`
pub fn a_two_step_approx<T: Real>(s: Ab<T>, kappa: T) -> T {
    s.a - T::of(4.0) * s.b * s.b * kappa.powi(3)
}

/// `(1 - 32b²) ξ`
pub fn xi_two_step_approx<T: Real>(xi_val: T, b: T, _kappa: T) -> T {
    (T::one() - T::of(32.0) * b * b) * xi_val
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConditionId {
    /// Validity of the one-step expansions, parameterised by `eps`.
    OneStepDynamics { eps: f64 },
    DDeltaRegime,
    BLarge,
    BSmall,
    BMovementBounded,
    Phase1Shrink { delta: f64 },
}

/// Pure predicate for each regime. All inequalities are strict.
pub fn check_condition<T: Real>(id: ConditionId, kappa: T, a: T, b: T, k: T) -> bool {
    let one = T::one();
    let kinv = one / k;
    let aa = a.abs();
    let ab = b.abs();
    let in_open = |v: T, lo: T, hi: T| v > lo && v < hi;
    match id {
        ConditionId::OneStepDynamics { eps } => {
            let eps = T::of(eps);
            kappa > T::zero()
                && kappa < T::of(0.1).min(eps.root4())
                && aa < eps / kappa
                && ab < one.min(eps / (T::of(5.0) * kappa * kappa))
        }
        ConditionId::DDeltaRegime => {
            kappa > T::zero() && kappa < kinv && aa < kinv / kappa && ab < kinv
        }
        ConditionId::BLarge => {
            kappa > T::zero()
                && kappa < kinv
                && in_open(aa, kappa.powi(3), kinv * kinv / kappa)
                && in_open(ab, (aa * kappa).sqrt(), kinv)
        }
        ConditionId::BSmall => {
            kappa > T::zero()
                && kappa < kinv
                && in_open(aa, kappa.powi(3), kinv * kinv / kappa)
                && ab < ((aa * kappa).sqrt() / T::of(8.0).sqrt()).min(kinv)
        }
        ConditionId::BMovementBounded => {
            kappa > T::zero()
                && kappa < kinv
                && in_open(a, T::zero(), kinv * kinv / (T::of(4.0) * kappa))
                && ab < T::of(2.0) * (a * kappa).sqrt()
        }
        ConditionId::Phase1Shrink { delta } => {
            let delta = T::of(delta);
            kappa > T::zero()
                && kappa < delta * kinv / (T::of(80.0) * T::of(2.0).sqrt())
                && ab < T::of(8.0).sqrt() * kappa.powi(7).sqrt().sqrt()
                && aa < T::of(2.0) * kappa.powi(5).sqrt()
        }
    }
}

/// The bounds checked by [`verify_residual_bound`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LemmaId {
    /// `|a'' - (a - 4b²κ³)| < 3b²κ³`
    AMovement,
    /// `|b'' - (b - 16b³)| <= 14|b|³`
    BLarge,
    /// `|b'' - (b + 8abκ)| <= 7|abκ|`
    BSmall,
    /// `|b'' - b| < sqrt(aκ)/16`
    BMovement,
    /// `|ξ'' - (1 - 32b²) ξ| < δ b² κ⁴`
    XiRegime,
    /// `|ξ''| < (1 - 4κ^(7/2)) |ξ|` once `|ξ| > δκ⁴/16`
    XiShrink,
}

impl LemmaId {
    pub const ALL: [LemmaId; 6] = [
        LemmaId::AMovement,
        LemmaId::BLarge,
        LemmaId::BSmall,
        LemmaId::BMovement,
        LemmaId::XiRegime,
        LemmaId::XiShrink,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LemmaId::AMovement => "a_movement",
            LemmaId::BLarge => "b_large",
            LemmaId::BSmall => "b_small",
            LemmaId::BMovement => "b_movement",
            LemmaId::XiRegime => "xi_regime",
            LemmaId::XiShrink => "xi_shrink",
        }
    }

    pub fn parse(s: &str) -> Option<LemmaId> {
        LemmaId::ALL.into_iter().find(|l| l.name() == s)
    }

    /// The regime the lemma is stated under.
    pub fn condition(self, delta: f64) -> ConditionId {
        match self {
            LemmaId::AMovement => ConditionId::DDeltaRegime,
            LemmaId::BLarge => ConditionId::BLarge,
            LemmaId::BSmall => ConditionId::BSmall,
            LemmaId::BMovement => ConditionId::BMovementBounded,
            LemmaId::XiRegime | LemmaId::XiShrink => ConditionId::Phase1Shrink { delta },
        }
    }

    /// Largest κ for which the lemma's regime is non-empty.
    pub fn kappa_ceiling(self, k: f64, delta: f64) -> f64 {
        match self {
            LemmaId::XiRegime | LemmaId::XiShrink => delta / (k * 80.0 * 2f64.sqrt()),
            _ => 1.0 / k,
        }
    }
}

impl fmt::Display for LemmaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Whether `(κ, a, b)` lies in the lemma's regime. The shrink corollary
/// also needs `|ξ| > δκ⁴/16` and `|b| > κ^(7/4)/2`; the latter is used by
/// its proof (and fails to hold without it) although the statement omits it.
pub fn in_regime<T: Real>(lemma: LemmaId, s: Ab<T>, kappa: T, k: T, delta: f64) -> bool {
    if !check_condition(lemma.condition(delta), kappa, s.a, s.b, k) {
        return false;
    }
    if lemma == LemmaId::XiShrink {
        let k4 = kappa.powi(4);
        let k74 = kappa.powi(7).sqrt().sqrt();
        return xi(s, kappa).abs() > T::of(delta) * k4 / T::of(16.0) && s.b.abs() > k74 / T::of(2.0);
    }
    true
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualReport<T> {
    pub lemma: LemmaId,
    pub kappa: T,
    pub a: T,
    pub b: T,
    pub exact_next: T,
    pub approx_next: T,
    pub residual: T,
    pub bound: T,
    /// `residual / bound`, or 0 when both vanish.
    pub ratio: T,
    pub satisfied: bool,
}

/// Evaluates one lemma at one point: exact two-step update, the lemma's
/// approximation, and its bound. Out-of-regime input is reported as
/// [`Error::ConditionViolated`].
pub fn verify_residual_bound<T: Real>(
    lemma: LemmaId,
    s: Ab<T>,
    kappa: T,
    k: T,
    delta: f64,
) -> Result<ResidualReport<T>> {
    if !in_regime(lemma, s, kappa, k, delta) {
        return Err(Error::ConditionViolated(format!(
            "{lemma} at kappa={kappa:e}, a={:e}, b={:e}",
            s.a, s.b
        )));
    }
    let next = ab_two_step_exact(s, kappa)?;
    let k3 = kappa.powi(3);
    let b = s.b;
    let (exact, approx, bound) = match lemma {
        LemmaId::AMovement => (next.a, a_two_step_approx(s, kappa), T::of(3.0) * b * b * k3),
        LemmaId::BLarge => (
            next.b,
            b - T::of(16.0) * b.powi(3),
            T::of(14.0) * b.abs().powi(3),
        ),
        LemmaId::BSmall => (
            next.b,
            b + T::of(8.0) * s.a * b * kappa,
            T::of(7.0) * (s.a * b * kappa).abs(),
        ),
        LemmaId::BMovement => (next.b, b, (s.a * kappa).sqrt() / T::of(16.0)),
        LemmaId::XiRegime => {
            let x0 = xi(s, kappa);
            (
                xi(next, kappa),
                xi_two_step_approx(x0, b, kappa),
                T::of(delta) * b * b * kappa.powi(4),
            )
        }
        LemmaId::XiShrink => {
            let x0 = xi(s, kappa);
            let k72 = kappa.powi(7).sqrt();
            (xi(next, kappa).abs(), T::zero(), (T::one() - T::of(4.0) * k72) * x0.abs())
        }
    };
    let residual = (exact - approx).abs();
    let ratio = if bound > T::zero() {
        residual / bound
    } else if residual == T::zero() {
        T::zero()
    } else {
        T::of(f64::INFINITY)
    };
    Ok(ResidualReport {
        lemma,
        kappa,
        a: s.a,
        b: s.b,
        exact_next: exact,
        approx_next: approx,
        residual,
        bound,
        ratio,
        satisfied: residual <= bound,
    })
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.random();
    (lo.ln() + u * (hi.ln() - lo.ln())).exp()
}

fn signed<R: Rng + ?Sized>(v: f64, rng: &mut R) -> f64 {
    if rng.random::<bool>() {
        v
    } else {
        -v
    }
}

/// Span (in decades) below each regime's upper edge that the sampler covers
/// when the regime itself has no positive lower edge.
const FLOOR_DECADES: f64 = 8.0;

/// Draws `(a, b)` in the lemma's regime at fixed κ: `|a|` log-uniform in
/// its interval, then `|b|` log-uniform in the interval that `a` induces,
/// random signs where the regime is symmetric, then rejection on the exact
/// predicate. Values are generated as `f64` and converted exactly.
pub fn sample_in_regime<T: Real, R: Rng + ?Sized>(
    lemma: LemmaId,
    kappa: T,
    k: f64,
    delta: f64,
    rng: &mut R,
) -> Result<Ab<T>> {
    let kf = kappa.as_f64();
    if kf >= lemma.kappa_ceiling(k, delta) {
        return Err(Error::ConditionViolated(format!("{lemma}: kappa={kf:e} above the regime ceiling")));
    }
    let floor = |hi: f64| hi * 10f64.powf(-FLOOR_DECADES);
    let kinv = 1.0 / k;
    for _ in 0..10_000 {
        let (a, b) = match lemma {
            LemmaId::AMovement => {
                let ha = kinv / kf;
                let a = signed(log_uniform(rng, floor(ha), ha), rng);
                (a, signed(log_uniform(rng, floor(kinv), kinv), rng))
            }
            LemmaId::BLarge | LemmaId::BSmall => {
                let a = signed(log_uniform(rng, kf.powi(3), kinv * kinv / kf), rng);
                let edge = (a.abs() * kf).sqrt();
                let b = if lemma == LemmaId::BLarge {
                    log_uniform(rng, edge, kinv)
                } else {
                    let hi = (edge / 8f64.sqrt()).min(kinv);
                    log_uniform(rng, floor(hi), hi)
                };
                (a, signed(b, rng))
            }
            LemmaId::BMovement => {
                let ha = kinv * kinv / (4.0 * kf);
                let a = log_uniform(rng, floor(ha), ha);
                let hb = 2.0 * (a * kf).sqrt();
                (a, signed(log_uniform(rng, floor(hb), hb), rng))
            }
            LemmaId::XiRegime | LemmaId::XiShrink => {
                let ha = 2.0 * kf.powf(2.5);
                let a = signed(log_uniform(rng, floor(ha), ha), rng);
                let hb = 8f64.sqrt() * kf.powf(1.75);
                // Below κ^(7/4)/20 the bound δb²κ⁴ drops under the
                // double-double rounding of ξ'' (|ξ| ~ κ^(7/2)), so the
                // check would measure arithmetic noise, not the map.
                let lb = if lemma == LemmaId::XiShrink {
                    0.5 * kf.powf(1.75)
                } else {
                    kf.powf(1.75) / 20.0
                };
                (a, signed(log_uniform(rng, lb, hb), rng))
            }
        };
        let s = Ab::new(T::of(a), T::of(b));
        if in_regime(lemma, s, kappa, T::of(k), delta) {
            return Ok(s);
        }
    }
    Err(Error::ConditionViolated(format!(
        "{lemma}: no in-regime sample at kappa={kf:e} after 10000 draws"
    )))
}

/// One named remainder monomial of the two-step expansion.
#[derive(Clone, Debug, PartialEq)]
pub struct TermRatio {
    pub coordinate: &'static str,
    pub term: &'static str,
    /// Supremum of `|R| / |monomial|` over the samples.
    pub sup_ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    pub samples: usize,
    pub per_term: Vec<TermRatio>,
    /// Supremum of `|R_b| / Σ|monomials|`, an empirical value for K on `b''`.
    pub k_b: f64,
    /// Same for `a''`.
    pub k_a: f64,
}

/// The remainder monomials of `b''` and `a''` at `(a, b, κ)` with `eps`.
pub fn remainder_monomials(a: f64, b: f64, kappa: f64, eps: f64) -> ([(&'static str, f64); 6], [(&'static str, f64); 3]) {
    let (a, b, k) = (a.abs(), b.abs(), kappa);
    (
        [
            ("b^4", b.powi(4)),
            ("a b^2 k", a * b * b * k),
            ("a^2 b k^2", a * a * b * k * k),
            ("b^2 k^4", b * b * k.powi(4)),
            ("b k^5", b * k.powi(5)),
            ("eps b^2 k^3", eps * b * b * k.powi(3)),
        ],
        [
            ("eps b^2 k^3", eps * b * b * k.powi(3)),
            ("b^3 k^3", b.powi(3) * k.powi(3)),
            ("b^2 k^4", b * b * k.powi(4)),
        ],
    )
}

/// Empirical size of the constant hidden in the two-step expansion over
/// the given points (evaluated in `T`). Points with `b = 0` are skipped.
pub fn calibrate_k<T: Real>(points: &[(f64, f64, f64)], eps: f64) -> Result<Calibration> {
    let mut per_b = [0.0f64; 6];
    let mut per_a = [0.0f64; 3];
    let (mut k_b, mut k_a) = (0.0f64, 0.0f64);
    let mut used = 0;
    let mut names: Option<([&'static str; 6], [&'static str; 3])> = None;
    for &(kappa, a, b) in points {
        if b == 0.0 {
            continue;
        }
        let kt = T::of(kappa);
        let s = Ab::new(T::of(a), T::of(b));
        let next = ab_two_step_exact(s, kt)?;
        let rb = (next.b - b_two_step_approx(s, kt)).abs().as_f64();
        let ra = (next.a - a_two_step_approx(s, kt)).abs().as_f64();
        let (mb, ma) = remainder_monomials(a, b, kappa, eps);
        names.get_or_insert((mb.map(|t| t.0), ma.map(|t| t.0)));
        for (i, (_, m)) in mb.iter().enumerate() {
            per_b[i] = per_b[i].max(rb / m);
        }
        for (i, (_, m)) in ma.iter().enumerate() {
            per_a[i] = per_a[i].max(ra / m);
        }
        k_b = k_b.max(rb / mb.iter().map(|t| t.1).sum::<f64>());
        k_a = k_a.max(ra / ma.iter().map(|t| t.1).sum::<f64>());
        used += 1;
    }
    let Some((nb, na)) = names else {
        return Err(Error::EmptySample);
    };
    let mut per_term = Vec::with_capacity(9);
    for (i, n) in nb.iter().enumerate() {
        per_term.push(TermRatio { coordinate: "b", term: n, sup_ratio: per_b[i] });
    }
    for (i, n) in na.iter().enumerate() {
        per_term.push(TermRatio { coordinate: "a", term: n, sup_ratio: per_a[i] });
    }
    Ok(Calibration { samples: used, per_term, k_b, k_a })
}

//! Residual-bound sweeps over the two-step lemmas and the κ-scaling fits of
//! the neglected remainders.

use eos_core::dynamics_approx::{
    a_two_step_approx, ab_two_step_exact, b_two_step_approx, sample_in_regime, verify_residual_bound, xi_two_step_approx,
};
use eos_core::reparam::xi;
use eos_core::{Ab, Error, LemmaId, Real};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::output::Table;

/// κ interval of the strict suite for the lemmas without an extra κ
/// ceiling; both ends are below `1/512`.
pub const STRICT_KAPPA: (f64, f64) = (5e-4, 1.9e-3);

/// How κ is chosen per sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KappaChoice {
    /// Log-uniform in the lemma's strict window.
    Window,
    /// One value for every lemma; lemmas whose regime is empty there are
    /// moved into their own window.
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StudySpec {
    pub samples: usize,
    pub kappa: KappaChoice,
    pub k: f64,
    pub delta: f64,
    pub seed: u64,
}

/// The κ window a lemma is checked over: [`STRICT_KAPPA`], or the top
/// quarter-decade below the regime's own ceiling when that is lower.
pub fn strict_window(lemma: LemmaId, k: f64, delta: f64) -> (f64, f64) {
    let ceil = lemma.kappa_ceiling(k, delta);
    if ceil <= STRICT_KAPPA.1 {
        (ceil / 4.0, ceil)
    } else {
        STRICT_KAPPA
    }
}

/// `(lo, hi, clamped)`; a degenerate window means a fixed κ.
pub fn kappa_range(lemma: LemmaId, spec: &StudySpec) -> (f64, f64, bool) {
    let w = strict_window(lemma, spec.k, spec.delta);
    match spec.kappa {
        KappaChoice::Window => (w.0, w.1, false),
        KappaChoice::Fixed(v) if v < lemma.kappa_ceiling(spec.k, spec.delta) => (v, v, false),
        KappaChoice::Fixed(_) => (w.0, w.1, true),
    }
}

fn sample_rng(seed: u64, lemma: LemmaId, i: usize) -> ChaCha8Rng {
    let li = LemmaId::ALL.iter().position(|l| *l == lemma).unwrap_or(0) as u64;
    ChaCha8Rng::seed_from_u64(seed ^ (li << 56) ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

#[derive(Clone, Copy, Debug)]
pub struct Sample {
    pub lemma: LemmaId,
    pub kappa: f64,
    pub a: f64,
    pub b: f64,
    pub residual: f64,
    pub bound: f64,
    pub ratio: f64,
    pub satisfied: bool,
}

/// Sample `i` of `lemma` depends only on `(seed, lemma, i)`.
pub fn residual_sample<T: Real>(lemma: LemmaId, spec: &StudySpec, i: usize) -> eos_core::Result<Sample> {
    let mut rng = sample_rng(spec.seed, lemma, i);
    let (lo, hi, _) = kappa_range(lemma, spec);
    let kappa = if lo == hi {
        lo
    } else {
        let u: f64 = rng.random();
        (lo.ln() + u * (hi.ln() - lo.ln())).exp()
    };
    let kt = T::of(kappa);
    let s = sample_in_regime::<T, _>(lemma, kt, spec.k, spec.delta, &mut rng)?;
    let r = verify_residual_bound(lemma, s, kt, T::of(spec.k), spec.delta)?;
    Ok(Sample {
        lemma,
        kappa,
        a: r.a.as_f64(),
        b: r.b.as_f64(),
        residual: r.residual.as_f64(),
        bound: r.bound.as_f64(),
        ratio: r.ratio.as_f64(),
        satisfied: r.satisfied,
    })
}

#[derive(Clone, Debug)]
pub struct LemmaSummary {
    pub lemma: LemmaId,
    pub samples: usize,
    pub satisfied: usize,
    pub max_ratio: f64,
    pub kappa_range: (f64, f64),
    pub clamped: bool,
}

impl LemmaSummary {
    pub fn all_satisfied(&self) -> bool {
        self.samples > 0 && self.satisfied == self.samples
    }
}

pub fn residual_study<T: Real>(lemmas: &[LemmaId], spec: &StudySpec) -> eos_core::Result<(Vec<Sample>, Vec<LemmaSummary>)> {
    if lemmas.is_empty() || spec.samples == 0 {
        return Err(Error::EmptySample);
    }
    let mut rows = Vec::with_capacity(lemmas.len() * spec.samples);
    let mut summary = Vec::new();
    for &lemma in lemmas {
        let got: Vec<Sample> = (0..spec.samples)
            .into_par_iter()
            .map(|i| residual_sample::<T>(lemma, spec, i))
            .collect::<eos_core::Result<_>>()?;
        let (lo, hi, clamped) = kappa_range(lemma, spec);
        summary.push(LemmaSummary {
            lemma,
            samples: got.len(),
            satisfied: got.iter().filter(|s| s.satisfied).count(),
            max_ratio: got.iter().map(|s| s.ratio).fold(0.0, f64::max),
            kappa_range: (lo, hi),
            clamped,
        });
        rows.extend(got);
    }
    Ok((rows, summary))
}

pub fn samples_table(rows: &[Sample]) -> Table {
    let mut t = Table::new(
        "samples",
        &["lemma", "kappa", "a", "b", "residual", "bound", "ratio", "satisfied"],
    );
    for r in rows {
        t.push(vec![
            r.lemma.name().into(),
            r.kappa.into(),
            r.a.into(),
            r.b.into(),
            r.residual.into(),
            r.bound.into(),
            r.ratio.into(),
            r.satisfied.into(),
        ]);
    }
    t
}

pub fn summary_table(rows: &[LemmaSummary]) -> Table {
    let mut t = Table::new(
        "summary",
        &["lemma", "samples", "satisfied", "max_ratio", "kappa_lo", "kappa_hi", "kappa_clamped"],
    );
    for r in rows {
        t.push(vec![
            r.lemma.name().into(),
            r.samples.into(),
            r.satisfied.into(),
            r.max_ratio.into(),
            r.kappa_range.0.into(),
            r.kappa_range.1.into(),
            r.clamped.into(),
        ]);
    }
    t
}

/// Remainder scaling along `a = 3κ^(5/2)`, `b = κ^(7/4)`: each coordinate
/// with the κ-order of its leading surviving remainder term.
pub const SCALING_ORDERS: [(&str, &str, f64); 3] = [
    // b⁴ and ab²κ
    ("b", "b^4", 7.0),
    ("a", "b^3 kappa^3", 8.25),
    // 2b times the b remainder
    ("xi", "b^5", 8.75),
];

#[derive(Clone, Debug)]
pub struct ScalingFit {
    pub coordinate: &'static str,
    pub monomial: &'static str,
    pub expected: f64,
    pub fitted: f64,
    /// `(κ, |residual|)`
    pub points: Vec<(f64, f64)>,
}

impl ScalingFit {
    pub fn within(&self, tol: f64) -> bool {
        (self.fitted - self.expected).abs() <= tol
    }
}

/// Least-squares slope of `log y` on `log x`.
pub fn loglog_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x.ln(), b + y.ln()));
    let (mx, my) = (sx / n, sy / n);
    let (num, den) = pts.iter().fold((0.0, 0.0), |(p, q), (x, y)| {
        let dx = x.ln() - mx;
        (p + dx * (y.ln() - my), q + dx * dx)
    });
    num / den
}

pub fn scaling_fit<T: Real>(kappa_range: (f64, f64), n: usize) -> eos_core::Result<Vec<ScalingFit>> {
    if n < 2 {
        return Err(Error::EmptySample);
    }
    let mut pts = [Vec::new(), Vec::new(), Vec::new()];
    for i in 0..n {
        let kf = (kappa_range.0.ln() + (kappa_range.1 / kappa_range.0).ln() * i as f64 / (n - 1) as f64).exp();
        let k = T::of(kf);
        let s = Ab::new(T::of(3.0) * k.powf(T::of(2.5)), k.powf(T::of(1.75)));
        let next = ab_two_step_exact(s, k)?;
        pts[0].push((kf, (next.b - b_two_step_approx(s, k)).abs().as_f64()));
        pts[1].push((kf, (next.a - a_two_step_approx(s, k)).abs().as_f64()));
        let x0 = xi(s, k);
        pts[2].push((kf, (xi(next, k) - xi_two_step_approx(x0, s.b, k)).abs().as_f64()));
    }
    Ok(SCALING_ORDERS
        .iter()
        .zip(pts)
        .map(|(&(coordinate, monomial, expected), points)| ScalingFit {
            coordinate,
            monomial,
            expected,
            fitted: loglog_slope(&points),
            points,
        })
        .collect())
}

pub fn scaling_table(fits: &[ScalingFit]) -> Table {
    let mut t = Table::new("scaling", &["coordinate", "monomial", "expected_order", "fitted_order", "kappa", "residual"]);
    for f in fits {
        for &(k, r) in &f.points {
            t.push(vec![
                f.coordinate.into(),
                f.monomial.into(),
                f.expected.into(),
                f.fitted.into(),
                k.into(),
                r.into(),
            ]);
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use eos_core::Dd;

    fn spec(samples: usize, kappa: KappaChoice) -> StudySpec {
        StudySpec {
            samples,
            kappa,
            k: 600.0,
            delta: 0.04,
            seed: 7,
        }
    }

    #[test]
    fn empty_study_is_an_error() {
        assert_eq!(
            residual_study::<f64>(&[], &spec(10, KappaChoice::Window)).unwrap_err(),
            Error::EmptySample
        );
        assert_eq!(
            residual_study::<f64>(&LemmaId::ALL, &spec(0, KappaChoice::Window)).unwrap_err(),
            Error::EmptySample
        );
        assert!(scaling_fit::<f64>((0.01, 0.05), 1).is_err());
    }

    #[test]
    fn samples_are_reproducible_and_order_free() {
        let s = spec(8, KappaChoice::Window);
        let a = residual_sample::<Dd>(LemmaId::BSmall, &s, 5).unwrap();
        let b = residual_sample::<Dd>(LemmaId::BSmall, &s, 5).unwrap();
        assert_eq!((a.kappa, a.a, a.b), (b.kappa, b.a, b.b));
        let (rows, _) = residual_study::<Dd>(&[LemmaId::BSmall], &s).unwrap();
        assert_eq!(rows[5].a, a.a);
    }

    #[test]
    fn fixed_kappa_above_a_ceiling_is_clamped() {
        let s = spec(4, KappaChoice::Fixed(1.5e-3));
        let (lo, hi, clamped) = kappa_range(LemmaId::XiRegime, &s);
        assert!(clamped && hi < 1e-6 && lo < hi);
        assert_eq!(kappa_range(LemmaId::AMovement, &s), (1.5e-3, 1.5e-3, false));
    }

    #[test]
    fn slope_of_a_power_law() {
        let pts: Vec<(f64, f64)> = [0.01, 0.02, 0.04].iter().map(|&k: &f64| (k, 3.0 * k.powf(7.0))).collect();
        assert!((loglog_slope(&pts) - 7.0).abs() < 1e-12);
    }
}

//! Degree-4 against degree-2: the 2-step points of the quartic model trace
//! a parabola `b² = p + s·a`, those of the quadratic model `(1 - xy)²/2`
//! an ellipse `b² = p - s·a²`.

use eos_core::reparam::{c_breve, cd_to_xy, xy_to_cd, Cd};
use eos_core::scalar_model::{degree2_gd_step, degree2_loss, gd_step, loss, StopReason, DIVERGENCE_GUARD};
use eos_core::{Real, Xy};
use rayon::prelude::*;

use crate::output::Table;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    Degree4,
    Degree2,
}

impl Model {
    pub fn as_str(self) -> &'static str {
        match self {
            Model::Degree4 => "degree4",
            Model::Degree2 => "degree2",
        }
    }
}

/// `c` coordinate of the quadratic model's EoS minimum, where
/// `x² + y² = sqrt(c⁴ + 4) = 2/η`: `(4η⁻² - 4)^(1/4)`.
pub fn c_breve_degree2<T: Real>(eta: T) -> T {
    (T::of(4.0) / (eta * eta) - T::of(4.0)).root4()
}

fn centre<T: Real>(model: Model, eta: T) -> T {
    match model {
        Model::Degree4 => c_breve(eta),
        Model::Degree2 => c_breve_degree2(eta),
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ContrastSpec {
    pub eta: f64,
    /// Offsets from each model's own EoS minimum in `(c - c̆, xy - 1)`.
    pub a0: f64,
    pub b0: f64,
    pub max_steps: usize,
    pub loss_below: f64,
    /// Traces are thinned evenly to at most this many 2-step points.
    pub max_points: usize,
}

impl ContrastSpec {
    pub fn new(eta: f64, a0: f64, b0: f64) -> Self {
        ContrastSpec {
            eta,
            a0,
            b0,
            max_steps: 5_000_000,
            loss_below: 1e-12,
            max_points: 2000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConicTrace {
    pub model: Model,
    pub steps: usize,
    pub stop: StopReason,
    pub c_breve: f64,
    /// 2-step points `(a, b)`.
    pub points: Vec<(f64, f64)>,
}

fn thin(v: Vec<(f64, f64)>, max: usize) -> Vec<(f64, f64)> {
    if v.len() <= max || max < 2 {
        return v;
    }
    (0..max).map(|i| v[i * (v.len() - 1) / (max - 1)]).collect()
}

pub fn conic_trace<T: Real>(model: Model, spec: &ContrastSpec) -> eos_core::Result<ConicTrace> {
    let eta = T::of(spec.eta);
    let cb = centre(model, eta);
    let mut s = cd_to_xy(Cd {
        c: cb + T::of(spec.a0),
        d: T::one() + T::of(spec.b0),
    })?;
    let (step, lossf): (fn(Xy<T>, T) -> Xy<T>, fn(Xy<T>) -> T) = match model {
        Model::Degree4 => (gd_step, loss),
        Model::Degree2 => (degree2_gd_step, degree2_loss),
    };
    let guard = T::of(DIVERGENCE_GUARD);
    let mut pts = Vec::new();
    let mut stop = StopReason::MaxSteps;
    let mut t = 0;
    while t < spec.max_steps {
        if t % 2 == 0 {
            let cd = xy_to_cd(s)?;
            pts.push(((cd.c - cb).as_f64(), (cd.d - T::one()).as_f64()));
            if lossf(s) < T::of(spec.loss_below) {
                stop = StopReason::Converged;
                break;
            }
        }
        s = step(s, eta);
        t += 1;
        if !(s.x.is_finite() && s.y.is_finite()) || s.x.abs() > guard || s.y.abs() > guard {
            stop = StopReason::Diverged;
            break;
        }
    }
    Ok(ConicTrace {
        model,
        steps: t,
        stop,
        c_breve: cb.as_f64(),
        points: thin(pts, spec.max_points),
    })
}

/// Residual sum of squares of the least-squares fit `y ≈ p + s·u`.
fn rss_linear(u: &[f64], y: &[f64]) -> f64 {
    let n = u.len() as f64;
    let mu = u.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (suu, suy) = u
        .iter()
        .zip(y)
        .fold((0.0, 0.0), |(a, b), (ui, yi)| (a + (ui - mu) * (ui - mu), b + (ui - mu) * (yi - my)));
    let s = if suu > 0.0 { suy / suu } else { 0.0 };
    u.iter().zip(y).map(|(ui, yi)| (yi - my - s * (ui - mu)).powi(2)).sum()
}

/// `(parabola, ellipse)` residual sums of squares of `b²` against
/// `p + s·a` and `p - s·a²`, both free in `(p, s)`.
pub fn conic_fits(points: &[(f64, f64)]) -> (f64, f64) {
    if points.is_empty() {
        return (0.0, 0.0);
    }
    let y: Vec<f64> = points.iter().map(|(_, b)| b * b).collect();
    let a: Vec<f64> = points.iter().map(|(a, _)| *a).collect();
    let a2: Vec<f64> = a.iter().map(|v| -v * v).collect();
    (rss_linear(&a, &y), rss_linear(&a2, &y))
}

#[derive(Clone, Debug)]
pub struct Contrast {
    pub spec: ContrastSpec,
    pub degree4: ConicTrace,
    pub degree2: ConicTrace,
    /// `(parabola, ellipse)` for each model.
    pub fits4: (f64, f64),
    pub fits2: (f64, f64),
}

impl Contrast {
    /// Parabola strictly better on degree 4, ellipse strictly better on
    /// degree 2.
    pub fn separates(&self) -> bool {
        self.fits4.0 < self.fits4.1 && self.fits2.1 < self.fits2.0
    }
}

pub fn degree2_contrast<T: Real>(spec: &ContrastSpec) -> eos_core::Result<Contrast> {
    let degree4 = conic_trace::<T>(Model::Degree4, spec)?;
    let degree2 = conic_trace::<T>(Model::Degree2, spec)?;
    Ok(Contrast {
        spec: *spec,
        fits4: conic_fits(&degree4.points),
        fits2: conic_fits(&degree2.points),
        degree4,
        degree2,
    })
}

/// `n` matched starts in the degree-4 band: `a₀` from `4κ^(5/2)` to
/// `30κ^(5/2)`, `b₀ = √(a₀κ)` or half of it, alternating.
pub fn paired_specs(eta: f64, n: usize) -> Vec<ContrastSpec> {
    let k = eta.sqrt();
    let pairs = n.div_ceil(2).max(1);
    (0..n)
        .map(|i| {
            let m = if pairs == 1 {
                4.0
            } else {
                4.0 + 26.0 * (i / 2) as f64 / (pairs - 1) as f64
            };
            let a0 = m * k.powf(2.5);
            let bf = if i % 2 == 0 { 1.0 } else { 0.5 };
            ContrastSpec::new(eta, a0, bf * (a0 * k).sqrt())
        })
        .collect()
}

pub fn paired_contrast<T: Real>(specs: &[ContrastSpec]) -> eos_core::Result<Vec<Contrast>> {
    specs.par_iter().map(degree2_contrast::<T>).collect()
}

pub fn trace_table(runs: &[Contrast]) -> Table {
    let mut t = Table::new("traces", &["run", "model", "point", "a", "b", "c", "d"]);
    for (i, r) in runs.iter().enumerate() {
        for tr in [&r.degree4, &r.degree2] {
            for (j, &(a, b)) in tr.points.iter().enumerate() {
                t.push(vec![
                    i.into(),
                    tr.model.as_str().into(),
                    j.into(),
                    a.into(),
                    b.into(),
                    (a + tr.c_breve).into(),
                    (b + 1.0).into(),
                ]);
            }
        }
    }
    t
}

pub fn fit_table(runs: &[Contrast]) -> Table {
    let mut t = Table::new(
        "fits",
        &["run", "eta", "a0", "b0", "model", "steps", "stop", "parabola_rss", "ellipse_rss", "better"],
    );
    for (i, r) in runs.iter().enumerate() {
        for (tr, f) in [(&r.degree4, r.fits4), (&r.degree2, r.fits2)] {
            let better = if f.0 < f.1 {
                "parabola"
            } else if f.1 < f.0 {
                "ellipse"
            } else {
                "tie"
            };
            t.push(vec![
                i.into(),
                r.spec.eta.into(),
                r.spec.a0.into(),
                r.spec.b0.into(),
                tr.model.as_str().into(),
                tr.steps.into(),
                tr.stop.as_str().into(),
                f.0.into(),
                f.1.into(),
                better.into(),
            ]);
        }
    }
    t
}

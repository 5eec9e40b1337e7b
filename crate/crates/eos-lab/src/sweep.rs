//! Bifurcation sweeps: the long-run attractor of GD as the step size or
//! the starting point moves.

use eos_core::scalar_model::{gd_step, loss, sharpness, DIVERGENCE_GUARD};
use eos_core::{Real, Xy};
use rayon::prelude::*;

use crate::output::Table;

/// Window the period is read from, after the transient.
pub const TAIL: usize = 64;
pub const MAX_PERIOD: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    Eta,
    /// Starting `x₀`, with `y₀ = (1 + b0)/x₀`.
    X0,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::Eta => "eta",
            SweepParam::X0 => "x0",
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "eta" => Ok(SweepParam::Eta),
            "x0" => Ok(SweepParam::X0),
            _ => Err(format!("unknown sweep parameter {s:?} (eta or x0)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Attractor {
    FixedPoint,
    Periodic(usize),
    Aperiodic,
    Diverged,
}

impl Attractor {
    pub fn label(self) -> String {
        match self {
            Attractor::FixedPoint => "fixed_point".into(),
            Attractor::Periodic(p) => format!("period_{p}"),
            Attractor::Aperiodic => "aperiodic".into(),
            Attractor::Diverged => "diverged".into(),
        }
    }
}

/// Smallest `p ≤ max_p` with `|s[i] - s[i+p]| ≤ tol·max(1, |s[i]|)` across
/// the whole sequence.
pub fn detect_period(seq: &[f64], max_p: usize, tol: f64) -> Option<usize> {
    (1..=max_p.min(seq.len().saturating_sub(1))).find(|&p| {
        seq.iter()
            .zip(&seq[p..])
            .all(|(a, b)| (a - b).abs() <= tol * a.abs().max(1.0))
    })
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub range: (f64, f64),
    pub n: usize,
    /// Step size when sweeping `x₀`.
    pub eta: f64,
    /// Starting point when sweeping η.
    pub init: Xy<f64>,
    /// `x₀y₀ - 1` when sweeping `x₀`.
    pub b0: f64,
    pub steps: usize,
    pub transient: usize,
}

impl SweepSpec {
    pub fn value(&self, i: usize) -> f64 {
        if self.n == 1 {
            self.range.0
        } else {
            self.range.0 + (self.range.1 - self.range.0) * i as f64 / (self.n - 1) as f64
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub value: f64,
    pub attractor: Attractor,
    pub final_loss: f64,
    /// Only for fixed-point attractors.
    pub final_sharpness: Option<f64>,
    pub tail: Vec<f64>,
}

pub fn sweep_point<T: Real>(spec: &SweepSpec, value: f64) -> SweepPoint {
    let (eta, s0) = match spec.param {
        SweepParam::Eta => (value, spec.init),
        SweepParam::X0 => (spec.eta, Xy::new(value, (1.0 + spec.b0) / value)),
    };
    let eta_t = T::of(eta);
    let mut s = Xy::<T>::from_f64(s0);
    let total = spec.steps.max(spec.transient + TAIL);
    let mut tail = Vec::with_capacity(TAIL);
    let guard = T::of(DIVERGENCE_GUARD);
    let mut diverged = false;
    for t in 0..total {
        s = gd_step(s, eta_t);
        if !(s.x.is_finite() && s.y.is_finite()) || s.x.abs() > guard || s.y.abs() > guard {
            diverged = true;
            break;
        }
        if t + TAIL >= total {
            tail.push(s.x.as_f64());
        }
    }
    let l = loss(s).as_f64();
    let attractor = if diverged {
        Attractor::Diverged
    } else if l < 1e-10 {
        Attractor::FixedPoint
    } else {
        match detect_period(&tail, MAX_PERIOD, 1e-8) {
            Some(1) => Attractor::FixedPoint,
            Some(p) => Attractor::Periodic(p),
            None => Attractor::Aperiodic,
        }
    };
    SweepPoint {
        value,
        attractor,
        final_loss: if diverged { f64::INFINITY } else { l },
        final_sharpness: (attractor == Attractor::FixedPoint).then(|| sharpness(s).as_f64()),
        tail,
    }
}

pub fn bifurcation_sweep<T: Real>(spec: &SweepSpec) -> Result<Vec<SweepPoint>, String> {
    if spec.n == 0 {
        return Err("sweep needs n >= 1".into());
    }
    if !(spec.range.0.is_finite() && spec.range.1.is_finite()) {
        return Err("sweep range must be finite".into());
    }
    Ok((0..spec.n)
        .into_par_iter()
        .map(|i| sweep_point::<T>(spec, spec.value(i)))
        .collect())
}

pub fn sweep_table(spec: &SweepSpec, pts: &[SweepPoint]) -> Table {
    let mut t = Table::new(
        "points",
        &["param", "value", "attractor", "period", "final_loss", "final_sharpness"],
    );
    for p in pts {
        let period = match p.attractor {
            Attractor::FixedPoint => Some(1usize),
            Attractor::Periodic(k) => Some(k),
            _ => None,
        };
        t.push(vec![
            spec.param.as_str().into(),
            p.value.into(),
            p.attractor.label().into(),
            period.into(),
            p.final_loss.into(),
            p.final_sharpness.into(),
        ]);
    }
    t
}

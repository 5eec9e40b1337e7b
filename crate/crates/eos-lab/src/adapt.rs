//! Sharpness adaptivity: one initialisation, several step sizes, each run
//! settling just below its own `2/η`.

use eos_core::scalar_model::{eos_minimum, run_trajectory, StopReason, StopSpec};
use eos_core::{Dd, Real, Xy};
use rayon::prelude::*;

use crate::grid::sharpness_window;
use crate::output::Table;

/// `η = 2/8, 2/10, 2/12`
pub const FIGURE_ETAS: [f64; 3] = [0.25, 0.2, 2.0 / 12.0];

/// Shared initialisation: `x₀y₀ = 1.001`, above every EoS minimum in
/// [`FIGURE_ETAS`].
pub fn figure_init() -> Xy<f64> {
    Xy::new(2.6, 1.001 / 2.6)
}

#[derive(Clone, Debug)]
pub struct AdaptRun {
    pub eta: f64,
    pub steps: usize,
    pub stop: StopReason,
    pub final_loss: f64,
    pub final_sharpness: f64,
    pub in_window: bool,
    /// `(step, loss, sharpness)`
    pub trace: Vec<(usize, f64, f64)>,
}

pub fn sharpness_adaptivity<T: Real>(
    etas: &[f64],
    init: Xy<f64>,
    max_steps: usize,
    eps_stop: f64,
    record_every: usize,
) -> Vec<AdaptRun> {
    etas.par_iter()
        .map(|&eta| {
            let stop = StopSpec {
                loss_below: T::of(eps_stop),
                record_every,
            };
            let tr = run_trajectory(Xy::<T>::from_f64(init), T::of(eta), max_steps, stop);
            let (lo, hi) = sharpness_window(eta);
            let sharp = tr.last.sharpness.as_f64();
            AdaptRun {
                eta,
                steps: tr.steps(),
                stop: tr.stop,
                final_loss: tr.last.loss.as_f64(),
                final_sharpness: sharp,
                in_window: tr.stop == StopReason::Converged && sharp > lo && sharp < hi,
                trace: tr
                    .records
                    .iter()
                    .map(|r| (r.step, r.loss.as_f64(), r.sharpness.as_f64()))
                    .collect(),
            }
        })
        .collect()
}

pub fn trace_table(runs: &[AdaptRun]) -> Table {
    let mut t = Table::new("traces", &["eta", "step", "loss", "sharpness"]);
    for r in runs {
        for &(s, l, h) in &r.trace {
            t.push(vec![r.eta.into(), s.into(), l.into(), h.into()]);
        }
    }
    t
}

pub fn summary_table(runs: &[AdaptRun]) -> Table {
    let mut t = Table::new(
        "summary",
        &["eta", "two_over_eta", "steps", "stop", "final_loss", "final_sharpness", "in_window"],
    );
    for r in runs {
        t.push(vec![
            r.eta.into(),
            (2.0 / r.eta).into(),
            r.steps.into(),
            r.stop.as_str().into(),
            r.final_loss.into(),
            r.final_sharpness.into(),
            r.in_window.into(),
        ]);
    }
    t
}

/// The fixed `x₀` interval `(α⁻¹ + K⁻²α⁻¹/15, α⁻¹ + K⁻²α⁻¹/6)` against the
/// per-step-size interval `(x̆ + 13κ^(5/2), x̆ + K⁻²κ⁻¹/5)` it must sit in.
#[derive(Clone, Copy, Debug)]
pub struct RegionInclusion {
    pub eta: f64,
    pub kappa: f64,
    pub fixed: (f64, f64),
    pub required: (f64, f64),
    /// Slack on each side, computed in double-double before rounding.
    pub margin: (f64, f64),
    pub contained: bool,
}

/// Largest α for which the inclusion argument applies.
pub fn alpha_ceiling(k: f64) -> f64 {
    1.0 / (2000.0 * 2f64.sqrt() * k)
}

/// `n` step sizes spread over `κ² ∈ (α² - K⁻²α²/10, α²)`, each checked in
/// double-double (the two intervals are ~10² wide next to `x̆ ≈ 10⁹`).
pub fn region_inclusion(alpha: f64, k: f64, n: usize) -> eos_core::Result<Vec<RegionInclusion>> {
    let a = Dd::of(alpha);
    let kk = Dd::of(k);
    let kinv2 = Dd::of(1.0) / (kk * kk);
    let ainv = Dd::of(1.0) / a;
    let fixed = (ainv + kinv2 * ainv / Dd::of(15.0), ainv + kinv2 * ainv / Dd::of(6.0));
    (0..n)
        .map(|i| {
            let f = Dd::of((i as f64 + 0.5) / n as f64);
            let eta = a * a * (Dd::of(1.0) - f * kinv2 / Dd::of(10.0));
            let kappa = eta.sqrt();
            let xb = eos_minimum(eta)?.x;
            let required = (
                xb + Dd::of(13.0) * kappa.powf(Dd::of(2.5)),
                xb + kinv2 / (Dd::of(5.0) * kappa),
            );
            let margin = (fixed.0 - required.0, required.1 - fixed.1);
            Ok(RegionInclusion {
                eta: eta.as_f64(),
                kappa: kappa.as_f64(),
                fixed: (fixed.0.as_f64(), fixed.1.as_f64()),
                required: (required.0.as_f64(), required.1.as_f64()),
                margin: (margin.0.as_f64(), margin.1.as_f64()),
                contained: margin.0 > Dd::of(0.0) && margin.1 > Dd::of(0.0),
            })
        })
        .collect()
}

pub fn inclusion_table(rows: &[RegionInclusion]) -> Table {
    let mut t = Table::new(
        "region",
        &[
            "eta",
            "kappa",
            "fixed_lo",
            "fixed_hi",
            "required_lo",
            "required_hi",
            "margin_lo",
            "margin_hi",
            "contained",
        ],
    );
    for r in rows {
        t.push(vec![
            r.eta.into(),
            r.kappa.into(),
            r.fixed.0.into(),
            r.fixed.1.into(),
            r.required.0.into(),
            r.required.1.into(),
            r.margin.0.into(),
            r.margin.1.into(),
            r.contained.into(),
        ]);
    }
    t
}

/// Runnable companion of [`region_inclusion`]: a desk-scale α with a small
/// effective constant, `n_eta` step sizes in `(α²(1 - K⁻²/10), α²)` and
/// `n_x` starting points across the fixed `x₀` interval, all with
/// `x₀y₀ = 1 + b0`.
#[derive(Clone, Copy, Debug)]
pub struct EmpiricalRegion {
    pub alpha: f64,
    pub k_eff: f64,
    pub n_eta: usize,
    pub n_x: usize,
    pub b0: f64,
    pub max_steps: usize,
    /// Much tighter than the figure runs: sharpness creeps down to 2/η very
    /// slowly at the end, and a loose stop catches it just above.
    pub eps_stop: f64,
}

impl Default for EmpiricalRegion {
    fn default() -> Self {
        EmpiricalRegion {
            alpha: 0.1,
            k_eff: 2.0,
            n_eta: 5,
            n_x: 3,
            b0: 1e-3,
            max_steps: 2_000_000,
            eps_stop: 1e-22,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EmpiricalCell {
    pub eta: f64,
    pub x0: f64,
    pub steps: usize,
    pub stop: StopReason,
    pub final_sharpness: f64,
    pub in_window: bool,
}

pub fn empirical_region(e: &EmpiricalRegion) -> Vec<EmpiricalCell> {
    let kinv2 = 1.0 / (e.k_eff * e.k_eff);
    let ainv = 1.0 / e.alpha;
    let (lo, hi) = (ainv + kinv2 * ainv / 15.0, ainv + kinv2 * ainv / 6.0);
    let mut cells = Vec::new();
    for i in 0..e.n_eta {
        let eta = e.alpha * e.alpha * (1.0 - (i as f64 + 0.5) / e.n_eta as f64 * kinv2 / 10.0);
        for j in 0..e.n_x {
            let x0 = lo + (hi - lo) * (j as f64 + 0.5) / e.n_x as f64;
            cells.push((eta, x0));
        }
    }
    cells
        .par_iter()
        .map(|&(eta, x0)| {
            let s0 = Xy::new(x0, (1.0 + e.b0) / x0);
            let tr = run_trajectory(s0, eta, e.max_steps, StopSpec::quiet(e.eps_stop));
            let (wlo, whi) = sharpness_window(eta);
            let sharp = tr.last.sharpness;
            EmpiricalCell {
                eta,
                x0,
                steps: tr.steps(),
                stop: tr.stop,
                final_sharpness: sharp,
                in_window: tr.stop == StopReason::Converged && sharp > wlo && sharp < whi,
            }
        })
        .collect()
}

pub fn empirical_table(cells: &[EmpiricalCell]) -> Table {
    let mut t = Table::new("empirical", &["eta", "x0", "steps", "stop", "final_sharpness", "in_window"]);
    for c in cells {
        t.push(vec![
            c.eta.into(),
            c.x0.into(),
            c.steps.into(),
            c.stop.as_str().into(),
            c.final_sharpness.into(),
            c.in_window.into(),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_eta_is_a_plain_run() {
        let init = figure_init();
        let runs = sharpness_adaptivity::<f64>(&[0.2], init, 1000, 1e-10, 0);
        let tr = run_trajectory(init, 0.2, 1000, StopSpec::quiet(1e-10));
        assert_eq!(runs.len(), 1);
        assert_eq!(runs[0].steps, tr.steps());
        assert_eq!(runs[0].final_sharpness, tr.last.sharpness);
    }

    #[test]
    fn inclusion_holds_below_the_alpha_ceiling() {
        let k = 600.0;
        let rows = region_inclusion(0.9 * alpha_ceiling(k), k, 20).unwrap();
        assert_eq!(rows.len(), 20);
        assert!(rows.iter().all(|r| r.contained), "{rows:?}");
    }
}

//! `c(x, y) = sqrt(x² - y²)` against `x`, and the EoS minimum's `x̆`
//! against `κ⁻¹`, for large `x` near the minima manifold.

use eos_core::scalar_model::eos_minimum;
use eos_core::{Real, Xy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::output::Table;

/// The sampled κ range; the upper end is the largest κ checked.
pub const CX_KAPPA: (f64, f64) = (5e-4, 2e-3);

#[derive(Clone, Debug, PartialEq)]
pub enum CxStatus {
    Pass,
    Fail,
    Skipped(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CxCheck {
    pub kappa: f64,
    pub x: f64,
    pub y: f64,
    /// `x - c`, must lie in `(0, 32κ³)`.
    pub c_gap: f64,
    /// `|x̆ - κ⁻¹|`, must be below `36κ³`.
    pub xb_gap: f64,
    pub k3: f64,
    /// Whether κ also meets the `κ < K⁻¹/(2000√2)` hypothesis under which
    /// both inequalities are proved. It is sufficient, not necessary, so
    /// it does not gate the check.
    pub kappa_hypothesis: bool,
    pub status: CxStatus,
}

pub fn in_region(x: f64, y: f64, kappa: f64, k: f64) -> bool {
    kappa > 0.0 && x > 0.5 * 2f64.sqrt() / kappa && x < 2.0 / kappa && (1.0 - x * y).abs() < 1.0 / k
}

pub fn cx_check<T: Real>(x: f64, y: f64, kappa: f64, k: f64) -> CxCheck {
    let hyp = kappa < 1.0 / (2000.0 * 2f64.sqrt() * k);
    let skipped = |why: &str| CxCheck {
        kappa,
        x,
        y,
        c_gap: f64::NAN,
        xb_gap: f64::NAN,
        k3: kappa.powi(3),
        kappa_hypothesis: hyp,
        status: CxStatus::Skipped(why.to_string()),
    };
    if !in_region(x, y, kappa, k) {
        return skipped("outside x ∈ (√2/2κ⁻¹, 2κ⁻¹), |1 - xy| < 1/K");
    }
    let kt = T::of(kappa);
    let (xt, yt) = (T::of(x), T::of(y));
    let c = (xt * xt - yt * yt).sqrt();
    let Ok(Xy { x: xb, .. }) = eos_minimum(kt * kt) else {
        return skipped("no EoS minimum at this step size");
    };
    let k3 = kt.powi(3);
    let c_gap = xt - c;
    let xb_gap = (xb - T::one() / kt).abs();
    let ok = c_gap > T::zero() && c_gap < T::of(32.0) * k3 && xb_gap < T::of(36.0) * k3;
    CxCheck {
        kappa,
        x,
        y,
        c_gap: c_gap.as_f64(),
        xb_gap: xb_gap.as_f64(),
        k3: k3.as_f64(),
        kappa_hypothesis: hyp,
        status: if ok { CxStatus::Pass } else { CxStatus::Fail },
    }
}

/// `n` draws: κ log-uniform in `kappa_range`, `x` uniform in its interval,
/// `xy - 1` uniform in `(-1/K, 1/K)`. Draw `i` depends only on `(seed, i)`.
pub fn cx_approx_check<T: Real>(n: usize, kappa_range: (f64, f64), k: f64, seed: u64) -> Vec<CxCheck> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let u: f64 = rng.random();
            let kappa = (kappa_range.0.ln() + u * (kappa_range.1 / kappa_range.0).ln()).exp();
            let lo = 0.5 * 2f64.sqrt() / kappa;
            let x = lo + (2.0 / kappa - lo) * rng.random_range(1e-9..1.0 - 1e-9);
            let b = rng.random_range(-0.999..0.999) / k;
            cx_check::<T>(x, (1.0 + b) / x, kappa, k)
        })
        .collect()
}

pub fn cx_table(rows: &[CxCheck]) -> Table {
    let mut t = Table::new(
        "checks",
        &["kappa", "x", "y", "c_gap", "xb_gap", "kappa_cubed", "kappa_hypothesis", "status"],
    );
    for r in rows {
        let status = match &r.status {
            CxStatus::Pass => "Pass",
            CxStatus::Fail => "Fail",
            CxStatus::Skipped(_) => "Skipped",
        };
        t.push(vec![
            r.kappa.into(),
            r.x.into(),
            r.y.into(),
            r.c_gap.into(),
            r.xb_gap.into(),
            r.k3.into(),
            r.kappa_hypothesis.into(),
            status.into(),
        ]);
    }
    t
}

//! End-to-end acceptance run: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the report shows up in plain
//! `cargo test` output. The process fails if the set of failing criteria
//! differs from `KNOWN_FAILURES`.

use std::time::Instant;

use eos_core::dynamics_approx::{ab_one_step_exact, ab_one_step_via_xy};
use eos_core::scalar_model::{eos_minimum, hessian_eigenvalues, sharpness};
use eos_core::vector_model::loss_vec;
use eos_core::{Ab, Dd, LemmaId, PhaseLabel, Real, VecPair, VectorProtocolConfig, Xy, DEFAULT_DELTA, DEFAULT_K};
use eos_lab::{adapt, contrast, cx, grid, phases, residual, vector};
use nalgebra::{DMatrix, Matrix4, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The hitting-time bound on the final convergence phase is off by a factor
/// `κ⁻⁴`: observed times are ~9κ⁻⁴ log(|b₀|/ε) against a `25 log(1/ε)` limit.
/// Criterion 6 also asks for κ = 1.5e-3, i.e. ~10¹¹ steps per run.
const KNOWN_FAILURES: &[usize] = &[6];

const SEED: u64 = 20_240_601;

type Check = (bool, String);

fn eos_minimum_exact() -> Check {
    let mut worst = (0.0f64, 0.0f64);
    for eta in [0.01f64, 0.05, 0.1, 0.2, 0.3, 0.45] {
        let m = eos_minimum(eta).unwrap();
        let rel = (sharpness(m) - 2.0 / eta).abs() / (2.0 / eta);
        worst = (worst.0.max(rel), worst.1.max((m.x * m.y - 1.0).abs()));
    }
    (
        worst.0 < 1e-9 && worst.1 < 1e-12,
        format!("max rel. sharpness error {:.1e}, max |xy - 1| {:.1e}", worst.0, worst.1),
    )
}

fn sharpness_concentration() -> Check {
    let spec = grid::GridSpec::figure(0.2);
    let cells = grid::sharpness_concentration_grid::<f64>(&spec).unwrap();
    let s = grid::summarize(&cells);
    (
        s.passes(),
        format!(
            "theorem region {}/{} tight; converged starts above the centre {}/{} tight, {} stopped on an unstable minimum",
            s.theorem_region_tight,
            s.theorem_region,
            s.above_center_tight,
            s.above_center_converged,
            s.above_center_unstable
        ),
    )
}

fn sharpness_adaptivity() -> Check {
    let runs = adapt::sharpness_adaptivity::<f64>(&adapt::FIGURE_ETAS, adapt::figure_init(), 200_000, 1e-10, 0);
    let region = adapt::region_inclusion(0.9 * adapt::alpha_ceiling(DEFAULT_K), DEFAULT_K, 20).unwrap();
    let empirical = adapt::empirical_region(&adapt::EmpiricalRegion::default());
    let sharp: Vec<String> = runs.iter().map(|r| format!("{:.4}", r.final_sharpness)).collect();
    let contained = region.iter().filter(|r| r.contained).count();
    (
        runs.iter().all(|r| r.in_window) && contained == region.len(),
        format!(
            "terminal sharpness [{}]; fixed region inside the required one for {contained}/{} step sizes; \
             empirical region {}/{} in window",
            sharp.join(", "),
            region.len(),
            empirical.iter().filter(|c| c.in_window).count(),
            empirical.len()
        ),
    )
}

fn residual_bounds_strict() -> Check {
    let spec = residual::StudySpec {
        samples: 10_000,
        kappa: residual::KappaChoice::Window,
        k: DEFAULT_K,
        delta: DEFAULT_DELTA,
        seed: SEED,
    };
    let (_, summary) = residual::residual_study::<Dd>(&LemmaId::ALL, &spec).unwrap();
    let parts: Vec<String> = summary
        .iter()
        .map(|s| format!("{} {}/{}", s.lemma.name(), s.satisfied, s.samples))
        .collect();
    (summary.iter().all(residual::LemmaSummary::all_satisfied), parts.join(", "))
}

fn residual_scaling() -> Check {
    let fits = residual::scaling_fit::<f64>((0.01, 0.05), 9).unwrap();
    let parts: Vec<String> = fits
        .iter()
        .map(|f| format!("{} {:.3} vs {}", f.coordinate, f.fitted, f.expected))
        .collect();
    (fits.iter().all(|f| f.within(0.3)), parts.join(", "))
}

fn phase_structure() -> Check {
    let study = phases::PhaseStudy::desk(0.03, 100, SEED);
    let runs = phases::phase_study::<f64>(&study);
    let ordered = runs.iter().filter(|r| r.ordered()).count();
    let band = runs.iter().filter(|r| !r.band_violated).count();
    let final_a = runs
        .iter()
        .filter(|r| r.final_a_scaled.is_some_and(|a| a > -5.0 / 3.0 && a < -0.1))
        .count();
    let clean = runs.iter().filter(|r| r.bounds.all_passed()).count();
    let mut failed: Vec<&str> = runs.iter().flat_map(|r| r.bounds.failed().map(|c| c.name)).collect();
    failed.sort_unstable();
    failed.dedup();

    // same starts in double-double at a coarser κ: labels must agree
    let coarse = phases::PhaseStudy::desk(0.05, 5, SEED);
    let agree = (0..coarse.n)
        .filter(|&i| {
            let lo = phases::phase_run::<f64>(&coarse, i);
            let hi = phases::phase_run::<Dd>(&coarse, i);
            lo.labels == hi.labels && hi.final_label == PhaseLabel::Converged
        })
        .count();

    let n = runs.len();
    (
        ordered == n && band == n && final_a == n && clean == n && agree == coarse.n,
        format!(
            "κ = 0.03: {ordered}/{n} in phase order, {band}/{n} inside the band, {final_a}/{n} final a in range, \
             {clean}/{n} with all bounds met (failing: {}); double-double labels agree {agree}/{}",
            if failed.is_empty() { "none".to_string() } else { failed.join(", ") },
            coarse.n
        ),
    )
}

fn approximation_identities() -> Check {
    let rows = cx::cx_approx_check::<Dd>(10_000, cx::CX_KAPPA, DEFAULT_K, SEED);
    let pass = rows.iter().filter(|r| r.status == cx::CxStatus::Pass).count();
    (pass == rows.len(), format!("{pass}/{} samples", rows.len()))
}

fn vector_protocol() -> Check {
    let cfg = VectorProtocolConfig::new(50, 1e-3, DEFAULT_K, 40_000, SEED).unwrap();
    let s = vector::summarize(&vector::vector_batch(&cfg, SEED, 200));
    (
        s.success_rate() >= 0.9 && s.contraction_violations == 0 && s.max_perturb_rel_err < 1e-12,
        format!(
            "{}/{} reached the target in the window; contraction violations {}/{}; perturbation error {:.1e}",
            s.successes, s.runs, s.contraction_violations, s.contraction_checked, s.max_perturb_rel_err
        ),
    )
}

/// Hessian of `½(1 - xyzw)²` at `(x, x, y, y)` from its second partials.
fn numeric_hessian(x: f64, y: f64) -> Matrix4<f64> {
    let v = [x, x, y, y];
    let p: f64 = v.iter().product();
    let pi = |i: usize| (0..4).filter(|&k| k != i).map(|k| v[k]).product::<f64>();
    let pij = |i: usize, j: usize| (0..4).filter(|&k| k != i && k != j).map(|k| v[k]).product::<f64>();
    Matrix4::from_fn(|i, j| pi(i) * pi(j) - (1.0 - p) * if i == j { 0.0 } else { pij(i, j) })
}

fn frobenius_loss(p: &VecPair<f64>) -> f64 {
    let d = p.dim();
    let x = DMatrix::from_column_slice(d, 1, &p.x);
    let y = DMatrix::from_column_slice(d, 1, &p.y);
    let m = DMatrix::<f64>::identity(d, d) - &x * y.transpose() * &x * y.transpose();
    m.iter().map(|v| v * v).sum::<f64>() / 4.0
}

fn rel_gap<T: Real>(p: Ab<T>, q: Ab<T>) -> f64 {
    let da = ((p.a - q.a).abs() / (T::one() + p.a.abs())).as_f64();
    let db = ((p.b - q.b).abs() / (T::one() + p.b.abs())).as_f64();
    da.max(db)
}

fn oracle_equivalences() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);

    let mut hess = 0.0f64;
    for _ in 0..1000 {
        let (x, y) = (rng.random_range(1e-3..=3.0), rng.random_range(1e-3..=3.0));
        let mut num: Vec<f64> = SymmetricEigen::new(numeric_hessian(x, y)).eigenvalues.iter().copied().collect();
        let mut cf = hessian_eigenvalues(Xy::new(x, y)).to_vec();
        num.sort_by(|a, b| a.total_cmp(b));
        cf.sort_by(|a, b| a.total_cmp(b));
        let scale = num.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (a, b) in num.iter().zip(&cf) {
            hess = hess.max((a - b).abs() / scale);
        }
    }

    let mut frob = 0.0f64;
    for d in 2..=8 {
        for _ in 0..100 {
            let x = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
            let y = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
            let p = VecPair::new(x, y).unwrap();
            let (a, b) = (loss_vec(&p), frobenius_loss(&p));
            frob = frob.max((a - b).abs() / b.abs());
        }
    }

    let (mut route, mut route_dd) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let kappa: f64 = rng.random_range(0.05..0.6);
        let s = Ab::new(rng.random_range(-0.5..0.5), rng.random_range(-0.3..0.3));
        let (Ok(p), Ok(q)) = (ab_one_step_exact(s, kappa), ab_one_step_via_xy(s, kappa)) else {
            continue;
        };
        route = route.max(rel_gap(p, q));
        let sd = Ab::new(Dd::from(s.a), Dd::from(s.b));
        let kd = Dd::from(kappa);
        route_dd = route_dd.max(rel_gap(
            ab_one_step_exact(sd, kd).unwrap(),
            ab_one_step_via_xy(sd, kd).unwrap(),
        ));
    }

    (
        hess <= 1e-8 && frob <= 1e-10 && route <= 1e-9 && route_dd <= 1e-25,
        format!(
            "Hessian {hess:.1e}, Frobenius {frob:.1e}, one-step routes {route:.1e} (double) / {route_dd:.1e} (double-double)"
        ),
    )
}

fn degree2_contrast() -> Check {
    let runs = contrast::paired_contrast::<f64>(&contrast::paired_specs(0.01, 20)).unwrap();
    let ok = runs.iter().filter(|r| r.separates()).count();
    (ok == runs.len(), format!("{ok}/{} pairs separate", runs.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("eos_minimum_exact", eos_minimum_exact),
        ("sharpness_concentration", sharpness_concentration),
        ("sharpness_adaptivity", sharpness_adaptivity),
        ("residual_bounds_strict", residual_bounds_strict),
        ("residual_scaling", residual_scaling),
        ("phase_structure", phase_structure),
        ("approximation_identities", approximation_identities),
        ("vector_protocol", vector_protocol),
        ("oracle_equivalences", oracle_equivalences),
        ("degree2_contrast", degree2_contrast),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (ok, detail) = check();
        let n = i + 1;
        println!(
            "{} {n:>2} {name} ({:.1}s): {detail}",
            if ok { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
        if !ok {
            failed.push(n);
        }
    }
    let unexpected: Vec<_> = failed.iter().filter(|n| !KNOWN_FAILURES.contains(n)).collect();
    let fixed: Vec<_> = KNOWN_FAILURES.iter().filter(|n| !failed.contains(n)).collect();
    println!(
        "{} of {} criteria pass; known failures {KNOWN_FAILURES:?}",
        criteria.len() - failed.len(),
        criteria.len()
    );
    if !unexpected.is_empty() || !fixed.is_empty() {
        eprintln!("unexpected failures {unexpected:?}; known failures now passing {fixed:?}");
        std::process::exit(1);
    }
}

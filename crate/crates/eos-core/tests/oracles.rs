//! Cross-checks against independent computations: numeric Hessians,
//! finite differences, brute-force Frobenius norms, and a second route
//! through the coordinate changes.

use eos_core::dynamics_approx::{ab_one_step_exact, ab_one_step_via_xy, ab_two_step_exact, calibrate_k};
use eos_core::reparam::{delta_exact, delta_taylor};
use eos_core::scalar_model::{gradient, hessian_eigenvalues, loss};
use eos_core::vector_model::{
    alignment_factor, alignment_xi, gd_step_vec, ip_sq_next, loss_vec, sample_init, VectorProtocolConfig,
};
use eos_core::{Ab, Dd, Real, VecPair, Xy};
use nalgebra::{DMatrix, Matrix4, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Hessian of `½(1 - xyzw)²` at `(x, x, y, y)` from its second partials:
/// `H_ij = P_i P_j - (1 - P) P_ij` with `P = xyzw`.
fn numeric_hessian(x: f64, y: f64) -> Matrix4<f64> {
    let v = [x, x, y, y];
    let p: f64 = v.iter().product();
    let pi = |i: usize| (0..4).filter(|&k| k != i).map(|k| v[k]).product::<f64>();
    let pij = |i: usize, j: usize| (0..4).filter(|&k| k != i && k != j).map(|k| v[k]).product::<f64>();
    Matrix4::from_fn(|i, j| {
        let second = if i == j { 0.0 } else { pij(i, j) };
        pi(i) * pi(j) - (1.0 - p) * second
    })
}

#[test]
fn eigenvalues_match_numeric_hessian() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let pts = (0..1000).map(|_| (rng.random_range(1e-3..=3.0), rng.random_range(1e-3..=3.0)));
    for (x, y) in pts.chain([(1.5, 0.9), (2.2, 0.45)]) {
        let mut num: Vec<f64> = SymmetricEigen::new(numeric_hessian(x, y)).eigenvalues.iter().copied().collect();
        let mut cf = hessian_eigenvalues(Xy::new(x, y)).to_vec();
        num.sort_by(|a, b| a.total_cmp(b));
        cf.sort_by(|a, b| a.total_cmp(b));
        let scale = num.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (a, b) in num.iter().zip(&cf) {
            assert!((a - b).abs() <= 1e-8 * scale, "({x}, {y}): {num:?} vs {cf:?}");
        }
        // trace and product of the top pair
        let [l1, l2, _, _] = hessian_eigenvalues(Xy::new(x, y));
        let g = x * y;
        let s = x * x + y * y;
        assert!((l1 + l2 - s * (3.0 * g * g - 1.0)).abs() <= 1e-10 * scale);
        let det = -g * g * (3.0 - 10.0 * g * g + 7.0 * g.powi(4));
        assert!((l1 * l2 - det).abs() <= 1e-8 * scale * scale, "({x}, {y})");
    }
}

#[test]
fn top_pair_oracle_values() {
    // 4x4 numeric eigenvalues, frozen
    let e = hessian_eigenvalues(Xy::new(1.5, 0.9));
    let mut num: Vec<f64> = SymmetricEigen::new(numeric_hessian(1.5, 0.9)).eigenvalues.iter().copied().collect();
    num.sort_by(|a, b| b.total_cmp(a));
    assert!((e[0] - num[0]).abs() < 1e-12 * num[0]);
    let s = hessian_eigenvalues(Xy::new(2.2, 0.45))[0];
    let mut num: Vec<f64> = SymmetricEigen::new(numeric_hessian(2.2, 0.45)).eigenvalues.iter().copied().collect();
    num.sort_by(|a, b| b.total_cmp(a));
    assert!((s - num[0]).abs() < 1e-12 * num[0], "{s} {num:?}");
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    // truncation is h²|L'''|/6 and |L'''| ~ 1e6 at the corners of the box
    let h = 1e-7;
    for _ in 0..2000 {
        let (x, y) = (rng.random_range(-5.0..=5.0), rng.random_range(-5.0..=5.0));
        let (gx, gy) = gradient(Xy::new(x, y));
        // the loss reaches ~1e5 on this box, so difference in double-double,
        // shifting in double-double too so the step is exactly h
        let (xd, yd, hd) = (Dd::from(x), Dd::from(y), Dd::from(h));
        let l = |x: Dd, y: Dd| loss(Xy::new(x, y));
        let fx = ((l(xd + hd, yd) - l(xd - hd, yd)) / (hd + hd)).as_f64();
        let fy = ((l(xd, yd + hd) - l(xd, yd - hd)) / (hd + hd)).as_f64();
        assert!((gx - fx).abs() < 1e-6 && (gy - fy).abs() < 1e-6, "({x}, {y}): {gx} {fx} / {gy} {fy}");
    }
}

/// `¼‖I - x yᵀ x yᵀ‖²_F` summed entry by entry.
fn frobenius_loss(p: &VecPair<f64>) -> f64 {
    let d = p.dim();
    let x = DMatrix::from_column_slice(d, 1, &p.x);
    let y = DMatrix::from_column_slice(d, 1, &p.y);
    let m = DMatrix::<f64>::identity(d, d) - &x * y.transpose() * &x * y.transpose();
    m.iter().map(|v| v * v).sum::<f64>() / 4.0
}

#[test]
fn vector_loss_matches_frobenius() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for d in 2..=8 {
        for _ in 0..200 {
            let x = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
            let y = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
            let p = VecPair::new(x, y).unwrap();
            let (a, b) = (loss_vec(&p), frobenius_loss(&p));
            assert!((a - b).abs() <= 1e-10 * b.abs(), "d={d}: {a} {b}");
        }
    }
}

#[test]
fn vector_step_is_gradient_descent() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let eta = 0.1;
    let h = 1e-6;
    for _ in 0..50 {
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p = VecPair::new(x.clone(), y.clone()).unwrap();
        let q = gd_step_vec(&p, eta);
        for i in 0..8 {
            let bump = |s: f64| {
                let (mut x, mut y) = (x.clone(), y.clone());
                if i < 4 {
                    x[i] += s;
                } else {
                    y[i - 4] += s;
                }
                loss_vec(&VecPair::new(x, y).unwrap())
            };
            let g = (bump(h) - bump(-h)) / (2.0 * h);
            let step = if i < 4 { (p.x[i] - q.x[i]) / eta } else { (p.y[i - 4] - q.y[i - 4]) / eta };
            assert!((g - step).abs() < 1e-6, "coordinate {i}: {g} {step}");
        }
    }
}

#[test]
fn alignment_update_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..200 {
        let x: Vec<f64> = (0..16).map(|_| rng.random_range(-0.4..0.4)).collect();
        let y: Vec<f64> = (0..16).map(|_| rng.random_range(-0.4..0.4)).collect();
        let eta = rng.random_range(0.01..0.3);
        let p = VecPair::new(x, y).unwrap();
        let q = gd_step_vec(&p, eta);
        let (nx2, ny2, ip) = p.stats();
        let want = alignment_factor(nx2, ny2, ip, eta) * alignment_xi(&p);
        let got = alignment_xi(&q);
        assert!((got - want).abs() <= 1e-12 * want, "{got} {want}");
        let ip2 = ip_sq_next(nx2, ny2, ip, eta);
        assert!((q.ip() * q.ip() - ip2).abs() <= 1e-12 * ip2.max(1e-300));
    }
}

#[test]
fn sphere_inner_product_statistics() {
    let cfg = VectorProtocolConfig::new(50, 1e-3, 600.0, 0, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 10_000;
    let d = cfg.dim as f64;
    let norm = (cfg.delta_x * cfg.delta_y).powi(2);
    let mean = (0..n)
        .map(|_| {
            let p = sample_init(&cfg, &mut rng);
            p.ip() * p.ip() / norm
        })
        .sum::<f64>()
        / n as f64;
    // E u² = 1/d, E u⁴ = 3/(d(d+2)) for one coordinate of a uniform unit vector
    let sigma = ((3.0 / (d * (d + 2.0)) - 1.0 / (d * d)) / n as f64).sqrt();
    assert!((mean - 1.0 / d).abs() < 3.0 * sigma, "{mean} vs {} ± {sigma}", 1.0 / d);
}

fn rel_gap<T: Real>(p: Ab<T>, q: Ab<T>) -> f64 {
    let da = ((p.a - q.a).abs() / (T::one() + p.a.abs())).as_f64();
    let db = ((p.b - q.b).abs() / (T::one() + p.b.abs())).as_f64();
    da.max(db)
}

#[test]
fn one_step_routes_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..2000 {
        let kappa: f64 = rng.random_range(0.05..0.6);
        let a = rng.random_range(-0.5..0.5);
        let b = rng.random_range(-0.3..0.3);
        let s = Ab::new(a, b);
        let (Ok(p), Ok(q)) = (ab_one_step_exact(s, kappa), ab_one_step_via_xy(s, kappa)) else {
            continue;
        };
        assert!(rel_gap(p, q) <= 1e-9, "{s:?} κ={kappa}: {p:?} {q:?}");
        let sd = Ab::new(Dd::from(a), Dd::from(b));
        let kd = Dd::from(kappa);
        let p = ab_one_step_exact(sd, kd).unwrap();
        let q = ab_one_step_via_xy(sd, kd).unwrap();
        assert!(rel_gap(p, q) <= 1e-25, "{s:?} κ={kappa}: {}", rel_gap(p, q));
    }
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn delta_taylor_remainder_is_fifth_order() {
    let ks: Vec<f64> = (1..=8).map(|i| 0.01 * i as f64).collect();
    let s = Ab::new(Dd::from(0.5), Dd::from(0.1));
    let r: Vec<f64> = ks
        .iter()
        .map(|&k| (delta_exact(s, Dd::from(k)) - delta_taylor(s, Dd::from(k))).abs().as_f64().ln())
        .collect();
    let lk: Vec<f64> = ks.iter().map(|k| k.ln()).collect();
    let m = slope(&lk, &r);
    assert!(m >= 4.9, "slope {m}");
}

#[test]
fn calibrated_constant_does_not_grow_as_kappa_shrinks() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let ks = [1e-3, 2e-3, 5e-3, 1e-2, 2e-2, 5e-2];
    let mut lk = Vec::new();
    let mut lr = Vec::new();
    for &k in &ks {
        let pts: Vec<_> = (0..200)
            .map(|_| (k, rng.random_range(-0.01..0.01), rng.random_range(-0.01..0.01)))
            .collect();
        let c = calibrate_k::<Dd>(&pts, 1.0 / 600.0).unwrap();
        lk.push(f64::ln(k));
        lr.push(c.k_b.max(c.k_a).ln());
    }
    let m = slope(&lk, &lr);
    assert!(m.abs() < 0.2, "slope {m}, ratios {lr:?}");
}

#[test]
fn two_step_exact_is_composition() {
    let s = Ab::new(Dd::from(3e-4), Dd::from(2e-3));
    let k = Dd::from(0.01);
    let two = ab_two_step_exact(s, k).unwrap();
    let via = ab_one_step_via_xy(ab_one_step_via_xy(s, k).unwrap(), k).unwrap();
    assert!(rel_gap(two, via) < 1e-25);
}

use eos_core::dynamics_approx::{ab_one_step_exact, ab_one_step_via_xy, ab_two_step_exact, sample_in_regime};
use eos_core::reparam::{ab_to_cd, cd_to_ab, cd_to_xy, ode_family, xi, xy_to_ab, xy_to_cd};
use eos_core::scalar_model::{eos_minimum, gd_step, hessian_eigenvalues, sharpness};
use eos_core::vector_model::{alignment_xi, gd_step_vec, loss_vec, norms_to_ab, perturb};
use eos_core::{Ab, Cd, Dd, LemmaId, OdeFamily, VecPair, Xy};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

proptest! {
    #[test]
    fn step_commutes_with_negation_and_swap(x in -3.0..3.0f64, y in -3.0..3.0f64, eta in 1e-3..0.5f64) {
        let s = gd_step(Xy::new(x, y), eta);
        let n = gd_step(Xy::new(-x, -y), eta);
        prop_assert_eq!(n, Xy::new(-s.x, -s.y));
        // swapping reorders the products in the gradient, so equality holds
        // to a few ulps of the operands of the update
        let w = gd_step(Xy::new(y, x), eta);
        let (gx, gy) = eos_core::scalar_model::gradient(Xy::new(x, y));
        let tol = 4.0 * f64::EPSILON * (x.abs() + y.abs() + eta * (gx.abs() + gy.abs()));
        prop_assert!((w.x - s.y).abs() <= tol && (w.y - s.x).abs() <= tol);
    }

    #[test]
    fn axes_and_exact_minima_are_fixed(v in -5.0..5.0f64, e in -6i32..6, eta in 1e-3..0.5f64) {
        prop_assert_eq!(gd_step(Xy::new(v, 0.0), eta), Xy::new(v, 0.0));
        prop_assert_eq!(gd_step(Xy::new(0.0, v), eta), Xy::new(0.0, v));
        // powers of two make xy = ±1 exact
        let x = 2f64.powi(e);
        for s in [Xy::new(x, 1.0 / x), Xy::new(-x, 1.0 / x)] {
            prop_assert_eq!(gd_step(s, eta), s);
        }
    }

    #[test]
    fn global_minima_have_one_nonzero_eigenvalue(x in 0.05..5.0f64) {
        let s = Xy::new(x, 1.0 / x);
        let [l1, l2, l3, l4] = hessian_eigenvalues(s);
        prop_assert!(l2.abs() < 1e-10 && l3.abs() < 1e-10 && l4.abs() < 1e-10);
        prop_assert!(close(l1, 2.0 * (x * x + 1.0 / (x * x)), 1e-12));
        if x > 1.0 {
            let c = xy_to_cd(s).unwrap().c;
            prop_assert!(close(l1, 2.0 * (4.0 + c.powi(4)).sqrt(), 1e-12));
        }
    }

    #[test]
    fn eos_minimum_sits_on_the_threshold(eta in 1e-3..0.49f64) {
        let m = eos_minimum(eta).unwrap();
        prop_assert!(close(sharpness(m), 2.0 / eta, 1e-9));
        prop_assert!((m.x * m.y - 1.0).abs() < 1e-12);
        let ab = xy_to_ab(m, eta).unwrap();
        prop_assert!(ab.a.abs() < 1e-12 * m.x && ab.b.abs() < 1e-12);
    }

    #[test]
    fn coordinate_round_trip(y in 1e-3..3.0f64, gap in 1e-6..3.0f64, eta in 1e-3..0.45f64) {
        let s = Xy::new(y + gap, y);
        let back = cd_to_xy(xy_to_cd(s).unwrap()).unwrap();
        prop_assert!(close(back.x, s.x, 1e-12) && close(back.y, s.y, 1e-12));
        let cd = xy_to_cd(s).unwrap();
        let cd2 = ab_to_cd(cd_to_ab(cd, eta), eta);
        let back = cd_to_xy(cd2).unwrap();
        prop_assert!(close(back.x, s.x, 1e-12) && close(back.y, s.y, 1e-12));
    }

    #[test]
    fn offsets_increase_with_c_and_d(c in 0.1..10.0f64, d in 0.1..3.0f64, h in 1e-6..1.0f64, eta in 1e-3..0.45f64) {
        let p = cd_to_ab(Cd { c, d }, eta);
        let (up_c, up_d) = (cd_to_ab(Cd { c: c + h, d }, eta), cd_to_ab(Cd { c, d: d + h }, eta));
        prop_assert!(up_c.a > p.a);
        prop_assert!(up_d.b > p.b);
    }

    #[test]
    fn zero_residual_curve_is_the_parabola(along in 0.0..2.0f64, eta in 1e-4..0.2f64) {
        let kappa = eta.sqrt();
        let b = ode_family(OdeFamily::ParabolaFamily, 0.0, along, eta).unwrap();
        let scale = along * kappa / 2.0 + kappa.powi(4) / 16.0;
        prop_assert!(xi(Ab::new(along, b), kappa).abs() <= 1e-12 * scale);
        prop_assert!(xi(Ab::new(along, -b), kappa).abs() <= 1e-12 * scale);
    }

    #[test]
    fn manifold_is_invariant(a in -0.5..0.5f64, kappa in 0.01..0.6f64) {
        let s = Ab::new(a, 0.0);
        prop_assert_eq!(ab_one_step_exact(s, kappa).unwrap(), s);
        let v = ab_one_step_via_xy(s, kappa).unwrap();
        prop_assert!(v.b.abs() < 1e-15 && (v.a - a).abs() < 1e-12);
    }

    #[test]
    fn a_decreases_off_the_manifold(seed in any::<u64>(), kappa in 1e-4..1.6e-3f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s: Ab<Dd> = sample_in_regime(LemmaId::AMovement, Dd::from(kappa), 600.0, 0.04, &mut rng).unwrap();
        let n = ab_two_step_exact(s, Dd::from(kappa)).unwrap();
        prop_assert!(n.a < s.a, "{s:?} -> {n:?}");
    }

    #[test]
    fn vector_alignment_is_nonnegative(
        x in prop::collection::vec(-2.0..2.0f64, 2..12),
        y in prop::collection::vec(-2.0..2.0f64, 12),
    ) {
        let y = y[..x.len()].to_vec();
        let p = VecPair::new(x, y).unwrap();
        let xi0 = alignment_xi(&p);
        prop_assert!(xi0 >= 0.0);
        prop_assert!(alignment_xi(&gd_step_vec(&p, 0.05)) >= 0.0);
        // Cauchy–Schwarz
        prop_assert!(p.ip() * p.ip() <= p.nx2() * p.ny2() * (1.0 + 1e-15));
    }

    #[test]
    fn perturbation_scales_alignment_exactly(
        x in prop::collection::vec(-2.0..2.0f64, 6),
        y in prop::collection::vec(-2.0..2.0f64, 6),
        k in 10.0..1e4f64,
    ) {
        let p = VecPair::new(x, y).unwrap();
        let xi0 = alignment_xi(&p);
        prop_assume!(xi0 > 1e-6 * p.nx2() * p.ny2());
        let q = perturb(&p, k);
        let s = 1.0 + 2.0 / k;
        prop_assert!(close(alignment_xi(&q), s * s * xi0, 1e-13));
        prop_assert!(close(q.ny2().sqrt(), s * p.ny2().sqrt(), 1e-14));
    }

    #[test]
    fn rescaling_preserves_loss_and_alignment(
        x in prop::collection::vec(-2.0..2.0f64, 5),
        y in prop::collection::vec(-2.0..2.0f64, 5),
        s in 0.2..5.0f64,
    ) {
        let p = VecPair::new(x.clone(), y.clone()).unwrap();
        let q = VecPair::new(x.iter().map(|v| v * s).collect(), y.iter().map(|v| v / s).collect()).unwrap();
        prop_assert!(close(loss_vec(&p), loss_vec(&q), 1e-12));
        prop_assert!((p.ip() - q.ip()).abs() <= 1e-13 * p.nx2().max(1.0) * p.ny2().max(1.0));
        let (xp, xq) = (alignment_xi(&p), alignment_xi(&q));
        prop_assert!((xp - xq).abs() <= 1e-12 * xp.max(1e-12));
    }
}

#[test]
fn aligned_vectors_follow_the_scalar_run() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let eta = 0.01;
    for _ in 0..20 {
        let u: Vec<f64> = {
            use rand::Rng;
            let v: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
            let n = v.iter().map(|t| t * t).sum::<f64>().sqrt();
            v.into_iter().map(|t| t / n).collect()
        };
        let mut s = Xy::new(10.5, 0.0955);
        let mut p = VecPair::new(u.iter().map(|v| v * s.x).collect(), u.iter().map(|v| v * s.y).collect()).unwrap();
        for t in 0..2000 {
            s = gd_step(s, eta);
            p = gd_step_vec(&p, eta);
            assert!(close(p.nx2().sqrt(), s.x, 1e-11) && close(p.ny2().sqrt(), s.y, 1e-11), "step {t}");
        }
        // the norms map to the scalar (a, b) of the same point
        let ab = norms_to_ab(&p, eta).unwrap();
        let want = xy_to_ab(s, eta).unwrap();
        assert!((ab.a - want.a).abs() < 1e-9 && (ab.b - want.b).abs() < 1e-9);
    }
}

#[test]
fn across_offset_keeps_its_size_over_one_step() {
    // along in-regime scalar runs the one-step ratio satisfies (b'/b)⁴ > 0.7
    // κ = 0.02 needs K < 1/κ for the regime to be non-empty
    let (k, kk): (f64, f64) = (0.02, 40.0);
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..50 {
        let mut s: Ab<f64> = sample_in_regime(LemmaId::BMovement, k, kk, 0.04, &mut rng).unwrap();
        for _ in 0..200 {
            let n = ab_one_step_exact(s, k).unwrap();
            if s.b != 0.0 {
                assert!((n.b / s.b).powi(4) > 0.7, "{s:?} -> {n:?}");
            }
            s = n;
        }
    }
}

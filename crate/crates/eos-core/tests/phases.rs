use eos_core::dynamics_approx::AbStepper;
use eos_core::phase_tracker::{track_ab, verify_time_bounds, BoundParams, BoundStatus, TrackConfig};
use eos_core::{Ab, PhaseLabel};

fn cfg(kappa: f64) -> TrackConfig<f64> {
    TrackConfig {
        kappa,
        delta: 0.04,
        loss_below: 1e-10,
        max_pairs: 200_000_000,
        record_every: 0,
    }
}

// K = 600 leaves no room at runnable κ; K = 2 keeps the regions non-empty.
fn params() -> BoundParams {
    BoundParams {
        k: 2.0,
        enforce_kappa: false,
        ..BoundParams::new(1e-10)
    }
}

#[test]
fn in_band_run_passes_through_every_stage_in_order() {
    let k: f64 = 0.03;
    let a0 = 20.0 * k.powf(2.5);
    let s0 = Ab::new(a0, (a0 * k).sqrt());
    let out = track_ab(s0, &cfg(k));
    assert_eq!(out.final_label, PhaseLabel::Converged);
    assert!(out.labels_monotone, "{:?}", out.label_sequence);
    assert_eq!(
        out.label_sequence,
        [
            PhaseLabel::P1InBand,
            PhaseLabel::P2Stage1,
            PhaseLabel::P2Stage2,
            PhaseLabel::P2Stage3,
            PhaseLabel::Converged
        ]
    );
    let hits = out.hits.ordered();
    assert!(hits.iter().all(Option::is_some));
    assert!(hits.windows(2).all(|w| w[0] <= w[1]), "{hits:?}");
    assert!(out.hits.band_violation.is_none());

    let rep = verify_time_bounds(&out.hits, s0, k, &params());
    for name in ["phase1_stay", "band_invariant", "stay_interval", "final_a"] {
        assert_eq!(rep.get(name).unwrap().status, BoundStatus::Pass, "{name}: {:?}", rep.get(name));
    }
    // a ends inside (-5/3 κ³, -1/10 κ³)
    let a = out.hits.last.unwrap().ab.a / k.powi(3);
    assert!(a > -5.0 / 3.0 && a < -0.1, "{a}");

    // once in stage 3, |b| only shrinks
    let st = AbStepper::new(k);
    let mut s = out.hits.stage3.unwrap().ab;
    for _ in 0..100_000 {
        let n = st.two_step(s).unwrap();
        assert!(n.b.abs() < s.b.abs() || s.b == 0.0);
        s = n;
    }
}

#[test]
fn large_b_start_enters_the_band_in_time() {
    let k: f64 = 0.05;
    let a0 = 20.0 * k.powf(2.5);
    let s0 = Ab::new(a0, 2.0 * (a0 * k).sqrt());
    let out = track_ab(s0, &cfg(k));
    let rep = verify_time_bounds(&out.hits, s0, k, &params());
    let c = rep.get("large_b").unwrap();
    assert_eq!(c.status, BoundStatus::Pass, "{c:?}");
    assert!(c.observed.unwrap() < k.powi(-4));
    assert!(matches!(rep.get("small_b").unwrap().status, BoundStatus::Skipped(_)));
}

#[test]
fn small_b_start_enters_the_band_in_time() {
    let k: f64 = 0.05;
    let a0 = 30.0 * k.powf(2.5);
    let s0 = Ab::new(a0, 0.1 * (a0 * k).sqrt());
    let out = track_ab(s0, &cfg(k));
    let rep = verify_time_bounds(&out.hits, s0, k, &params());
    assert_eq!(rep.get("small_b").unwrap().status, BoundStatus::Pass, "{rep:?}");
    assert!(out.labels_monotone);
}

#[test]
fn strict_parameters_skip_everything_at_desk_kappa() {
    let k: f64 = 0.05;
    let a0 = 20.0 * k.powf(2.5);
    let s0 = Ab::new(a0, (a0 * k).sqrt());
    let out = track_ab(s0, &cfg(k));
    let rep = verify_time_bounds(&out.hits, s0, k, &BoundParams::new(1e-10));
    assert_eq!(rep.applicable(), 0);
}

//! Seeded batches of the rank-1 factorisation protocol.

use eos_core::vector_model::{alignment_xi, perturb, run_vector_protocol_from, sample_init};
use eos_core::{Error, ProtocolOutcome, VectorProtocolConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::output::Table;

#[derive(Clone, Debug)]
pub struct VectorRun {
    pub seed: u64,
    pub outcome: Result<ProtocolOutcome, Error>,
    /// `|ξ(perturb(p₀)) / ((1 + 2/K)² ξ(p₀)) - 1|` on the run's own
    /// (unaligned) initial pair.
    pub perturb_rel_err: f64,
}

impl VectorRun {
    /// Reached the target loss excess (the runner errors otherwise) with
    /// the final norm sum inside the window.
    pub fn success(&self) -> bool {
        self.outcome.as_ref().is_ok_and(|o| o.in_window)
    }
}

/// Runs seeds `seed0 .. seed0 + n`, each from its own generator.
pub fn vector_batch(base: &VectorProtocolConfig, seed0: u64, n: usize) -> Vec<VectorRun> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let cfg = VectorProtocolConfig {
                seed: seed0 + i,
                ..base.clone()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let p0 = sample_init(&cfg, &mut rng);
            let s2 = (1.0 + 2.0 / cfg.k).powi(2);
            let perturb_rel_err = (alignment_xi(&perturb(&p0, cfg.k)) / (s2 * alignment_xi(&p0)) - 1.0).abs();
            VectorRun {
                seed: cfg.seed,
                outcome: run_vector_protocol_from(&cfg, p0),
                perturb_rel_err,
            }
        })
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VectorSummary {
    pub runs: usize,
    pub successes: usize,
    pub contraction_checked: usize,
    pub contraction_violations: usize,
    pub max_perturb_rel_err: f64,
    pub errors: usize,
}

impl VectorSummary {
    pub fn success_rate(&self) -> f64 {
        if self.runs == 0 {
            0.0
        } else {
            self.successes as f64 / self.runs as f64
        }
    }
}

pub fn summarize(runs: &[VectorRun]) -> VectorSummary {
    let mut s = VectorSummary {
        runs: runs.len(),
        ..Default::default()
    };
    for r in runs {
        s.successes += usize::from(r.success());
        s.max_perturb_rel_err = s.max_perturb_rel_err.max(r.perturb_rel_err);
        match &r.outcome {
            Ok(o) => {
                s.contraction_checked += o.contraction_checked;
                s.contraction_violations += o.contraction_violations;
            }
            Err(_) => s.errors += 1,
        }
    }
    s
}

pub fn runs_table(runs: &[VectorRun]) -> Table {
    let mut t = Table::new(
        "runs",
        &[
            "seed",
            "status",
            "converged_at",
            "steps",
            "final_norm_sum",
            "final_loss_excess",
            "final_a",
            "final_b",
            "in_window",
            "xi_monotone",
            "contraction_checked",
            "contraction_violations",
            "feasible_before",
            "feasible_after",
            "final_xi",
            "perturb_rel_err",
            "within_theorem_range",
        ],
    );
    for r in runs {
        match &r.outcome {
            Ok(o) => t.push(vec![
                r.seed.into(),
                "ok".into(),
                o.converged_at.into(),
                o.steps.into(),
                o.final_norm_sum.into(),
                o.final_loss_excess.into(),
                o.final_ab.map(|ab| ab.a).into(),
                o.final_ab.map(|ab| ab.b).into(),
                o.in_window.into(),
                o.xi_monotone.into(),
                o.contraction_checked.into(),
                o.contraction_violations.into(),
                o.feasible_before.into(),
                o.feasible_after.into(),
                o.final_xi.into(),
                r.perturb_rel_err.into(),
                o.within_theorem_range.into(),
            ]),
            Err(e) => {
                let mut row = vec![r.seed.into(), e.to_string().into()];
                row.extend((0..13).map(|_| None::<f64>.into()));
                row.push(r.perturb_rel_err.into());
                row.push(None::<bool>.into());
                t.push(row);
            }
        }
    }
    t
}

pub fn trace_table(runs: &[VectorRun]) -> Table {
    let mut t = Table::new("traces", &["seed", "step", "xi", "ip_sq"]);
    for r in runs {
        if let Ok(o) = &r.outcome {
            for (&(s, xi), &(_, ip2)) in o.xi_trace.iter().zip(&o.ip2_trace) {
                t.push(vec![r.seed.into(), s.into(), xi.into(), ip2.into()]);
            }
        }
    }
    t
}

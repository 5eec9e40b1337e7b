//! Rank-1 factorisation `min ¼‖I - x yᵀ x yᵀ‖²_F` over `x, y ∈ R^d`.
//!
//! Everything the dynamics need is a function of `‖x‖²`, `‖y‖²` and `xᵀy`:
//! one GD step maps `(x, y)` to `(A x + B y, B x + E y)` with scalar `A, B, E`,
//! so the alignment defect `ξ = ‖x‖²‖y‖² - (xᵀy)²` is multiplied by exactly
//! `(AE - B²)²` per step.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, Error, Result};
use crate::real::Real;
use crate::reparam::{xy_to_ab, Ab};
use crate::scalar_model::{eos_minimum, Xy, DIVERGENCE_GUARD};

#[derive(Clone, Debug, PartialEq)]
pub struct VecPair<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
}

fn dot<T: Real>(u: &[T], v: &[T]) -> T {
    u.iter().zip(v).map(|(&a, &b)| a * b).sum()
}

impl<T: Real> VecPair<T> {
    pub fn new(x: Vec<T>, y: Vec<T>) -> Result<Self> {
        if x.len() != y.len() || x.len() < 2 {
            return domain(format!("need equal dimensions >= 2, got {} and {}", x.len(), y.len()));
        }
        Ok(VecPair { x, y })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn nx2(&self) -> T {
        dot(&self.x, &self.x)
    }

    pub fn ny2(&self) -> T {
        dot(&self.y, &self.y)
    }

    pub fn ip(&self) -> T {
        dot(&self.x, &self.y)
    }

    /// `(‖x‖², ‖y‖², xᵀy)`
    pub fn stats(&self) -> (T, T, T) {
        (self.nx2(), self.ny2(), self.ip())
    }
}

pub fn loss_vec<T: Real>(p: &VecPair<T>) -> T {
    let (nx2, ny2, ip) = p.stats();
    let ip2 = ip * ip;
    (T::of(p.dim() as f64) - T::of(2.0) * ip2 + ip2 * nx2 * ny2) / T::of(4.0)
}

/// `loss_vec - (d - 1)/4`, written as a sum of non-negative terms.
pub fn loss_excess<T: Real>(p: &VecPair<T>) -> T {
    let (nx2, ny2, ip) = p.stats();
    excess_from_stats(nx2, ny2, ip)
}

fn excess_from_stats<T: Real>(nx2: T, ny2: T, ip: T) -> T {
    let ip2 = ip * ip;
    let xi = (nx2 * ny2 - ip2).max(T::zero());
    ((ip2 - T::one()).sq() + ip2 * xi) / T::of(4.0)
}

/// The scalars `(A, B, E)` of one step: `x' = A x + B y`, `y' = B x + E y`.
pub fn step_coefficients<T: Real>(nx2: T, ny2: T, ip: T, eta: T) -> (T, T, T) {
    let half = T::of(0.5);
    let ip2 = ip * ip;
    let p = nx2 * ny2;
    (
        T::one() - half * eta * ip2 * ny2,
        eta * ip * (T::one() - half * p),
        T::one() - half * eta * ip2 * nx2,
    )
}

pub fn gd_step_vec<T: Real>(p: &VecPair<T>, eta: T) -> VecPair<T> {
    let (nx2, ny2, ip) = p.stats();
    let (a, b, e) = step_coefficients(nx2, ny2, ip, eta);
    let (x, y) = p
        .x
        .iter()
        .zip(&p.y)
        .map(|(&xi, &yi)| (a * xi + b * yi, b * xi + e * yi))
        .unzip();
    VecPair { x, y }
}

/// `Σ_{i<j} (x_i y_j - x_j y_i)²`, which equals `‖x‖²‖y‖² - (xᵀy)²` but
/// keeps relative accuracy when the vectors are nearly parallel.
pub fn alignment_xi<T: Real>(p: &VecPair<T>) -> T {
    let n = p.dim();
    let mut s = T::zero();
    for i in 0..n {
        for j in i + 1..n {
            s += (p.x[i] * p.y[j] - p.x[j] * p.y[i]).sq();
        }
    }
    s
}

/// `η(‖x‖² + ‖y‖²) - 1`
pub fn alpha<T: Real>(p: &VecPair<T>, eta: T) -> T {
    eta * (p.nx2() + p.ny2()) - T::one()
}

/// `ξ_{t+1} / ξ_t` in the closed form
/// `(1 - (xᵀy)² η (‖x‖²/2 + ‖y‖²/2 + η((2 - P)² - P (xᵀy)²)/4))²`, `P = ‖x‖²‖y‖²`.
pub fn alignment_factor<T: Real>(nx2: T, ny2: T, ip: T, eta: T) -> T {
    let ip2 = ip * ip;
    let p = nx2 * ny2;
    let half = T::of(0.5);
    let inner = half * nx2 + half * ny2 + eta / T::of(4.0) * ((T::of(2.0) - p).sq() - p * ip2);
    (T::one() - ip2 * eta * inner).sq()
}

/// `(x_{t+1}ᵀ y_{t+1})²` in closed form. Only the square is determined; the
/// sign of `xᵀy` has to be carried separately.
pub fn ip_sq_next<T: Real>(nx2: T, ny2: T, ip: T, eta: T) -> T {
    let ip2 = ip * ip;
    let p = nx2 * ny2;
    let half = T::of(0.5);
    let first = eta * (nx2 + ny2) * (T::one() - half * p - half * ip2);
    let second = eta * eta / T::of(4.0) * ip2 * (T::of(4.0) * (p - T::one()).sq() - p * (p - ip2));
    ip2 * (T::one() + first + second).sq()
}

/// Scales `y` by `1 + 2/K`.
pub fn perturb<T: Real>(p: &VecPair<T>, k: T) -> VecPair<T> {
    let s = T::one() + T::of(2.0) / k;
    VecPair {
        x: p.x.clone(),
        y: p.y.iter().map(|&v| v * s).collect(),
    }
}

/// Scalar-equivalent `(a, b)` of the norm pair `(‖x‖, ‖y‖)`.
pub fn norms_to_ab<T: Real>(p: &VecPair<T>, eta: T) -> Result<Ab<T>> {
    norms_ab(p.nx2(), p.ny2(), eta)
}

fn norms_ab<T: Real>(nx2: T, ny2: T, eta: T) -> Result<Ab<T>> {
    xy_to_ab(Xy::new(nx2.sqrt(), ny2.sqrt()), eta)
}

fn sphere<R: Rng + ?Sized>(d: usize, radius: f64, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = v.iter().map(|t| t * t).sum::<f64>().sqrt();
        if n > 0.0 {
            return v.into_iter().map(|t| t * radius / n).collect();
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorProtocolConfig {
    pub dim: usize,
    pub eta: f64,
    pub k: f64,
    /// Step at which `y` is scaled by `1 + 2/K`.
    pub t_p: usize,
    /// Target loss excess.
    pub eps: f64,
    pub seed: u64,
    pub delta_x: f64,
    pub delta_y: f64,
    pub delta_0: f64,
    pub max_steps: usize,
    /// Keep every n-th step of the ξ and `(xᵀy)²` traces (0: none).
    pub trace_every: usize,
}

impl VectorProtocolConfig {
    /// Radii inside the theorem's range: `δx = x̆ + K⁻²η^(-1/2)/16`,
    /// `δy = 1/(2δx)`.
    pub fn new(dim: usize, eta: f64, k: f64, t_p: usize, seed: u64) -> Result<Self> {
        let xb = eos_minimum(eta)?.x;
        let delta_x = xb + 1.0 / (16.0 * k * k * eta.sqrt());
        Ok(VectorProtocolConfig {
            dim,
            eta,
            k,
            t_p,
            eps: 1e-8,
            seed,
            delta_x,
            delta_y: 0.5 / delta_x,
            delta_0: 0.02,
            max_steps: 50_000_000,
            trace_every: 0,
        })
    }

    /// Whether the configuration satisfies the theorem's hypotheses. The
    /// step-size bound is far below anything runnable, so desk-scale
    /// configurations normally fail it.
    pub fn within_theorem_range(&self) -> bool {
        let Ok(m) = eos_minimum(self.eta) else {
            return false;
        };
        let k2 = self.k * self.k;
        let w = 1.0 / (k2 * self.eta.sqrt());
        let eta_max = (1.0 / (k2 * k2 * 8e6)).min(1.0 / (k2 * (20000.0 + 2000.0 * ((self.dim as f64).ln() - self.delta_0.ln()))));
        (self.delta_x * self.delta_y - 0.5).abs() < 1e-12
            && self.delta_x > m.x + w / 80.0
            && self.delta_x < m.x + w / 8.0
            && self.eta < eta_max
    }
}

pub fn sample_init<R: Rng + ?Sized>(cfg: &VectorProtocolConfig, rng: &mut R) -> VecPair<f64> {
    VecPair {
        x: sphere(cfg.dim, cfg.delta_x, rng),
        y: sphere(cfg.dim, cfg.delta_y, rng),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolOutcome {
    /// First step with loss excess below `eps`.
    pub converged_at: Option<usize>,
    pub steps: usize,
    pub final_norm_sum: f64,
    pub final_loss_excess: f64,
    pub final_ab: Option<Ab<f64>>,
    /// `‖x‖² + ‖y‖² ∈ (1/η - 10η/3, 1/η)` at the end.
    pub in_window: bool,
    /// ξ never increased (perturbation step excluded).
    pub xi_monotone: bool,
    /// Steps inside the contraction window and those violating `ξ' < 0.7ξ`.
    pub contraction_checked: usize,
    pub contraction_violations: usize,
    /// First step with `|‖x‖‖y‖ - 1| < 1/K` before and after the perturbation.
    pub feasible_before: Option<usize>,
    pub feasible_after: Option<usize>,
    /// `ξ` carried through the exact per-step factor.
    pub final_xi: f64,
    pub xi_trace: Vec<(usize, f64)>,
    pub ip2_trace: Vec<(usize, f64)>,
    pub within_theorem_range: bool,
}

/// Simulates GD from a seeded spherical initialisation with one perturbation
/// at `t_p`. Runs until the loss excess drops below `eps` after the
/// perturbation, or `max_steps`.
pub fn run_vector_protocol(cfg: &VectorProtocolConfig) -> Result<ProtocolOutcome> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    let p0 = sample_init(cfg, &mut rng);
    run_vector_protocol_from(cfg, p0)
}

pub fn run_vector_protocol_from(cfg: &VectorProtocolConfig, p0: VecPair<f64>) -> Result<ProtocolOutcome> {
    let eta = cfg.eta;
    let kinv = 1.0 / cfg.k;
    let mut p = p0;
    // ξ is carried through the exact factor (AE - B²)²; recomputing it from
    // the vectors stalls at the rounding floor once they are aligned.
    let mut xi = alignment_xi(&p);
    let mut out = ProtocolOutcome {
        converged_at: None,
        steps: 0,
        final_norm_sum: f64::NAN,
        final_loss_excess: f64::NAN,
        final_ab: None,
        in_window: false,
        xi_monotone: true,
        contraction_checked: 0,
        contraction_violations: 0,
        feasible_before: None,
        feasible_after: None,
        final_xi: xi,
        xi_trace: Vec::new(),
        ip2_trace: Vec::new(),
        within_theorem_range: cfg.within_theorem_range(),
    };
    let s2 = (1.0 + 2.0 * kinv).powi(2);
    let mut t = 0usize;
    loop {
        let (nx2, ny2, ip) = p.stats();
        if !(nx2.is_finite() && ny2.is_finite()) || nx2.max(ny2) > DIVERGENCE_GUARD {
            return Err(Error::Diverged(t));
        }
        let ip2 = ip * ip;
        if cfg.trace_every > 0 && t % cfg.trace_every == 0 {
            out.xi_trace.push((t, xi));
            out.ip2_trace.push((t, ip2));
        }
        if ((nx2 * ny2).sqrt() - 1.0).abs() < kinv {
            let slot = if t <= cfg.t_p { &mut out.feasible_before } else { &mut out.feasible_after };
            slot.get_or_insert(t);
        }
        let excess = excess_from_stats(nx2, ny2, ip);
        if t > cfg.t_p && excess < cfg.eps {
            out.converged_at = Some(t);
            break;
        }
        if t >= cfg.max_steps {
            break;
        }
        if t == cfg.t_p {
            // Measuring ξ'/ξ on the vectors here would only see rounding:
            // by t_p they are aligned to the last bit.
            p = perturb(&p, cfg.k);
            xi *= s2;
            t += 1;
            continue;
        }
        let f = alignment_factor(nx2, ny2, ip, eta);
        let a = eta * (nx2 + ny2) - 1.0;
        if ip2 > 0.35 && ip2 < 1.3 && a > -0.01 && a < 0.125 && xi > 0.0 {
            out.contraction_checked += 1;
            if f >= 0.7 {
                out.contraction_violations += 1;
            }
        }
        if f > 1.0 && xi > 0.0 {
            out.xi_monotone = false;
        }
        xi *= f;
        p = gd_step_vec(&p, eta);
        t += 1;
    }
    let (nx2, ny2, ip) = p.stats();
    out.steps = t;
    out.final_xi = xi;
    out.final_norm_sum = nx2 + ny2;
    out.final_loss_excess = excess_from_stats(nx2, ny2, ip);
    out.final_ab = norms_ab(nx2, ny2, eta).ok();
    let inv = 1.0 / eta;
    out.in_window = out.final_norm_sum > inv - 10.0 / 3.0 * eta && out.final_norm_sum < inv;
    if out.converged_at.is_none() {
        return Err(Error::NonConvergedWithinBudget(t));
    }
    Ok(out)
}

//! Sharpness concentration over a grid of initialisations.
//!
//! Rows are `x₀`; columns are either `y₀` directly or the across-manifold
//! offset `b₀ = x₀y₀ - 1` (then `y₀ = (1 + b₀)/x₀`), which is how the
//! near-manifold band of the figure is laid out.

use eos_core::phase_tracker::in_theorem_region;
use eos_core::reparam::xy_to_ab;
use eos_core::scalar_model::{run_trajectory, sharpness, StopReason, StopSpec};
use eos_core::{Real, Xy};
use rayon::prelude::*;

use crate::output::Table;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum YAxis {
    Y,
    /// Columns are `b₀ = x₀y₀ - 1`.
    Offset,
}

#[derive(Clone, Debug)]
pub struct GridSpec {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub y_axis: YAxis,
    pub nx: usize,
    pub ny: usize,
    pub eta: f64,
    pub max_steps: usize,
    pub eps_stop: f64,
    /// Constant used for the theorem-region column.
    pub k: f64,
}

impl GridSpec {
    /// `x₀ ∈ [1.8, 3.2]`, `b₀ ∈ [-0.05, 0.05]`: the near-manifold band plus
    /// an exploratory margin around it.
    pub fn figure(eta: f64) -> Self {
        GridSpec {
            x_range: (1.8, 3.2),
            y_range: (-0.05, 0.05),
            y_axis: YAxis::Offset,
            nx: 50,
            ny: 50,
            eta,
            max_steps: 50_000,
            eps_stop: 1e-10,
            k: eos_core::DEFAULT_K,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.nx == 0 || self.ny == 0 {
            return Err("nx and ny must be >= 1".into());
        }
        let finite = [self.x_range.0, self.x_range.1, self.y_range.0, self.y_range.1]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err("grid ranges must be finite".into());
        }
        if !(self.eta > 0.0) {
            return Err("eta must be positive".into());
        }
        Ok(())
    }

    fn axis(r: (f64, f64), n: usize, i: usize) -> f64 {
        if n == 1 {
            r.0
        } else {
            r.0 + (r.1 - r.0) * i as f64 / (n - 1) as f64
        }
    }

    pub fn init(&self, i: usize, j: usize) -> Xy<f64> {
        let x = Self::axis(self.x_range, self.nx, i);
        let v = Self::axis(self.y_range, self.ny, j);
        match self.y_axis {
            YAxis::Y => Xy::new(x, v),
            YAxis::Offset => Xy::new(x, (1.0 + v) / x),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CellClass {
    /// Converged with sharpness in `(2/η - 20η/3, 2/η)`.
    InWindow,
    Flatter,
    Sharper,
    Diverged,
    NonConverged,
}

impl CellClass {
    pub fn as_str(self) -> &'static str {
        match self {
            CellClass::InWindow => "InWindow",
            CellClass::Flatter => "Flatter",
            CellClass::Sharper => "Sharper",
            CellClass::Diverged => "Diverged",
            CellClass::NonConverged => "NonConverged",
        }
    }
}

/// `(2/η - 20η/3, 2/η)`
pub fn sharpness_window(eta: f64) -> (f64, f64) {
    (2.0 / eta - 20.0 / 3.0 * eta, 2.0 / eta)
}

pub fn classify_cell(stop: StopReason, sharp: f64, eta: f64) -> CellClass {
    let (lo, hi) = sharpness_window(eta);
    match stop {
        StopReason::Diverged => CellClass::Diverged,
        StopReason::MaxSteps => CellClass::NonConverged,
        StopReason::Converged if !sharp.is_finite() => CellClass::Diverged,
        StopReason::Converged if sharp <= lo => CellClass::Flatter,
        StopReason::Converged if sharp >= hi => CellClass::Sharper,
        StopReason::Converged => CellClass::InWindow,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellResult {
    pub i: usize,
    pub j: usize,
    pub init: Xy<f64>,
    pub a0: Option<f64>,
    pub b0: f64,
    pub initial_sharpness: f64,
    pub in_theorem_region: bool,
    pub steps: usize,
    pub stop: StopReason,
    pub final_loss: f64,
    pub final_sharpness: f64,
    pub class: CellClass,
    /// Converged with sharpness in `(2/η - 0.1, 2/η)`.
    pub tight: bool,
}

pub fn run_cell<T: Real>(spec: &GridSpec, i: usize, j: usize) -> CellResult {
    let s0 = spec.init(i, j);
    let eta = spec.eta;
    let a0 = xy_to_ab(s0, eta).ok().map(|ab| ab.a);
    let region = xy_to_ab(s0, eta).is_ok_and(|ab| in_theorem_region(ab, eta.sqrt(), spec.k));
    let tr = run_trajectory(Xy::<T>::from_f64(s0), T::of(eta), spec.max_steps, StopSpec::quiet(T::of(spec.eps_stop)));
    let final_sharpness = tr.last.sharpness.as_f64();
    let class = classify_cell(tr.stop, final_sharpness, eta);
    CellResult {
        i,
        j,
        init: s0,
        a0,
        b0: s0.x * s0.y - 1.0,
        initial_sharpness: sharpness(s0),
        in_theorem_region: region,
        steps: tr.steps(),
        stop: tr.stop,
        final_loss: tr.last.loss.as_f64(),
        final_sharpness,
        class,
        tight: tr.stop == StopReason::Converged && final_sharpness > 2.0 / eta - 0.1 && final_sharpness < 2.0 / eta,
    }
}

/// Runs every cell in parallel; results come back in row-major cell order
/// whatever the completion order.
pub fn sharpness_concentration_grid<T: Real>(spec: &GridSpec) -> Result<Vec<CellResult>, String> {
    spec.validate()?;
    let cells: Vec<(usize, usize)> = (0..spec.nx).flat_map(|i| (0..spec.ny).map(move |j| (i, j))).collect();
    Ok(cells.par_iter().map(|&(i, j)| run_cell::<T>(spec, i, j)).collect())
}

pub const GRID_COLUMNS: [&str; 15] = [
    "i",
    "j",
    "x0",
    "y0",
    "a0",
    "b0",
    "initial_sharpness",
    "in_theorem_region",
    "steps",
    "stop",
    "final_loss",
    "final_sharpness",
    "class",
    "tight_window",
    "eta",
];

pub fn grid_table(spec: &GridSpec, cells: &[CellResult]) -> Table {
    let mut t = Table::new("cells", &GRID_COLUMNS);
    for c in cells {
        t.push(vec![
            c.i.into(),
            c.j.into(),
            c.init.x.into(),
            c.init.y.into(),
            c.a0.into(),
            c.b0.into(),
            c.initial_sharpness.into(),
            c.in_theorem_region.into(),
            c.steps.into(),
            c.stop.as_str().into(),
            c.final_loss.into(),
            c.final_sharpness.into(),
            c.class.as_str().into(),
            c.tight.into(),
            spec.eta.into(),
        ]);
    }
    t
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GridSummary {
    pub cells: usize,
    pub theorem_region: usize,
    pub theorem_region_tight: usize,
    /// Cells that start above the EoS minimum along the manifold (`a₀ > 0`).
    pub above_center: usize,
    pub above_center_converged: usize,
    pub above_center_tight: usize,
    /// Converged runs that stopped on the loss threshold at an unstable
    /// minimum (sharpness ≥ 2/η); GD would leave it given more steps.
    pub above_center_unstable: usize,
    pub counts: Vec<(CellClass, usize)>,
}

impl GridSummary {
    /// Every theorem-region cell tight, and every converged start above the
    /// centre either tight or stopped on an unstable minimum.
    pub fn passes(&self) -> bool {
        self.theorem_region_tight == self.theorem_region
            && self.above_center_tight + self.above_center_unstable == self.above_center_converged
    }
}

pub fn summarize(cells: &[CellResult]) -> GridSummary {
    let mut s = GridSummary {
        cells: cells.len(),
        ..Default::default()
    };
    for class in [
        CellClass::InWindow,
        CellClass::Flatter,
        CellClass::Sharper,
        CellClass::Diverged,
        CellClass::NonConverged,
    ] {
        s.counts.push((class, cells.iter().filter(|c| c.class == class).count()));
    }
    for c in cells {
        if c.in_theorem_region {
            s.theorem_region += 1;
            s.theorem_region_tight += usize::from(c.tight && c.final_loss < 1e-10);
        }
        if c.a0.is_some_and(|a| a > 0.0) {
            s.above_center += 1;
            if c.stop == StopReason::Converged {
                s.above_center_converged += 1;
                s.above_center_tight += usize::from(c.tight);
                s.above_center_unstable += usize::from(c.class == CellClass::Sharper);
            }
        }
    }
    s
}

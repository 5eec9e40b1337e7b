//! Gradient descent at the edge of stability on the quartic scalar model
//! `L(x, y) = (1 - x^2 y^2)^2 / 4` and on its rank-1 isotropic matrix
//! factorisation extension.
//!
//! Everything numerical is generic over [`Real`], implemented for `f32`,
//! `f64` and the double-double type [`Dd`]. The `*64` / `*Dd` aliases below
//! pin the common choices.

pub mod dd;
pub mod dynamics_approx;
pub mod error;
pub mod phase_tracker;
pub mod real;
pub mod reparam;
pub mod scalar_model;
pub mod vector_model;

pub use dd::Dd;
pub use error::{Error, Result};
pub use real::{Precision, Real};

pub use dynamics_approx::{ConditionId, LemmaId, ResidualReport};
pub use phase_tracker::{HittingTimes, PhaseLabel, TrajectoryRecord};
pub use reparam::{Ab, Cd, OdeFamily};
pub use scalar_model::{StopReason, StopSpec, Trajectory, Xy};
pub use vector_model::{ProtocolOutcome, VecPair, VectorProtocolConfig};

/// The constant bounding every remainder term; the analysis needs `K > 512`.
pub const DEFAULT_K: f64 = 600.0;
/// Width parameter of the phase-II windows.
pub const DEFAULT_DELTA: f64 = 0.04;

pub type Xy64 = Xy<f64>;
pub type XyDd = Xy<Dd>;
pub type Cd64 = Cd<f64>;
pub type CdDd = Cd<Dd>;
pub type Ab64 = Ab<f64>;
pub type AbDd = Ab<Dd>;
pub type VecPair64 = VecPair<f64>;
pub type ResidualReport64 = ResidualReport<f64>;
pub type ResidualReportDd = ResidualReport<Dd>;

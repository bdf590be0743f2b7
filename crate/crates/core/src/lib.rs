//! Cost-sensitive k-nearest-neighbour classification on embedded manifolds.
//!
//! The crate is organised bottom-up:
//!
//! * [`cost_geometry`]: cost matrices, optimal label sets, margins, regret and
//!   the two-point calibration constants.
//! * [`projection`]: Gaussian and Achlioptas random projections, distortion
//!   measurement and target-dimension bounds.
//! * [`neighbours`]: exact and projected k-NN search with empirical
//!   approximation ratios.
//! * [`classifier`]: the plug-in cost-sensitive rule, `k_n` schedules and
//!   Monte-Carlo risk evaluation.
//! * [`manifold_lab`]: circles and spheres embedded in `R^d`, geodesic
//!   geometry, nets, covering numbers and volume-bound validators.
//! * [`hard_family`]: benign and worst-case synthetic distributions with
//!   Bayes and ball-measure oracles and condition validators.
//! * [`bench`]: rate experiments, slope fitting, concentration checks and
//!   the full verification battery.

pub mod bench;
pub mod classifier;
pub mod cost_geometry;
pub mod error;
pub mod hard_family;
pub mod manifold_lab;
pub mod neighbours;
pub mod numeric;
pub mod projection;
pub mod rng;

pub use cost_geometry::{CostCalibration, CostMatrix, Label, ProbVector};
pub use error::{Error, Result};

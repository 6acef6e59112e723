//! Geometric rigid-body state estimation on SO(3) and SE(3).
//!
//! - [`liegroup`]: exponential and logarithm maps, adjoints, and the
//!   exponential-coordinate Jacobian `G(eta)`.
//! - [`wahba`]: generalized Wahba cost, weight construction, critical points.
//! - [`measurement`]: direction and gyro sensor models, bounded noise,
//!   Butterworth pre-filter.
//! - [`dynamics`]: truth simulation, gravity-gradient wrench.
//! - [`varest`]: the variational attitude estimator and its discretizations.
//! - [`baselines`]: GAME, MEKF and constant-gain comparison filters.
//! - [`se3obs`]: pose and velocity observers on SE(3).
//! - [`harness`]: scenarios, runs, benchmarks, export, log replay.

pub mod baselines;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod liegroup;
pub mod measurement;
pub mod se3obs;
pub mod varest;
pub mod wahba;

pub use error::{GeoError, Result};

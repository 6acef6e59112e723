//! Run results and error metrics.

use crate::liegroup::{principal_angle, Mat3, Rotation, Vec3, Vec6};

/// Per-row status. Rows after a filter failure carry `Singular` and NaN values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flag {
    Ok,
    Singular,
}

impl Flag {
    pub fn as_str(&self) -> &'static str {
        match self {
            Flag::Ok => "ok",
            Flag::Singular => "singular",
        }
    }

    pub fn parse(s: &str) -> Option<Flag> {
        match s {
            "ok" => Some(Flag::Ok),
            "singular" => Some(Flag::Singular),
            _ => None,
        }
    }
}

/// Errors of one filter at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    /// Principal angle of the attitude error, rad.
    pub phi: f64,
    /// Angular-velocity error norm, rad/s.
    pub omega_err: f64,
    /// Attitude runs: gyro bias error, rad/s. Pose runs: translational
    /// exponential-coordinate error, in the run's length unit.
    pub beta_err: Vec3,
    /// Gravity-parameter error, in the run's length unit cubed per s^2.
    pub mu_err: f64,
    /// Pose runs only: `(eta, xi_err)`.
    pub pose: Option<(Vec6, Vec6)>,
    /// Lyapunov value where the filter defines one, NaN otherwise.
    pub lyapunov: f64,
    pub flag: Flag,
}

impl Sample {
    /// A row for a filter that has failed.
    pub fn singular(t: f64) -> Self {
        Sample {
            t,
            phi: f64::NAN,
            omega_err: f64::NAN,
            beta_err: Vec3::repeat(f64::NAN),
            mu_err: f64::NAN,
            pose: None,
            lyapunov: f64::NAN,
            flag: Flag::Singular,
        }
    }
}

/// Time series of one filter.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSeries {
    pub filter: String,
    pub samples: Vec<Sample>,
    /// Time of the first singular row.
    pub singular_at: Option<f64>,
    /// Message of the error that stopped the filter.
    pub error: Option<String>,
    /// Wall-clock time spent in the filter's update loop, s.
    pub wall_clock_s: f64,
}

impl FilterSeries {
    pub fn singular(&self) -> bool {
        self.singular_at.is_some()
    }

    /// Not singular, and the attitude error over the last tenth of the run
    /// stays below `tol_rad`.
    pub fn converged(&self, tol_rad: f64) -> bool {
        if self.singular() || self.samples.is_empty() {
            return false;
        }
        let tail = (self.samples.len() / 10).max(1);
        self.samples[self.samples.len() - tail..].iter().all(|s| s.phi < tol_rad)
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    /// First sample at or after `t`.
    pub fn at(&self, t: f64) -> Option<&Sample> {
        self.samples.iter().find(|s| s.t >= t - 1e-9)
    }

    /// Largest principal angle over samples with `t >= t0`.
    pub fn max_phi_after(&self, t0: f64) -> f64 {
        self.samples.iter().filter(|s| s.t >= t0 - 1e-9).map(|s| s.phi).fold(0.0, f64::max)
    }
}

/// Output of one scenario run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub scenario: String,
    pub series: Vec<FilterSeries>,
}

impl RunResult {
    pub fn filter(&self, name: &str) -> Option<&FilterSeries> {
        self.series.iter().find(|s| s.filter == name)
    }

    /// True when every filter failed.
    pub fn all_failed(&self) -> bool {
        !self.series.is_empty() && self.series.iter().all(FilterSeries::singular)
    }
}

/// Attitude runs flag a filter as singular once the error stays above this angle...
pub const SINGULAR_ANGLE_RAD: f64 = 170.0 * std::f64::consts::PI / 180.0;
/// ...for this long.
pub const SINGULAR_HOLD_S: f64 = 1.0;

/// `principal_angle(R R_hat^T)`.
pub fn metric_principal_angle(r_true: &Rotation, rhat: &Rotation) -> f64 {
    let q: Mat3 = r_true.matrix() * rhat.matrix().transpose();
    principal_angle(&Rotation::from_matrix_unchecked(q))
}

/// Principal-angle series of a list of estimates against a truth trajectory.
pub fn metric_series(truth: &[Rotation], estimates: &[Rotation]) -> Vec<f64> {
    truth.iter().zip(estimates).map(|(r, rh)| metric_principal_angle(r, rh)).collect()
}

//! Runs the variational estimator over a recorded accelerometer, magnetometer
//! and gyro log.
//!
//! The accelerometer gives the local up direction and the magnetometer the
//! geomagnetic field; their normalized cross product is the third direction.
//! Inertial directions are in east-north-up coordinates.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::attitude::scheme;
use super::config::SchemeName;
use super::export::TrajectoryRow;
use super::result::{metric_principal_angle, Flag, FilterSeries, RunResult, Sample};
use crate::error::{GeoError, Result};
use crate::liegroup::{exp_so3, Mat3, Vec3};
use crate::measurement::{parse_imu_csv, ButterworthFilter, ImuSample, MeasurementFrame};
use crate::varest::{Geometry, NewtonConfig, VarEst, VarEstGains, VarEstState, WeightPolicy};
use crate::wahba::{BodyMeasurementSet, Mat3xK, PhiFunction, WeightMatrix};

fn up() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

fn magnetic() -> [f64; 3] {
    [0.0772, 0.6117, -0.7873]
}

fn printed_w() -> [[f64; 3]; 3] {
    [[3.19, 1.51, 0.0], [1.51, 3.19, 0.0], [0.0, 0.0, 2.0]]
}

fn default_m() -> f64 {
    0.5
}

fn default_d() -> [f64; 3] {
    [12.0, 13.0, 14.0]
}

fn yes() -> bool {
    true
}

fn default_scheme() -> SchemeName {
    SchemeName::Symmetric
}

/// Replay settings; every field has a default, so an override file lists only changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplaySettings {
    #[serde(default = "default_scheme")]
    pub scheme: SchemeName,
    #[serde(default = "default_m")]
    pub m_kg: f64,
    #[serde(default = "default_d")]
    pub d_diag_nms: [f64; 3],
    #[serde(default = "yes")]
    pub butterworth: bool,
    #[serde(default)]
    pub rhat0_rotvec_rad: [f64; 3],
    /// Inertial direction sensed by the accelerometer.
    #[serde(default = "up")]
    pub accel_direction: [f64; 3],
    /// Inertial direction sensed by the magnetometer.
    #[serde(default = "magnetic")]
    pub mag_direction: [f64; 3],
    #[serde(default = "printed_w")]
    pub w_matrix: [[f64; 3]; 3],
}

impl Default for ReplaySettings {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

impl ReplaySettings {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| GeoError::Config(e.to_string()))
    }
}

fn unit(v: Vec3, what: &str) -> Result<Vec3> {
    let n = v.norm();
    if !(n > 0.0 && n.is_finite()) {
        return Err(GeoError::Config(format!("{what} has zero length")));
    }
    Ok(v / n)
}

/// Accelerometer, magnetometer and their cross product, normalized.
fn triad(a: &Vec3, m: &Vec3) -> Result<[Vec3; 3]> {
    let a = unit(*a, "accelerometer reading")?;
    let m = unit(*m, "magnetometer reading")?;
    Ok([a, m, unit(a.cross(&m), "accelerometer x magnetometer")?])
}

/// Estimated trajectory of a replay.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutput {
    pub trajectory: Vec<TrajectoryRow>,
    pub wall_clock_s: f64,
}

/// Replays parsed samples.
pub fn replay_samples(samples: &[ImuSample], settings: &ReplaySettings) -> Result<ReplayOutput> {
    if samples.len() < 2 {
        return Err(GeoError::Config("a replay needs at least two samples".into()));
    }
    let v3 = |a: [f64; 3]| Vec3::new(a[0], a[1], a[2]);
    let e = triad(&v3(settings.accel_direction), &v3(settings.mag_direction))?;
    let w = WeightMatrix::new(DMatrix::from_fn(3, 3, |i, j| settings.w_matrix[i][j]))?;
    let geometry = Geometry::new(Mat3xK::from_columns(&e), WeightPolicy::Fixed(w))?;
    let gains = VarEstGains::new(settings.m_kg, Mat3::from_diagonal(&v3(settings.d_diag_nms)), PhiFunction::identity())?;
    let mut est = VarEst { scheme: scheme(settings.scheme), gains, newton: NewtonConfig::default(), geometry };

    let h0 = samples[1].t - samples[0].t;
    let mut filt = if settings.butterworth {
        Some([ButterworthFilter::new(h0)?, ButterworthFilter::new(h0)?, ButterworthFilter::new(h0)?])
    } else {
        None
    };
    let mut frames = Vec::with_capacity(samples.len());
    for s in samples {
        let (a, m, g) = match &mut filt {
            Some([fa, fm, fg]) => (fa.filter(&s.accel), fm.filter(&s.mag), fg.filter(&s.gyro)),
            None => (s.accel, s.mag, s.gyro),
        };
        frames.push(MeasurementFrame {
            t: s.t,
            um: BodyMeasurementSet::from_columns(&triad(&a, &m)?),
            omega_m: g,
            active_sensor_ids: vec![0, 1, 2],
        });
    }
    let rhat0 = exp_so3(&v3(settings.rhat0_rotvec_rad));
    let mut state = VarEstState::new(rhat0, Vec3::zeros(), frames[0].t);
    let mut trajectory = Vec::with_capacity(frames.len());
    let row = |s: &VarEstState, f: &MeasurementFrame| TrajectoryRow {
        t: f.t,
        r: s.rhat,
        b: Vec3::zeros(),
        omega: s.omega_hat(&f.omega_m),
        v: Vec3::zeros(),
    };
    trajectory.push(row(&state, &frames[0]));
    let elapsed = super::stopwatch();
    for k in 0..frames.len() - 1 {
        state = est.step(&state, &frames[k], &frames[k + 1])?;
        trajectory.push(row(&state, &frames[k + 1]));
    }
    Ok(ReplayOutput { trajectory, wall_clock_s: elapsed() })
}

/// Reads an IMU CSV and replays it.
pub fn replay_imu(path: &Path, settings: &ReplaySettings) -> Result<ReplayOutput> {
    let text = std::fs::read_to_string(path)?;
    replay_samples(&parse_imu_csv(&text)?, settings)
}

/// Scores a replay against a truth trajectory sampled at the same instants.
pub fn score_replay(out: &ReplayOutput, truth: &[TrajectoryRow]) -> Result<RunResult> {
    let mut samples = Vec::with_capacity(out.trajectory.len());
    let mut j = 0;
    for est in &out.trajectory {
        while j < truth.len() && truth[j].t < est.t - 1e-9 {
            j += 1;
        }
        let Some(tr) = truth.get(j).filter(|tr| (tr.t - est.t).abs() <= 1e-9) else {
            continue;
        };
        samples.push(Sample {
            t: est.t,
            phi: metric_principal_angle(&tr.r, &est.r),
            omega_err: (tr.omega - est.omega).norm(),
            beta_err: Vec3::zeros(),
            mu_err: 0.0,
            pose: None,
            lyapunov: f64::NAN,
            flag: Flag::Ok,
        });
    }
    if samples.is_empty() {
        return Err(GeoError::Config("truth and estimate share no timestamps".into()));
    }
    Ok(RunResult {
        scenario: "replay".into(),
        series: vec![FilterSeries {
            filter: "varest".into(),
            samples,
            singular_at: None,
            error: None,
            wall_clock_s: out.wall_clock_s,
        }],
    })
}


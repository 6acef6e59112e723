//! Comparison filters: GAME, MEKF and a constant-gain observer.
//!
//! Attitude is propagated with a Lie-Euler exponential update and the gain
//! matrix `P` with explicit Euler followed by symmetrization, both at the
//! measurement step.

use crate::error::{GeoError, Result};
use crate::liegroup::{exp_so3, hat, Mat3, Rotation, Vec3};
use crate::measurement::MeasurementFrame;
use crate::wahba::Mat3xK;

/// `P_s(X) = (X + X^T) / 2`.
pub fn sym(x: &Mat3) -> Mat3 {
    (x + x.transpose()) * 0.5
}

/// Largest admissible entry of `P` before a run is declared singular.
pub const P_BLOWUP: f64 = 1e6;

/// Per-sensor weights `(D_j D_j^T)^{-1}` from the direction noise coefficients.
pub fn sensor_weights(dj: &[Mat3]) -> Result<Vec<Mat3>> {
    dj.iter()
        .map(|d| {
            (d * d.transpose())
                .try_inverse()
                .ok_or_else(|| GeoError::Config("direction noise coefficient must be invertible".into()))
        })
        .collect()
}

/// `l = sum_j (W_j (u_hat_j - u_j)) x u_hat_j` over the measured directions,
/// with `u_hat_j = R_hat^T e_j`. This is the gradient of
/// `1/2 sum_j (u_hat_j - u_j)^T W_j (u_hat_j - u_j)` along `R_hat exp(s^)`.
pub fn innovation(rhat: &Rotation, frame: &MeasurementFrame, e_all: &Mat3xK, weights: &[Mat3]) -> Vec3 {
    let rt = rhat.matrix().transpose();
    let mut ell = Vec3::zeros();
    for (j, &id) in frame.active_sensor_ids.iter().enumerate() {
        let uh = rt * e_all.column(id);
        let u = frame.direction(j);
        ell += (weights[id] * (uh - u)).cross(&uh);
    }
    ell
}

/// `sum_j u_hat_j^ W_j u_hat_j^`, negative semidefinite.
fn curvature(rhat: &Rotation, frame: &MeasurementFrame, e_all: &Mat3xK, weights: &[Mat3]) -> Mat3 {
    let rt = rhat.matrix().transpose();
    frame.active_sensor_ids.iter().fold(Mat3::zeros(), |acc, &id| {
        let x = hat(&(rt * e_all.column(id)));
        acc + x * weights[id] * x
    })
}

/// `sum_j P_s(W_j (u_hat_j - u_j) u_hat_j^T)`.
fn residual_outer(rhat: &Rotation, frame: &MeasurementFrame, e_all: &Mat3xK, weights: &[Mat3]) -> Mat3 {
    let rt = rhat.matrix().transpose();
    let mut acc = Mat3::zeros();
    for (j, &id) in frame.active_sensor_ids.iter().enumerate() {
        let uh = rt * e_all.column(id);
        acc += sym(&(weights[id] * (uh - frame.direction(j)) * uh.transpose()));
    }
    acc
}

/// Attitude estimate with a gain matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovFilterState {
    pub rhat: Rotation,
    pub p: Mat3,
    pub t: f64,
}

impl CovFilterState {
    /// Checks that `P` is finite, bounded and positive definite.
    pub fn check(&self) -> Result<()> {
        if !self.p.iter().all(|v| v.is_finite()) || self.p.amax() > P_BLOWUP {
            return Err(GeoError::CovarianceBlowup(format!("|P| = {:.3e} at t = {}", self.p.amax(), self.t)));
        }
        let min = self.p.symmetric_eigenvalues().min();
        if !(min > 0.0) {
            return Err(GeoError::CovarianceBlowup(format!("P lost definiteness (min eigenvalue {min:.3e}) at t = {}", self.t)));
        }
        Ok(())
    }
}

/// Shared configuration of the covariance-type filters.
#[derive(Debug, Clone, PartialEq)]
pub struct CovFilterConfig {
    /// Inertial directions, one column per sensor.
    pub e_all: Mat3xK,
    /// `(D_j D_j^T)^{-1}` per sensor.
    pub weights: Vec<Mat3>,
    /// `Q = B B^T`.
    pub q_cov: Mat3,
}

pub type GameConfig = CovFilterConfig;
pub type MekfConfig = CovFilterConfig;

fn step_len(t: f64, next_t: f64) -> Result<f64> {
    let h = next_t - t;
    if !(h > 0.0) {
        return Err(GeoError::Config(format!("non-increasing time {t} -> {next_t}")));
    }
    Ok(h)
}

fn propagate(state: &CovFilterState, frame: &MeasurementFrame, ell: &Vec3, p_dot: &Mat3, h: f64) -> Result<CovFilterState> {
    let rhat = state.rhat * exp_so3(&((frame.omega_m - state.p * ell) * h));
    let p = sym(&(state.p + p_dot * h));
    let next = CovFilterState { rhat, p, t: state.t + h };
    next.check()?;
    Ok(next)
}

/// GAME step using the measurements of `frame` (taken at `state.t`) up to `next_t`.
pub fn game_step(state: &CovFilterState, frame: &MeasurementFrame, next_t: f64, cfg: &GameConfig) -> Result<CovFilterState> {
    let h = step_len(state.t, next_t)?;
    let ell = innovation(&state.rhat, frame, &cfg.e_all, &cfg.weights);
    let p = &state.p;
    let c = residual_outer(&state.rhat, frame, &cfg.e_all, &cfg.weights);
    let inner = Mat3::identity() * c.trace() - c + curvature(&state.rhat, frame, &cfg.e_all, &cfg.weights);
    let p_dot = cfg.q_cov + sym(&(p * hat(&(frame.omega_m * 2.0 - p * ell)))) + p * inner * p;
    propagate(state, frame, &ell, &p_dot, h)
}

/// MEKF step. The measurement term reduces `P`: `+ P (sum u_hat^ W u_hat^) P`
/// with the negative semidefinite curvature sum.
pub fn mekf_step(state: &CovFilterState, frame: &MeasurementFrame, next_t: f64, cfg: &MekfConfig) -> Result<CovFilterState> {
    let h = step_len(state.t, next_t)?;
    let ell = innovation(&state.rhat, frame, &cfg.e_all, &cfg.weights);
    let p = &state.p;
    let s = curvature(&state.rhat, frame, &cfg.e_all, &cfg.weights);
    let p_dot = cfg.q_cov + sym(&(p * hat(&(frame.omega_m * 2.0)))) + p * s * p;
    propagate(state, frame, &ell, &p_dot, h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgoConfig {
    pub e_all: Mat3xK,
    pub k_p: Mat3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgoState {
    pub rhat: Rotation,
    pub t: f64,
}

/// `l_bar = sum_j u_j x u_hat_j`.
pub fn cgo_innovation(rhat: &Rotation, frame: &MeasurementFrame, e_all: &Mat3xK) -> Vec3 {
    let rt = rhat.matrix().transpose();
    frame
        .active_sensor_ids
        .iter()
        .enumerate()
        .fold(Vec3::zeros(), |acc, (j, &id)| acc + frame.direction(j).cross(&(rt * e_all.column(id))))
}

/// `R_hat <- R_hat exp(h (Omega_m + K_P l_bar)^)`. The correction points from the
/// estimate toward the measurement, which makes the observer converge.
pub fn cgo_step(state: &CgoState, frame: &MeasurementFrame, next_t: f64, cfg: &CgoConfig) -> Result<CgoState> {
    let h = step_len(state.t, next_t)?;
    let lbar = cgo_innovation(&state.rhat, frame, &cfg.e_all);
    let rhat = state.rhat * exp_so3(&((frame.omega_m + cfg.k_p * lbar) * h));
    Ok(CgoState { rhat, t: next_t })
}

/// Initial states giving every filter the same initial angular-velocity estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedInit {
    pub rhat0: Rotation,
    pub p0: Mat3,
    /// Variational estimator residual `omega_0 = P(0) l(0)`.
    pub varest_omega0: Vec3,
    /// CGO gain `K_P = P(0)`.
    pub k_p: Mat3,
    pub ell0: Vec3,
}

pub fn matched_initialization(rhat0: Rotation, p0: Mat3, frame0: &MeasurementFrame, e_all: &Mat3xK, weights: &[Mat3]) -> MatchedInit {
    let ell0 = innovation(&rhat0, frame0, e_all, weights);
    MatchedInit { rhat0, p0, varest_omega0: p0 * ell0, k_p: p0, ell0 }
}

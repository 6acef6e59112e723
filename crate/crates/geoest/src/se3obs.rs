//! Pose and velocity observers on SE(3) driven by full-state measurements.
//!
//! Three observers share one integration scheme. Between two measurement
//! instants the observer propagates the last measured state with its own
//! force model and, jointly with it, the exponential coordinates `eta` of the
//! pose error `h = g_hat^{-1} g` and the transported velocity
//! `xi_breve = Ad_{h^{-1}} xi_hat`. Everything is advanced by RK4 in
//! `substeps` equal pieces. At the end `g_hat = g exp(-eta)` and
//! `xi_hat = Ad_{exp(eta)} xi_breve`.
//!
//! * gravity observer: estimates the gravitational parameter `mu` of a
//!   spherical central body;
//! * force observer: uses measured forces and torques;
//! * finite-time observer: fractional-power feedback with `p = num/den`.

use nalgebra::SVector;

use crate::dynamics::{psi_g, rk4_step, ForceModel, RigidBodyParams};
use crate::error::{GeoError, Result};
use crate::liegroup::{
    ad_star, exp_se3_raw, g_matrix_raw, log_se3, Mat6, Pose, Twist, Vec6, EPS_LOG,
};

/// Denominators of fractional powers below this are treated as zero error.
pub const EPS_FT: f64 = 1e-9;

/// Full-state measurement at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullStateMeasurement {
    pub t: f64,
    pub g: Pose,
    pub xi: Twist,
    /// Measured resultant wrench `(torque, force)`; used by the force observer.
    pub wrench: Vec6,
}

/// Estimated pose and velocity, plus the gravity parameter estimate where used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverState {
    pub ghat: Pose,
    pub xihat: Twist,
    /// Zero for observers that do not estimate gravity.
    pub muhat: f64,
    pub t: f64,
}

pub type GravityObserverState = ObserverState;
pub type FiniteTimeState = ObserverState;

impl ObserverState {
    pub fn new(ghat: Pose, xihat: Twist, t: f64) -> Self {
        ObserverState { ghat, xihat, muhat: 0.0, t }
    }
}

/// Estimation errors relative to a true or measured state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorCoords {
    /// `log(g_hat^{-1} g)`.
    pub eta: Vec6,
    /// `xi - Ad_{h^{-1}} xi_hat`.
    pub xi_err: Vec6,
}

/// Exponential coordinates of `g_hat^{-1} g` and the velocity error.
pub fn error_coords(state: &ObserverState, g: &Pose, xi: &Twist) -> Result<ErrorCoords> {
    let h = state.ghat.inverse() * *g;
    let eta = log_se3(&h)?;
    if eta.principal_angle() >= std::f64::consts::PI - EPS_LOG {
        return Err(GeoError::NearPiSingularity { angle: eta.principal_angle() });
    }
    let breve = h.inverse().adjoint() * state.xihat.to_vec6();
    Ok(ErrorCoords { eta: eta.to_vec6(), xi_err: xi.to_vec6() - breve })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GravityObserverGains {
    pub k1: Mat6,
    pub k2: f64,
    pub k3: f64,
    pub k4: Mat6,
}

impl GravityObserverGains {
    pub fn validate(&self) -> Result<()> {
        let spd = |m: &Mat6| (m - m.transpose()).amax() < 1e-12 && m.cholesky().is_some();
        if !(self.k2 > 0.0 && self.k3 > 0.0 && spd(&self.k1) && spd(&self.k4)) {
            return Err(GeoError::Config("gravity observer gains must be positive definite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceObserverGains {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

impl ForceObserverGains {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0 && self.k2 > 0.0 && self.k3 > 0.0) {
            return Err(GeoError::Config("force observer gains must be positive".into()));
        }
        Ok(())
    }

    /// `K = blockdiag(I, k2 I)`.
    pub fn k_matrix(&self) -> Mat6 {
        Mat6::from_diagonal(&Vec6::new(1.0, 1.0, 1.0, self.k2, self.k2, self.k2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteTimeGains {
    pub k: f64,
    /// `p = p_num / p_den`, both odd, `1 < p < 2`.
    pub p_num: u32,
    pub p_den: u32,
    pub gamma: f64,
}

impl FiniteTimeGains {
    /// The rate bound `V' <= -2^{1/p} k V^{1/p}` needs `gamma >= 1`; smaller
    /// values are accepted and still give finite-time convergence of `V` once
    /// both terms of the rate are active.
    pub fn validate(&self) -> Result<()> {
        let odd = self.p_num % 2 == 1 && self.p_den % 2 == 1;
        let p = self.p();
        if !(self.k > 0.0 && self.gamma > 0.0 && odd && p > 1.0 && p < 2.0) {
            return Err(GeoError::Config(format!(
                "finite-time gains need k > 0, gamma > 0 and p = {}/{} an odd ratio in (1, 2)",
                self.p_num, self.p_den
            )));
        }
        Ok(())
    }

    pub fn p(&self) -> f64 {
        self.p_num as f64 / self.p_den as f64
    }
}

/// `x^e` for `x > 0`, zero otherwise.
fn frac_pow(x: f64, e: f64) -> f64 {
    if x > 0.0 {
        (e * x.ln()).exp()
    } else {
        0.0
    }
}

/// Observer correction law: `I xi_breve_dot` given measured and estimated quantities.
trait Law {
    fn breve_rate(&self, eta: &Vec6, breve: &Vec6, xi: &Vec6, g: &Pose, wrench: &Vec6, muhat: f64) -> Result<Vec6>;
    fn muhat_rate(&self, _eta: &Vec6, _breve: &Vec6, _xi: &Vec6, _g: &Pose) -> Result<f64> {
        Ok(0.0)
    }
}

struct GravityLaw<'a> {
    params: &'a RigidBodyParams,
    gains: &'a GravityObserverGains,
    length_unit: f64,
}

impl Law for GravityLaw<'_> {
    fn breve_rate(&self, eta: &Vec6, breve: &Vec6, xi: &Vec6, g: &Pose, _w: &Vec6, muhat: f64) -> Result<Vec6> {
        let ixi = self.params.apply(xi);
        let gm = g_matrix_raw(eta);
        let xi_err = xi - breve;
        let k1eta = self.gains.k1 * eta;
        let ell = xi_err + k1eta;
        let s = -ad_star(&k1eta, &ixi)
            + gm.transpose() * eta * self.gains.k2
            + self.params.apply(&(self.gains.k1 * gm * xi_err))
            + self.gains.k4 * ell;
        Ok(ad_star(breve, &ixi) + psi_g(g, self.params, self.length_unit)? * muhat + s)
    }

    fn muhat_rate(&self, eta: &Vec6, breve: &Vec6, xi: &Vec6, g: &Pose) -> Result<f64> {
        let ell = xi - breve + self.gains.k1 * eta;
        Ok(ell.dot(&psi_g(g, self.params, self.length_unit)?) / self.gains.k3)
    }
}

struct ForceLaw<'a> {
    params: &'a RigidBodyParams,
    gains: &'a ForceObserverGains,
}

impl Law for ForceLaw<'_> {
    fn breve_rate(&self, eta: &Vec6, breve: &Vec6, xi: &Vec6, _g: &Pose, wrench: &Vec6, _m: f64) -> Result<Vec6> {
        let k = self.gains.k_matrix();
        let ixi = self.params.apply(xi);
        let xi_err = xi - breve;
        let u = eta * self.gains.k1 + xi_err;
        let x = k * (breve - eta * self.gains.k1);
        Ok(ad_star(&x, &ixi)
            + wrench
            + self.params.apply(&(g_matrix_raw(eta) * xi_err)) * self.gains.k1
            + g_matrix_raw(&(k * eta)).transpose() * eta
            + u * self.gains.k3)
    }
}

struct FiniteTimeLaw<'a> {
    params: &'a RigidBodyParams,
    gains: &'a FiniteTimeGains,
}

impl FiniteTimeLaw<'_> {
    /// `k (eta^T eta)^{1/p - 1} eta`, zero inside the guard.
    fn eta_term(&self, eta: &Vec6) -> Vec6 {
        let n2 = eta.norm_squared();
        if n2.sqrt() < EPS_FT {
            return Vec6::zeros();
        }
        eta * (self.gains.k * frac_pow(n2, 1.0 / self.gains.p() - 1.0))
    }
}

impl Law for FiniteTimeLaw<'_> {
    fn breve_rate(&self, eta: &Vec6, breve: &Vec6, xi: &Vec6, _g: &Pose, wrench: &Vec6, _m: f64) -> Result<Vec6> {
        let inv_p = 1.0 / self.gains.p();
        let ixi = self.params.apply(xi);
        let xi_err = xi - breve;
        let et = self.eta_term(eta);
        let u = xi_err + et;
        let gm = g_matrix_raw(eta);
        let n2 = eta.norm_squared();
        let h_term = if n2.sqrt() < EPS_FT {
            Vec6::zeros()
        } else {
            let w = gm * xi_err;
            // H w = (eta^T eta)^{1/p-1} [w - 2 (1 - 1/p) eta (eta^T w) / eta^T eta]
            (w - eta * (2.0 * (1.0 - inv_p) * eta.dot(&w) / n2)) * frac_pow(n2, inv_p - 1.0)
        };
        let iu = self.params.apply(&u);
        let uiu = u.dot(&iu);
        let u_term = if u.norm() < EPS_FT { Vec6::zeros() } else { iu * frac_pow(uiu, inv_p - 1.0) };
        Ok(ad_star(&(breve - et), &ixi)
            + wrench
            + self.params.apply(&h_term) * self.gains.k
            + gm.transpose() * eta * self.gains.gamma
            + u_term * self.gains.k)
    }
}

type Y = SVector<f64, 25>;

fn seg6(y: &Y, i: usize) -> Vec6 {
    y.fixed_rows::<6>(i).into_owned()
}

/// Joint RK4 over `(zeta, xi_m, eta, xi_breve, mu_hat)` from one measurement to the next.
#[allow(clippy::too_many_arguments)]
fn advance<L: Law, F: Fn(&Pose, f64, f64) -> Result<Vec6>>(
    state: &ObserverState,
    meas: &FullStateMeasurement,
    params: &RigidBodyParams,
    law: &L,
    model_wrench: F,
    h: f64,
    substeps: usize,
) -> Result<ObserverState> {
    if !(h > 0.0) || substeps == 0 {
        return Err(GeoError::Config(format!("observer step {h} with {substeps} substeps")));
    }
    let err = error_coords(state, &meas.g, &meas.xi)?;
    let mut g = meas.g;
    let mut y = Y::zeros();
    y.fixed_rows_mut::<6>(6).copy_from(&meas.xi.to_vec6());
    y.fixed_rows_mut::<6>(12).copy_from(&err.eta);
    y.fixed_rows_mut::<6>(18).copy_from(&(meas.xi.to_vec6() - err.xi_err));
    y[24] = state.muhat;
    let dt = h / substeps as f64;
    for s in 0..substeps {
        let g0 = g;
        let t0 = meas.t + s as f64 * dt;
        let f = |t: f64, y: &Y| -> Result<Y> {
            let zeta = seg6(y, 0);
            let xi = seg6(y, 6);
            let eta = seg6(y, 12);
            let breve = seg6(y, 18);
            let muhat = y[24];
            let gm = g0 * exp_se3_raw(&zeta);
            let wrench = model_wrench(&gm, t, muhat)?;
            let mut d = Y::zeros();
            d.fixed_rows_mut::<6>(0).copy_from(&(g_matrix_raw(&zeta) * xi));
            d.fixed_rows_mut::<6>(6)
                .copy_from(&params.apply_inv(&(ad_star(&xi, &params.apply(&xi)) + wrench)));
            d.fixed_rows_mut::<6>(12).copy_from(&(g_matrix_raw(&eta) * (xi - breve)));
            d.fixed_rows_mut::<6>(18)
                .copy_from(&params.apply_inv(&law.breve_rate(&eta, &breve, &xi, &gm, &wrench, muhat)?));
            d[24] = law.muhat_rate(&eta, &breve, &xi, &gm)?;
            Ok(d)
        };
        let mut y1 = rk4_step(f, t0, &y, dt)?;
        if !y1.iter().all(|v| v.is_finite()) {
            return Err(GeoError::Config(format!("observer state became non-finite at t = {t0}")));
        }
        g = g0 * exp_se3_raw(&seg6(&y1, 0));
        y1.fixed_rows_mut::<6>(0).fill(0.0);
        y = y1;
    }
    let eta = seg6(&y, 12);
    let hmat = exp_se3_raw(&eta);
    let ghat = (g * hmat.inverse()).renormalized();
    let xihat = Twist::from_vec6(&(hmat.adjoint() * seg6(&y, 18)));
    Ok(ObserverState { ghat, xihat, muhat: y[24], t: meas.t + h })
}

/// Gravity observer step. Between samples the measured state is propagated
/// with constant body velocity: during transients `mu_hat` can be orders of
/// magnitude off, and using it to predict the measurement destabilizes the step.
pub fn gravity_observer_step(
    state: &GravityObserverState,
    meas: &FullStateMeasurement,
    params: &RigidBodyParams,
    gains: &GravityObserverGains,
    length_unit: f64,
    h: f64,
    substeps: usize,
) -> Result<GravityObserverState> {
    let law = GravityLaw { params, gains, length_unit };
    advance(state, meas, params, &law, |_g, _t, _mu| Ok(Vec6::zeros()), h, substeps)
}

/// Force observer step. The measured wrench is held over the step.
pub fn force_observer_step(
    state: &ObserverState,
    meas: &FullStateMeasurement,
    params: &RigidBodyParams,
    gains: &ForceObserverGains,
    h: f64,
    substeps: usize,
) -> Result<ObserverState> {
    let law = ForceLaw { params, gains };
    advance(state, meas, params, &law, |_g, _t, _mu| Ok(meas.wrench), h, substeps)
}

/// Finite-time observer step with known forces `force`.
#[allow(clippy::too_many_arguments)]
pub fn finite_time_observer_step(
    state: &FiniteTimeState,
    meas: &FullStateMeasurement,
    params: &RigidBodyParams,
    force: &ForceModel,
    gains: &FiniteTimeGains,
    h: f64,
    substeps: usize,
) -> Result<FiniteTimeState> {
    let law = FiniteTimeLaw { params, gains };
    advance(state, meas, params, &law, |g, t, _mu| force.wrench(g, t, params), h, substeps)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObserverKind {
    Gravity(GravityObserverGains),
    Force(ForceObserverGains),
    FiniteTime(FiniteTimeGains),
}

/// Lyapunov function of each observer.
///
/// * gravity: `1/2 k2 eta^T eta + 1/2 l^T I l + 1/2 k3 mu_err^2`, `l = xi_err + k1 eta`;
/// * force: `1/2 eta^T K eta + 1/2 u^T K I u`, `u = k1 eta + xi_err`;
/// * finite-time: `1/2 gamma eta^T eta + 1/2 u^T I u`, `u = xi_err + k (eta^T eta)^{1/p-1} eta`.
pub fn lyapunov_value(
    kind: &ObserverKind,
    state: &ObserverState,
    g: &Pose,
    xi: &Twist,
    mu: f64,
    params: &RigidBodyParams,
) -> Result<f64> {
    let e = error_coords(state, g, xi)?;
    let eta = e.eta;
    Ok(match kind {
        ObserverKind::Gravity(k) => {
            let ell = e.xi_err + k.k1 * eta;
            let mu_err = mu - state.muhat;
            0.5 * k.k2 * eta.norm_squared() + 0.5 * ell.dot(&params.apply(&ell)) + 0.5 * k.k3 * mu_err * mu_err
        }
        ObserverKind::Force(k) => {
            let km = k.k_matrix();
            let u = eta * k.k1 + e.xi_err;
            0.5 * eta.dot(&(km * eta)) + 0.5 * u.dot(&(km * params.apply(&u)))
        }
        ObserverKind::FiniteTime(k) => {
            let law = FiniteTimeLaw { params, gains: k };
            let u = e.xi_err + law.eta_term(&eta);
            0.5 * k.gamma * eta.norm_squared() + 0.5 * u.dot(&params.apply(&u))
        }
    })
}

/// Closed-form `dV/dt` along exact solutions, for comparison with finite differences.
pub fn lyapunov_rate(
    kind: &ObserverKind,
    state: &ObserverState,
    g: &Pose,
    xi: &Twist,
    params: &RigidBodyParams,
) -> Result<f64> {
    let e = error_coords(state, g, xi)?;
    let eta = e.eta;
    Ok(match kind {
        ObserverKind::Gravity(k) => {
            let ell = e.xi_err + k.k1 * eta;
            -k.k2 * eta.dot(&(g_matrix_raw(&eta) * k.k1 * eta)) - ell.dot(&(k.k4 * ell))
        }
        ObserverKind::Force(k) => {
            let km = k.k_matrix();
            let u = eta * k.k1 + e.xi_err;
            -k.k1 * eta.dot(&(km * eta)) - k.k3 * u.dot(&(km * u))
        }
        ObserverKind::FiniteTime(k) => {
            let law = FiniteTimeLaw { params, gains: k };
            let u = e.xi_err + law.eta_term(&eta);
            let inv_p = 1.0 / k.p();
            -k.k * (k.gamma * frac_pow(eta.norm_squared(), inv_p) + frac_pow(u.dot(&params.apply(&u)), inv_p))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate_truth, Integrator, TruthState};
    use crate::liegroup::{exp_so3, Mat3, Rotation, Vec3};

    fn body() -> RigidBodyParams {
        RigidBodyParams::new(21.0, Mat3::from_diagonal(&Vec3::new(2.56, 3.01, 2.98))).unwrap()
    }

    fn ft_gains() -> FiniteTimeGains {
        FiniteTimeGains { k: 50.0, p_num: 23, p_den: 21, gamma: 0.03 }
    }

    #[test]
    fn zero_error_stays_zero() {
        let params = body();
        let g = Pose::new(exp_so3(&Vec3::new(0.4, 0.2, 0.1)), Vec3::new(1.0, 2.0, 3.0));
        let xi = Twist::new(Vec3::new(0.5, -0.5, 0.1), Vec3::new(-0.005, 0.025, 0.03));
        let truth = TruthState { g, xi, t: 0.0 };
        let traj = integrate_truth(&truth, &params, &ForceModel::Zero, 0.01, 1, Integrator::Rk4).unwrap();
        let meas = FullStateMeasurement { t: 0.0, g, xi, wrench: Vec6::zeros() };
        let s = ObserverState::new(g, xi, 0.0);
        let s1 = finite_time_observer_step(&s, &meas, &params, &ForceModel::Zero, &ft_gains(), 0.01, 4).unwrap();
        let e = error_coords(&s1, &traj[1].g, &traj[1].xi).unwrap();
        assert!(e.eta.amax() < 1e-12 && e.xi_err.amax() < 1e-12);
        let fg = ForceObserverGains { k1: 1.0, k2: 2.0, k3: 1.0 };
        let s2 = force_observer_step(&s, &meas, &params, &fg, 0.01, 1).unwrap();
        let e = error_coords(&s2, &traj[1].g, &traj[1].xi).unwrap();
        assert!(e.eta.amax() < 1e-10 && e.xi_err.amax() < 1e-10);
    }

    #[test]
    fn lyapunov_zero_at_zero_error() {
        let params = body();
        let g = Pose::new(Rotation::identity(), Vec3::new(1.0, 0.0, 0.0));
        let xi = Twist::new(Vec3::new(0.1, 0.0, 0.0), Vec3::zeros());
        let s = ObserverState::new(g, xi, 0.0);
        for kind in [
            ObserverKind::FiniteTime(ft_gains()),
            ObserverKind::Force(ForceObserverGains { k1: 1.0, k2: 2.0, k3: 1.0 }),
        ] {
            assert_eq!(lyapunov_value(&kind, &s, &g, &xi, 0.0, &params).unwrap(), 0.0);
        }
    }

    #[test]
    fn gains_are_validated() {
        assert!(FiniteTimeGains { k: 1.0, p_num: 22, p_den: 21, gamma: 1.0 }.validate().is_err());
        assert!(FiniteTimeGains { k: 1.0, p_num: 5, p_den: 1, gamma: 1.0 }.validate().is_err());
        assert!(ft_gains().validate().is_ok());
        assert!(ForceObserverGains { k1: 0.0, k2: 1.0, k3: 1.0 }.validate().is_err());
    }
}

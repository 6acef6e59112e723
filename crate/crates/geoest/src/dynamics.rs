//! Truth generation: rigid-body motion on SE(3) under central gravity and
//! prescribed body-frame wrenches, attitude-only motion for the SO(3)
//! scenarios, and the orbit setup around a spherical asteroid.
//!
//! Integrators work on the Lie algebra (Runge-Kutta-Munthe-Kaas): each step
//! integrates `d zeta/dt = G(zeta) xi` from `zeta = 0` and applies
//! `g_{k+1} = g_k exp(zeta)`, so poses never leave the group.

use std::f64::consts::PI;

use nalgebra::SVector;

use crate::error::{GeoError, Result};
use crate::liegroup::{
    a_matrix, ad_star, exp_se3_raw, exp_so3, g_matrix_raw, split, stack, Mat3, Mat6, Pose, Rotation, Twist, Vec3, Vec6,
};

/// Renormalize rotations after this many composed steps.
pub const RENORMALIZE_EVERY: usize = 1000;

/// Classic fourth-order Runge-Kutta step for a fixed-size state.
pub fn rk4_step<const N: usize, F>(mut f: F, t: f64, y: &SVector<f64, N>, h: f64) -> Result<SVector<f64, N>>
where
    F: FnMut(f64, &SVector<f64, N>) -> Result<SVector<f64, N>>,
{
    let k1 = f(t, y)?;
    let k2 = f(t + 0.5 * h, &(y + k1 * (0.5 * h)))?;
    let k3 = f(t + 0.5 * h, &(y + k2 * (0.5 * h)))?;
    let k4 = f(t + h, &(y + k3 * h))?;
    Ok(y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

/// Mass and inertia of a rigid body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidBodyParams {
    mass: f64,
    j: Mat3,
    j_inv: Mat3,
}

impl RigidBodyParams {
    pub fn new(mass: f64, j: Mat3) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(GeoError::Config(format!("mass {mass} must be positive")));
        }
        let sym = (j - j.transpose()).amax();
        let chol = j.cholesky();
        if sym > 1e-12 * j.amax() || chol.is_none() {
            return Err(GeoError::Config("inertia matrix must be symmetric positive definite".into()));
        }
        let j_inv = chol.map(|c| c.inverse()).unwrap_or_else(Mat3::identity);
        Ok(RigidBodyParams { mass, j, j_inv })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn inertia(&self) -> &Mat3 {
        &self.j
    }

    /// `blockdiag(J, m I)`.
    pub fn inertia6(&self) -> Mat6 {
        let mut m = Mat6::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.j);
        m.fixed_view_mut::<3, 3>(3, 3).copy_from(&(Mat3::identity() * self.mass));
        m
    }

    /// `I x` without forming the 6x6 matrix.
    pub fn apply(&self, x: &Vec6) -> Vec6 {
        let (w, v) = split(x);
        stack(&(self.j * w), &(v * self.mass))
    }

    /// `I^{-1} x`.
    pub fn apply_inv(&self, x: &Vec6) -> Vec6 {
        let (w, v) = split(x);
        stack(&(self.j_inv * w), &(v / self.mass))
    }

    /// `1/2 tr(J) I + J`.
    pub fn script_j(&self) -> Mat3 {
        Mat3::identity() * (0.5 * self.j.trace()) + self.j
    }
}

/// Pose, body velocity and time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthState {
    pub g: Pose,
    pub xi: Twist,
    pub t: f64,
}

/// Body-frame wrench `offset + amp .* sin(freq t + phase)`, ordered (torque, force).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinusoidWrench {
    pub offset: Vec6,
    pub amp: Vec6,
    pub freq_rad_s: Vec6,
    pub phase_rad: Vec6,
}

impl SinusoidWrench {
    pub fn constant(offset: Vec6) -> Self {
        SinusoidWrench { offset, amp: Vec6::zeros(), freq_rad_s: Vec6::zeros(), phase_rad: Vec6::zeros() }
    }

    pub fn eval(&self, t: f64) -> Vec6 {
        Vec6::from_fn(|i, _| self.offset[i] + self.amp[i] * (self.freq_rad_s[i] * t + self.phase_rad[i]).sin())
    }
}

/// External wrench acting on the body, in body coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum ForceModel {
    Zero,
    /// Point-mass gravity of a sphere with gravity-gradient terms. Positions are
    /// measured in units of `length_unit` meters and `mu` in those units cubed per s^2.
    SphericalGravity { mu: f64, length_unit: f64 },
    /// Uniform field of magnitude `accel` along inertial `-z`.
    UniformGravity { accel: f64 },
    Prescribed(SinusoidWrench),
    Sum(Vec<ForceModel>),
}

impl ForceModel {
    pub fn wrench(&self, g: &Pose, t: f64, params: &RigidBodyParams) -> Result<Vec6> {
        match self {
            ForceModel::Zero => Ok(Vec6::zeros()),
            ForceModel::SphericalGravity { mu, length_unit } => Ok(psi_g(g, params, *length_unit)? * *mu),
            ForceModel::UniformGravity { accel } => {
                let f = g.r.transpose() * Vec3::new(0.0, 0.0, -accel * params.mass());
                Ok(stack(&Vec3::zeros(), &f))
            }
            ForceModel::Prescribed(w) => Ok(w.eval(t)),
            ForceModel::Sum(parts) => {
                let mut acc = Vec6::zeros();
                for p in parts {
                    acc += p.wrench(g, t, params)?;
                }
                Ok(acc)
            }
        }
    }
}

/// Gravity per unit gravitational parameter: `phi_G = mu psi_G`.
///
/// With `length_unit = L`, positions are in units of `L` meters, forces are
/// returned in `kg L / s^2`, and the inertia-dependent force terms pick up `1/L^2`.
pub fn psi_g(g: &Pose, params: &RigidBodyParams, length_unit: f64) -> Result<Vec6> {
    let b = &g.b;
    let r = b.norm();
    if !(r * length_unit >= 1.0) {
        return Err(GeoError::OriginSingularity { distance: r * length_unit });
    }
    let p = g.r.transpose() * b;
    let j = params.inertia();
    let jp = j * p;
    let r2 = r * r;
    let r3 = r2 * r;
    let r5 = r3 * r2;
    let r7 = r5 * r2;
    let torque = p.cross(&jp) * (3.0 / r5);
    let l2 = length_unit * length_unit;
    let force = -p * (params.mass() / r3)
        + (-(params.script_j() * p) * (3.0 / r5) + p * (7.5 * p.dot(&jp) / r7)) / l2;
    Ok(stack(&torque, &force))
}

/// `(M_G, F_G)` for gravitational parameter `mu`.
pub fn gravity_wrench(g: &Pose, params: &RigidBodyParams, mu: f64, length_unit: f64) -> Result<(Vec3, Vec3)> {
    let w = psi_g(g, params, length_unit)? * mu;
    Ok(split(&w))
}

/// Body velocity as the pose rate, and `I xi_dot = ad*_xi I xi + phi`.
pub fn dynamics_rhs(state: &TruthState, params: &RigidBodyParams, force: &ForceModel) -> Result<(Twist, Vec6)> {
    let xi = state.xi.to_vec6();
    let phi = force.wrench(&state.g, state.t, params)?;
    Ok((state.xi, ad_star(&xi, &params.apply(&xi)) + phi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    #[default]
    Rk4,
    LieEuler,
}

/// One truth step of size `h`.
pub fn step_truth(
    state: &TruthState,
    params: &RigidBodyParams,
    force: &ForceModel,
    h: f64,
    method: Integrator,
) -> Result<TruthState> {
    let xi0 = state.xi.to_vec6();
    match method {
        Integrator::LieEuler => {
            let (_, ixi_dot) = dynamics_rhs(state, params, force)?;
            let g = state.g * exp_se3_raw(&(xi0 * h));
            let xi = xi0 + params.apply_inv(&ixi_dot) * h;
            Ok(TruthState { g, xi: Twist::from_vec6(&xi), t: state.t + h })
        }
        Integrator::Rk4 => {
            let g0 = state.g;
            let mut y = SVector::<f64, 12>::zeros();
            y.fixed_rows_mut::<6>(6).copy_from(&xi0);
            let f = |tau: f64, y: &SVector<f64, 12>| -> Result<SVector<f64, 12>> {
                let zeta: Vec6 = y.fixed_rows::<6>(0).into_owned();
                let xi: Vec6 = y.fixed_rows::<6>(6).into_owned();
                let g = g0 * exp_se3_raw(&zeta);
                let phi = force.wrench(&g, tau, params)?;
                let mut dy = SVector::<f64, 12>::zeros();
                dy.fixed_rows_mut::<6>(0).copy_from(&(g_matrix_raw(&zeta) * xi));
                dy.fixed_rows_mut::<6>(6).copy_from(&params.apply_inv(&(ad_star(&xi, &params.apply(&xi)) + phi)));
                Ok(dy)
            };
            let y1 = rk4_step(f, state.t, &y, h)?;
            let zeta: Vec6 = y1.fixed_rows::<6>(0).into_owned();
            let xi: Vec6 = y1.fixed_rows::<6>(6).into_owned();
            Ok(TruthState { g: g0 * exp_se3_raw(&zeta), xi: Twist::from_vec6(&xi), t: state.t + h })
        }
    }
}

/// `steps + 1` states starting with `state`.
pub fn integrate_truth(
    state: &TruthState,
    params: &RigidBodyParams,
    force: &ForceModel,
    h: f64,
    steps: usize,
    method: Integrator,
) -> Result<Vec<TruthState>> {
    if !(h > 0.0) {
        return Err(GeoError::Config(format!("step size {h} must be positive")));
    }
    let mut out = Vec::with_capacity(steps + 1);
    out.push(*state);
    let mut s = *state;
    for k in 1..=steps {
        s = step_truth(&s, params, force, h, method)?;
        s.t = state.t + k as f64 * h;
        if k % RENORMALIZE_EVERY == 0 {
            s.g = s.g.renormalized();
        }
        out.push(s);
    }
    Ok(out)
}

/// Angular-velocity profile used for the filter comparison, rad/s.
pub fn prescribed_omega(t: f64) -> Vec3 {
    Vec3::new(
        (2.0 * PI * t / 15.0).sin(),
        -(2.0 * PI * t / 18.0 + PI / 20.0).sin(),
        (2.0 * PI * t / 17.0).cos(),
    )
}

/// How the attitude truth evolves.
#[derive(Debug, Clone, PartialEq)]
pub enum AttitudeMotion {
    /// Kinematics only, driven by [`prescribed_omega`].
    PrescribedProfile,
    /// Euler's equations with a body torque `offset + amp .* sin(freq t + phase)`.
    Dynamics { j: Mat3, torque: SinusoidWrench },
}

/// Attitude-only truth state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttitudeState {
    pub r: Rotation,
    pub omega: Vec3,
    pub t: f64,
}

impl AttitudeMotion {
    pub fn initial_omega(&self, omega0: Vec3, t0: f64) -> Vec3 {
        match self {
            AttitudeMotion::PrescribedProfile => prescribed_omega(t0),
            AttitudeMotion::Dynamics { .. } => omega0,
        }
    }

    /// One RKMK4 step on `SO(3) x R^3`.
    pub fn step(&self, s: &AttitudeState, h: f64) -> AttitudeState {
        let mut y = SVector::<f64, 6>::zeros();
        y.fixed_rows_mut::<3>(3).copy_from(&s.omega);
        let y1 = match self {
            AttitudeMotion::PrescribedProfile => {
                let f = |tau: f64, y: &SVector<f64, 6>| -> Result<SVector<f64, 6>> {
                    let z: Vec3 = y.fixed_rows::<3>(0).into_owned();
                    let w = prescribed_omega(tau);
                    let mut d = SVector::<f64, 6>::zeros();
                    d.fixed_rows_mut::<3>(0).copy_from(&(a_matrix(&z) * w));
                    Ok(d)
                };
                rk4_step(f, s.t, &y, h).expect("infallible")
            }
            AttitudeMotion::Dynamics { j, torque } => {
                let j_inv = j.try_inverse().unwrap_or_else(Mat3::identity);
                let f = |tau: f64, y: &SVector<f64, 6>| -> Result<SVector<f64, 6>> {
                    let z: Vec3 = y.fixed_rows::<3>(0).into_owned();
                    let w: Vec3 = y.fixed_rows::<3>(3).into_owned();
                    let tq: Vec3 = torque.eval(tau).fixed_rows::<3>(0).into_owned();
                    let mut d = SVector::<f64, 6>::zeros();
                    d.fixed_rows_mut::<3>(0).copy_from(&(a_matrix(&z) * w));
                    d.fixed_rows_mut::<3>(3).copy_from(&(j_inv * ((j * w).cross(&w) + tq)));
                    Ok(d)
                };
                rk4_step(f, s.t, &y, h).expect("infallible")
            }
        };
        let z: Vec3 = y1.fixed_rows::<3>(0).into_owned();
        let omega = match self {
            AttitudeMotion::PrescribedProfile => prescribed_omega(s.t + h),
            AttitudeMotion::Dynamics { .. } => y1.fixed_rows::<3>(3).into_owned(),
        };
        AttitudeState { r: s.r * exp_so3(&z), omega, t: s.t + h }
    }
}

/// Asteroid and orbit constants of the gravity-observer scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitSetup {
    /// Gravitational parameter, m^3/s^2.
    pub mu: f64,
    /// Semi-major axis, m.
    pub a: f64,
    /// Periapsis radius, m.
    pub r_p: f64,
}

impl OrbitSetup {
    pub fn asteroid() -> Self {
        OrbitSetup { mu: 1.729e10, a: 330e3, r_p: 310e3 }
    }

    /// Periapsis speed from the vis-viva equation, m/s.
    pub fn periapsis_speed(&self) -> f64 {
        (-self.mu / self.a + 2.0 * self.mu / self.r_p).sqrt()
    }

    pub fn period(&self) -> f64 {
        2.0 * PI * (self.a.powi(3) / self.mu).sqrt()
    }

    /// `mu / a^3`, the gravitational parameter with lengths measured in semi-major axes.
    pub fn mu_normalized(&self) -> f64 {
        self.mu / self.a.powi(3)
    }

    /// Initial truth at periapsis, in SI units when `normalized` is false and in
    /// semi-major-axis units otherwise.
    pub fn initial_state(&self, normalized: bool) -> TruthState {
        let r0 = exp_so3(&Vec3::new(0.4, 0.2, 0.1));
        let dir = Vec3::new(1.0, -2.0, 2.0) / 3.0;
        let n = Vec3::new(0.0, 1.0, 1.0) / 2f64.sqrt();
        let scale = if normalized { 1.0 / self.a } else { 1.0 };
        let b0 = dir * self.r_p * scale;
        let nu0 = r0.transpose() * n.cross(&dir) * (self.periapsis_speed() * scale);
        TruthState { g: Pose::new(r0, b0), xi: Twist::new(Vec3::new(7e-3, -4e-3, 1e-3), nu0), t: 0.0 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn body() -> RigidBodyParams {
        RigidBodyParams::new(21.0, Mat3::from_diagonal(&Vec3::new(2.56, 3.01, 2.98))).unwrap()
    }

    #[test]
    fn principal_axis_has_no_gradient_torque() {
        let g = Pose::new(Rotation::identity(), Vec3::new(7e6, 0.0, 0.0));
        let (m, _) = gravity_wrench(&g, &body(), 3.986e14, 1.0).unwrap();
        assert_eq!(m, Vec3::zeros());
    }

    #[test]
    fn wrench_is_linear_in_mu() {
        let g = Pose::new(exp_so3(&Vec3::new(0.3, 0.1, -0.2)), Vec3::new(3e5, -1e5, 2e5));
        let (m1, f1) = gravity_wrench(&g, &body(), 1.0e10, 1.0).unwrap();
        let (m2, f2) = gravity_wrench(&g, &body(), 2.0e10, 1.0).unwrap();
        assert_relative_eq!(m2, m1 * 2.0, max_relative = 1e-15);
        assert_relative_eq!(f2, f1 * 2.0, max_relative = 1e-15);
    }

    #[test]
    fn origin_is_rejected() {
        let g = Pose::new(Rotation::identity(), Vec3::new(0.5, 0.0, 0.0));
        assert!(matches!(gravity_wrench(&g, &body(), 1.0, 1.0), Err(GeoError::OriginSingularity { .. })));
    }

    #[test]
    fn equilibrium_without_force() {
        let s = TruthState { g: Pose::identity(), xi: Twist::zero(), t: 0.0 };
        let (_, d) = dynamics_rhs(&s, &body(), &ForceModel::Zero).unwrap();
        assert_eq!(d, Vec6::zeros());
        let traj = integrate_truth(&s, &body(), &ForceModel::Zero, 0.1, 10, Integrator::Rk4).unwrap();
        assert!(traj.iter().all(|x| x.g == Pose::identity() && x.xi == Twist::zero()));
    }

    #[test]
    fn prescribed_profile_at_zero() {
        assert_relative_eq!(prescribed_omega(0.0), Vec3::new(0.0, -(PI / 20.0).sin(), 1.0), epsilon = 1e-15);
    }

    #[test]
    fn periapsis_speed_and_period() {
        let o = OrbitSetup::asteroid();
        assert!((o.periapsis_speed() - 243.2).abs() < 0.05);
        assert!((o.period() - 9058.4).abs() < 0.1);
        let s = o.initial_state(false);
        assert_relative_eq!(s.xi.v, Vec3::new(241.4, 16.7, -24.5), epsilon = 0.05);
        assert!(s.xi.v.dot(&(s.g.r.transpose() * s.g.b)).abs() < 1e-6);
    }
}

//! Variational attitude estimator.
//!
//! The state is the estimate `R_hat`, the angular-velocity residual
//! `omega = Omega_m - Omega_hat - beta_hat`, and optionally a gyro bias estimate.
//! Three discretizations are provided: a first-order implicit scheme, its
//! explicit adjoint, and the symmetric composition of the two at half steps.
//! All of them update the attitude multiplicatively, so `R_hat` stays on SO(3).

use std::collections::HashMap;

use crate::error::{GeoError, Result};
use crate::liegroup::{exp_so3, hat, right_jacobian, Mat3, Rotation, Vec3};
use crate::measurement::MeasurementFrame;
use crate::wahba::{
    build_weights, l_matrix, s_l, wahba_cost0, BodyMeasurementSet, DirectionSet, KMatrix, Mat3xK, PhiFunction,
    WeightMatrix,
};

fn check_spd(name: &str, m: &Mat3) -> Result<()> {
    let asym = (m - m.transpose()).amax();
    if asym > 1e-12 * m.amax().max(1.0) || m.cholesky().is_none() {
        return Err(GeoError::Config(format!("{name} must be symmetric positive definite")));
    }
    Ok(())
}

/// Estimator gains: inertia scalar `m`, dissipation `D`, cost reshaping `Phi`,
/// and the bias gain `P` when bias estimation is enabled.
#[derive(Debug, Clone, Copy)]
pub struct VarEstGains {
    m: f64,
    d: Mat3,
    phi: PhiFunction,
    p_bias: Option<Mat3>,
    p_bias_inv: Mat3,
}

impl VarEstGains {
    pub fn new(m: f64, d: Mat3, phi: PhiFunction) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(GeoError::Config(format!("inertia gain {m} must be positive")));
        }
        check_spd("dissipation D", &d)?;
        Ok(VarEstGains { m, d, phi, p_bias: None, p_bias_inv: Mat3::zeros() })
    }

    /// Enables bias estimation with gain `P`.
    pub fn with_bias(mut self, p: Mat3) -> Result<Self> {
        check_spd("bias gain P", &p)?;
        self.p_bias_inv = p.try_inverse().ok_or_else(|| GeoError::Config("bias gain P is singular".into()))?;
        self.p_bias = Some(p);
        Ok(self)
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn d(&self) -> &Mat3 {
        &self.d
    }

    pub fn phi(&self) -> &PhiFunction {
        &self.phi
    }

    pub fn p_bias(&self) -> Option<&Mat3> {
        self.p_bias.as_ref()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarEstState {
    pub rhat: Rotation,
    /// `Omega_m - Omega_hat - beta_hat`, rad/s.
    pub omega: Vec3,
    /// Zero unless bias estimation is enabled.
    pub betahat: Vec3,
    pub t: f64,
}

impl VarEstState {
    pub fn new(rhat: Rotation, omega: Vec3, t: f64) -> Self {
        VarEstState { rhat, omega, betahat: Vec3::zeros(), t }
    }

    /// Angular-velocity estimate given the gyro reading at the same instant.
    pub fn omega_hat(&self, omega_m: &Vec3) -> Vec3 {
        omega_m - self.omega - self.betahat
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    /// Residual infinity-norm tolerance, rad/s.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig { tol: 1e-12, max_iter: 50 }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(GeoError::Config("newton tolerance must be positive and max_iter at least 1".into()));
        }
        Ok(())
    }
}

const FD_STEP: f64 = 1e-7;

fn fd_jacobian<F: Fn(&Vec3) -> Vec3>(f: &F, x: &Vec3) -> Mat3 {
    let mut j = Mat3::zeros();
    for c in 0..3 {
        let mut xp = *x;
        let mut xm = *x;
        xp[c] += FD_STEP;
        xm[c] -= FD_STEP;
        j.set_column(c, &((f(&xp) - f(&xm)) / (2.0 * FD_STEP)));
    }
    j
}

/// Newton iteration for `f(x) = 0` on R^3. `jac` may return `None` to request
/// a central-difference Jacobian. Returns the root and the iteration count.
pub fn newton_solve<F, J>(f: F, jac: J, guess: Vec3, cfg: &NewtonConfig) -> Result<(Vec3, usize)>
where
    F: Fn(&Vec3) -> Vec3,
    J: Fn(&Vec3) -> Option<Mat3>,
{
    let mut x = guess;
    let mut r = f(&x);
    for it in 0..cfg.max_iter {
        if r.amax() < cfg.tol {
            return Ok((x, it));
        }
        let step = jac(&x)
            .and_then(|j| j.lu().solve(&r))
            .or_else(|| fd_jacobian(&f, &x).lu().solve(&r))
            .ok_or(GeoError::NewtonNonConvergence { iterations: it, residual: r.amax() })?;
        x -= step;
        r = f(&x);
        if !r.iter().all(|v| v.is_finite()) {
            return Err(GeoError::NewtonNonConvergence { iterations: it + 1, residual: f64::INFINITY });
        }
    }
    if r.amax() < cfg.tol {
        Ok((x, cfg.max_iter))
    } else {
        Err(GeoError::NewtonNonConvergence { iterations: cfg.max_iter, residual: r.amax() })
    }
}

/// Solves `x = exp(h (x - a)^) c / m`, the implicit angular-velocity equation
/// with `Omega_hat = a - x`. The Jacobian uses the right-trivialized
/// differential of the exponential.
pub fn newton_solve_omega(a: &Vec3, c: &Vec3, m: f64, h: f64, guess: Vec3, cfg: &NewtonConfig) -> Result<(Vec3, usize)> {
    let f = |x: &Vec3| x - exp_so3(&((x - a) * h)) * c / m;
    let jac = |x: &Vec3| {
        let phi = (x - a) * h;
        Some(Mat3::identity() + exp_so3(&phi).matrix() * hat(c) * right_jacobian(&phi) * (h / m))
    };
    newton_solve(f, jac, guess, cfg)
}

/// How weights are chosen for a set of active sensors.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightPolicy {
    /// Weights giving `K = E W E^T` the eigenvalues `d` for whatever sensors are active.
    Eigenvalues([f64; 3]),
    /// Identity weights.
    Unit,
    /// A fixed matrix for the full sensor set. Frames must report every sensor.
    Fixed(WeightMatrix),
}

/// Inertial directions and weights, resolved per active sensor set and cached.
#[derive(Debug, Clone)]
pub struct Geometry {
    e_all: Mat3xK,
    policy: WeightPolicy,
    cache: HashMap<Vec<usize>, (DirectionSet, WeightMatrix)>,
}

impl Geometry {
    /// `e_all` holds one unit column per sensor.
    pub fn new(e_all: Mat3xK, policy: WeightPolicy) -> Result<Self> {
        if let WeightPolicy::Fixed(w) = &policy {
            let expected = if e_all.ncols() == 2 { 3 } else { e_all.ncols() };
            if w.dim() != expected {
                return Err(GeoError::DimensionMismatch(format!(
                    "{}x{} weights for {} directions",
                    w.dim(),
                    w.dim(),
                    expected
                )));
            }
        }
        Ok(Geometry { e_all, policy, cache: HashMap::new() })
    }

    /// Every sensor active with the given weights.
    pub fn fixed(e: &DirectionSet, w: WeightMatrix, sensors: usize) -> Result<Self> {
        let e_all = e.matrix().columns(0, sensors).into_owned();
        Self::new(e_all, WeightPolicy::Fixed(w))
    }

    pub fn directions(&self) -> &Mat3xK {
        &self.e_all
    }

    pub fn policy(&self) -> &WeightPolicy {
        &self.policy
    }

    /// Directions and weights for the sensors in `ids`.
    pub fn resolve(&mut self, ids: &[usize]) -> Result<&(DirectionSet, WeightMatrix)> {
        if !self.cache.contains_key(ids) {
            if let Some(&bad) = ids.iter().find(|&&i| i >= self.e_all.ncols()) {
                return Err(GeoError::DimensionMismatch(format!("unknown sensor {bad}")));
            }
            let cols: Vec<Vec3> = ids.iter().map(|&i| self.e_all.column(i).into_owned()).collect();
            let e = DirectionSet::from_columns(&cols)?;
            let w = match &self.policy {
                WeightPolicy::Eigenvalues(d) => build_weights(&e, *d)?.0,
                WeightPolicy::Unit => WeightMatrix::new_unchecked(nalgebra::DMatrix::identity(e.len(), e.len())),
                WeightPolicy::Fixed(w) => {
                    if ids.len() != self.e_all.ncols() {
                        return Err(GeoError::DimensionMismatch(format!(
                            "fixed weights need all {} sensors, {} active",
                            self.e_all.ncols(),
                            ids.len()
                        )));
                    }
                    w.clone()
                }
            };
            self.cache.insert(ids.to_vec(), (e, w));
        }
        Ok(&self.cache[ids])
    }

    /// `K = E W E^T` for a sensor set.
    pub fn k_matrix(&mut self, ids: &[usize]) -> Result<KMatrix> {
        let (e, w) = self.resolve(ids)?;
        KMatrix::new(e.matrix() * w.matrix() * e.matrix().transpose())
    }

    /// `Phi'(U0) S_L(R_hat)` for one frame. Zero when fewer than two directions are measured.
    pub fn potential_gradient(&mut self, rhat: &Rotation, frame: &MeasurementFrame, phi: &PhiFunction) -> Result<Vec3> {
        if frame.raw_count() < 2 {
            return Ok(Vec3::zeros());
        }
        let (e, w) = self.resolve(&frame.active_sensor_ids)?;
        potential_gradient(rhat, &frame.um, e, w, phi)
    }
}

/// `Phi'(U0(R_hat)) S_L(R_hat)`.
pub fn potential_gradient(
    rhat: &Rotation,
    um: &BodyMeasurementSet,
    e: &DirectionSet,
    w: &WeightMatrix,
    phi: &PhiFunction,
) -> Result<Vec3> {
    let l = l_matrix(e, w, um)?;
    let scale = if phi.is_identity() { 1.0 } else { phi.derivative(wahba_cost0(rhat, um, e, w)?) };
    Ok(s_l(rhat, &l) * scale)
}

/// Time derivatives of the continuous-time estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarEstRates {
    /// Body rate of the estimate: `d R_hat/dt = R_hat rate^`.
    pub rhat_rate: Vec3,
    pub omega_dot: Vec3,
    pub betahat_dot: Vec3,
}

pub fn continuous_rhs(
    state: &VarEstState,
    frame: &MeasurementFrame,
    geom: &mut Geometry,
    gains: &VarEstGains,
) -> Result<VarEstRates> {
    let grad = geom.potential_gradient(&state.rhat, frame, &gains.phi)?;
    let omega_hat = state.omega_hat(&frame.omega_m);
    let omega_dot = (-omega_hat.cross(&state.omega) * gains.m + grad - gains.d * state.omega) / gains.m;
    let betahat_dot = if gains.p_bias.is_some() { gains.p_bias_inv * grad } else { Vec3::zeros() };
    Ok(VarEstRates { rhat_rate: omega_hat, omega_dot, betahat_dot })
}

fn step_len(frame_i: &MeasurementFrame, frame_i1: &MeasurementFrame) -> Result<f64> {
    let h = frame_i1.t - frame_i.t;
    if h == 0.0 || !h.is_finite() {
        return Err(GeoError::Config(format!("frames at {} and {} give no step", frame_i.t, frame_i1.t)));
    }
    Ok(h)
}

fn bias_update(state: &VarEstState, grad_i: &Vec3, h: f64, gains: &VarEstGains) -> Vec3 {
    if gains.p_bias.is_some() {
        state.betahat + gains.p_bias_inv * grad_i * h
    } else {
        state.betahat
    }
}

/// First-order implicit step. The angular-velocity equation is solved by
/// Newton iteration; on failure the step is retried once as two half steps.
pub fn step_implicit(
    state: &VarEstState,
    frame_i: &MeasurementFrame,
    frame_i1: &MeasurementFrame,
    geom: &mut Geometry,
    gains: &VarEstGains,
    newton: &NewtonConfig,
) -> Result<VarEstState> {
    let h = step_len(frame_i, frame_i1)?;
    let grad_i = if gains.p_bias.is_some() {
        geom.potential_gradient(&state.rhat, frame_i, &gains.phi)?
    } else {
        Vec3::zeros()
    };
    let betahat = bias_update(state, &grad_i, h, gains);
    let run = |s: &VarEstState, om_i: &Vec3, f1: &MeasurementFrame, hh: f64, geom: &mut Geometry| {
        let rhat = s.rhat * exp_so3(&((om_i - s.omega - s.betahat) * hh));
        let grad = geom.potential_gradient(&rhat, f1, &gains.phi)?;
        let c = (Mat3::identity() * gains.m - gains.d * hh) * s.omega + grad * hh;
        let a = f1.omega_m - betahat;
        let (omega, _) = newton_solve_omega(&a, &c, gains.m, hh, s.omega, newton)?;
        Ok::<_, GeoError>(VarEstState { rhat, omega, betahat, t: frame_i1.t })
    };
    match run(state, &frame_i.omega_m, frame_i1, h, geom) {
        Ok(s) => Ok(s),
        Err(GeoError::NewtonNonConvergence { .. }) => {
            let mid = MeasurementFrame {
                t: 0.5 * (frame_i.t + frame_i1.t),
                omega_m: 0.5 * (frame_i.omega_m + frame_i1.omega_m),
                ..frame_i1.clone()
            };
            let half = run(state, &frame_i.omega_m, &mid, 0.5 * h, geom)?;
            let half = VarEstState { betahat: state.betahat, ..half };
            run(&half, &mid.omega_m, frame_i1, 0.5 * h, geom)
        }
        Err(e) => Err(e),
    }
}

/// First-order explicit step, the adjoint of [`step_implicit`].
pub fn step_explicit(
    state: &VarEstState,
    frame_i: &MeasurementFrame,
    frame_i1: &MeasurementFrame,
    geom: &mut Geometry,
    gains: &VarEstGains,
) -> Result<VarEstState> {
    let h = step_len(frame_i, frame_i1)?;
    let grad_i = geom.potential_gradient(&state.rhat, frame_i, &gains.phi)?;
    let betahat = bias_update(state, &grad_i, h, gains);
    let omega = explicit_omega(state, &frame_i.omega_m, &grad_i, h, gains)?;
    let rhat = state.rhat * exp_so3(&((frame_i1.omega_m - omega - betahat) * h));
    Ok(VarEstState { rhat, omega, betahat, t: frame_i1.t })
}

/// `(m I + h D)^{-1} (exp(-h Omega_hat^) m omega + h grad)`.
fn explicit_omega(state: &VarEstState, omega_m: &Vec3, grad: &Vec3, h: f64, gains: &VarEstGains) -> Result<Vec3> {
    let omega_hat = state.omega_hat(omega_m);
    let rhs = exp_so3(&(-omega_hat * h)) * (state.omega * gains.m) + grad * h;
    (Mat3::identity() * gains.m + gains.d * h)
        .lu()
        .solve(&rhs)
        .ok_or_else(|| GeoError::Config("m I + h D is singular".into()))
}

/// Second-order symmetric step: explicit half step for the angular velocity,
/// full attitude update at the averaged gyro reading, implicit half step.
pub fn step_symmetric(
    state: &VarEstState,
    frame_i: &MeasurementFrame,
    frame_i1: &MeasurementFrame,
    geom: &mut Geometry,
    gains: &VarEstGains,
    newton: &NewtonConfig,
) -> Result<VarEstState> {
    let h = step_len(frame_i, frame_i1)?;
    let hh = 0.5 * h;
    let grad_i = geom.potential_gradient(&state.rhat, frame_i, &gains.phi)?;
    let betahat = bias_update(state, &grad_i, h, gains);
    let omega_half = explicit_omega(state, &frame_i.omega_m, &grad_i, hh, gains)?;
    let omega_m_half = 0.5 * (frame_i.omega_m + frame_i1.omega_m);
    let beta_half = 0.5 * (state.betahat + betahat);
    let rhat = state.rhat * exp_so3(&((omega_m_half - omega_half - beta_half) * h));
    let grad = geom.potential_gradient(&rhat, frame_i1, &gains.phi)?;
    let c = (Mat3::identity() * gains.m - gains.d * hh) * omega_half + grad * hh;
    let a = frame_i1.omega_m - betahat;
    let (omega, _) = newton_solve_omega(&a, &c, gains.m, hh, omega_half, newton)?;
    Ok(VarEstState { rhat, omega, betahat, t: frame_i1.t })
}

/// Implicit step with bias estimation; requires `gains.with_bias`.
pub fn step_bias_implicit(
    state: &VarEstState,
    frame_i: &MeasurementFrame,
    frame_i1: &MeasurementFrame,
    geom: &mut Geometry,
    gains: &VarEstGains,
    newton: &NewtonConfig,
) -> Result<VarEstState> {
    if gains.p_bias.is_none() {
        return Err(GeoError::Config("bias estimation needs a bias gain P".into()));
    }
    step_implicit(state, frame_i, frame_i1, geom, gains, newton)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    Implicit,
    #[default]
    Explicit,
    Symmetric,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Implicit => "implicit",
            Scheme::Explicit => "explicit",
            Scheme::Symmetric => "symmetric",
        }
    }
}

/// An estimator instance: scheme, gains and its geometry cache.
#[derive(Debug, Clone)]
pub struct VarEst {
    pub scheme: Scheme,
    pub gains: VarEstGains,
    pub newton: NewtonConfig,
    pub geometry: Geometry,
}

impl VarEst {
    pub fn step(&mut self, state: &VarEstState, frame_i: &MeasurementFrame, frame_i1: &MeasurementFrame) -> Result<VarEstState> {
        match self.scheme {
            Scheme::Implicit => step_implicit(state, frame_i, frame_i1, &mut self.geometry, &self.gains, &self.newton),
            Scheme::Explicit => step_explicit(state, frame_i, frame_i1, &mut self.geometry, &self.gains),
            Scheme::Symmetric => step_symmetric(state, frame_i, frame_i1, &mut self.geometry, &self.gains, &self.newton),
        }
    }
}

/// `V = Phi(<I - Q, K>) + m/2 |omega|^2 + 1/2 beta_err^T P beta_err` with
/// `Q = R R_hat^T` and `beta_err = beta - beta_hat`.
pub fn lyapunov(state: &VarEstState, r_true: &Rotation, beta_true: &Vec3, k: &KMatrix, gains: &VarEstGains) -> f64 {
    let q = r_true.matrix() * state.rhat.matrix().transpose();
    let attitude = (k.matrix() - q.transpose() * k.matrix()).trace();
    let mut v = gains.phi.value(attitude) + 0.5 * gains.m * state.omega.norm_squared();
    if let Some(p) = &gains.p_bias {
        let b = beta_true - state.betahat;
        v += 0.5 * b.dot(&(p * b));
    }
    v
}

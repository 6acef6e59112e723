//! SO(3) and SE(3) primitives.
//!
//! Rotations are stored as 3x3 matrices and poses as a rotation plus a
//! translation. Twists are ordered `(omega, v)`: angular part first, then
//! linear, both expressed in the body frame. Exponential coordinates of a pose
//! are `eta = (theta, beta)` with `b = S(theta) beta`, where `S` is the left
//! Jacobian of SO(3).
//!
//! Every closed-form coefficient with a removable singularity at zero switches
//! to a Taylor expansion below [`SMALL_ANGLE`]. Logarithms refuse principal
//! angles within [`EPS_LOG`] of pi.

use std::f64::consts::PI;
use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Matrix6, Vector3, Vector6};

use crate::error::{GeoError, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Vec6 = Vector6<f64>;
pub type Mat6 = Matrix6<f64>;

/// Distance below pi at which logarithms are refused.
pub const EPS_LOG: f64 = 1e-6;

/// Below this angle the trigonometric coefficients use Taylor expansions.
pub const SMALL_ANGLE: f64 = 1e-4;

/// Relative asymmetry tolerated by [`vex`].
const SKEW_TOL: f64 = 1e-9;

/// Above this angle `log_so3` extracts the axis from the symmetric part.
const LOG_AXIS_SWITCH: f64 = 3.0;

/// Orthonormality tolerance for [`Rotation::from_matrix`].
const ORTHO_TOL: f64 = 1e-9;

pub fn hat(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`]. Rejects matrices that are not skew-symmetric.
pub fn vex(m: &Mat3) -> Result<Vec3> {
    let asym = (m + m.transpose()).norm();
    let scale = m.norm();
    if asym > SKEW_TOL * scale {
        return Err(GeoError::NonSkewInput { asymmetry: asym / scale.max(f64::MIN_POSITIVE) });
    }
    Ok(vex_skew(m))
}

/// `vex` of the skew-symmetric part `(m - m^T) / 2`. Never fails.
pub fn vex_skew(m: &Mat3) -> Vec3 {
    Vec3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// Rodrigues coefficients `sin(t)/t` and `(1 - cos t)/t^2`.
fn rodrigues_coeffs(t: f64) -> (f64, f64) {
    if t < SMALL_ANGLE {
        let t2 = t * t;
        (1.0 - t2 / 6.0 + t2 * t2 / 120.0, 0.5 - t2 / 24.0 + t2 * t2 / 720.0)
    } else {
        (t.sin() / t, (1.0 - t.cos()) / (t * t))
    }
}

/// `(t - sin t)/t^3`.
fn third_coeff(t: f64) -> f64 {
    if t < SMALL_ANGLE {
        let t2 = t * t;
        1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0
    } else {
        (t - t.sin()) / (t * t * t)
    }
}

/// `1/t^2 - (1 + cos t)/(2 t sin t)`, the quadratic coefficient of `S^{-1}`.
fn inv_coeff(t: f64) -> f64 {
    if t < SMALL_ANGLE {
        let t2 = t * t;
        1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
    } else {
        1.0 / (t * t) - (1.0 + t.cos()) / (2.0 * t * t.sin())
    }
}

/// A rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Mat3);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Mat3::identity())
    }

    /// Wraps `m` after checking `m^T m = I` and `det m = 1` to 1e-9.
    pub fn from_matrix(m: Mat3) -> Result<Self> {
        let r = Rotation(m);
        let err = r.orthonormality_error();
        if !err.is_finite() || err > ORTHO_TOL {
            return Err(GeoError::NotARotation { error: err });
        }
        Ok(r)
    }

    /// Wraps `m` without validation. The caller guarantees orthonormality.
    pub fn from_matrix_unchecked(m: Mat3) -> Self {
        Rotation(m)
    }

    pub fn exp(theta: &Vec3) -> Self {
        exp_so3(theta)
    }

    pub fn log(&self) -> Result<Vec3> {
        log_so3(self)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    pub fn angle(&self) -> f64 {
        principal_angle(self)
    }

    /// `max(|R^T R - I|_F, |det R - 1|)`.
    pub fn orthonormality_error(&self) -> f64 {
        let e = (self.0.transpose() * self.0 - Mat3::identity()).norm();
        e.max((self.0.determinant() - 1.0).abs())
    }

    /// Nearest rotation in the Frobenius sense (polar projection).
    pub fn renormalized(&self) -> Self {
        let svd = self.0.svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut r = u * vt;
        if r.determinant() < 0.0 {
            let mut u = u;
            // Flip the direction of least stretch.
            let (imin, _) = svd
                .singular_values
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
            u.column_mut(imin).neg_mut();
            r = u * vt;
        }
        Rotation(r)
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<Vec3> for Rotation {
    type Output = Vec3;
    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

impl Mul<&Vec3> for Rotation {
    type Output = Vec3;
    fn mul(self, rhs: &Vec3) -> Vec3 {
        self.0 * rhs
    }
}

impl Mul<&Vec3> for &Rotation {
    type Output = Vec3;
    fn mul(self, rhs: &Vec3) -> Vec3 {
        self.0 * rhs
    }
}

/// Rodrigues' formula.
pub fn exp_so3(theta: &Vec3) -> Rotation {
    let t = theta.norm();
    let x = hat(theta);
    let (a, b) = rodrigues_coeffs(t);
    Rotation(Mat3::identity() + x * a + x * x * b)
}

/// Principal rotation vector of `r`. Fails within [`EPS_LOG`] of pi.
pub fn log_so3(r: &Rotation) -> Result<Vec3> {
    let m = r.matrix();
    let cos = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let w = vex_skew(m);
    let sin = w.norm();
    let t = sin.atan2(cos);
    if t >= PI - EPS_LOG {
        return Err(GeoError::NearPiSingularity { angle: t });
    }
    if t < SMALL_ANGLE {
        let t2 = t * t;
        return Ok(w * (1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0));
    }
    if t < LOG_AXIS_SWITCH {
        return Ok(w * (t / sin));
    }
    // sin(t) is small here: read the axis off (R + R^T)/2 - cos(t) I = (1 - cos t) a a^T.
    let b = (m + m.transpose()) * 0.5 - Mat3::identity() * cos;
    let j = (0..3).max_by(|&i, &k| b[(i, i)].total_cmp(&b[(k, k)])).unwrap_or(0);
    let mut a = b.column(j).into_owned();
    a /= a.norm();
    if a.dot(&w) < 0.0 {
        a = -a;
    }
    Ok(a * t)
}

/// Rotation angle in `[0, pi]`, equal to `arccos((tr r - 1)/2)`.
pub fn principal_angle(r: &Rotation) -> f64 {
    let m = r.matrix();
    let cos = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    vex_skew(m).norm().atan2(cos)
}

/// Left Jacobian `S(theta)` of SO(3); the translation part of `exp_se3` is `S(theta) beta`.
pub fn s_matrix(theta: &Vec3) -> Mat3 {
    let t = theta.norm();
    let x = hat(theta);
    let (_, b) = rodrigues_coeffs(t);
    Mat3::identity() + x * b + x * x * third_coeff(t)
}

/// Closed-form inverse of [`s_matrix`]: `I - X/2 + c(t) X^2`.
pub fn s_inv_matrix(theta: &Vec3) -> Mat3 {
    let x = hat(theta);
    Mat3::identity() - x * 0.5 + x * x * inv_coeff(theta.norm())
}

/// Right Jacobian `J_r(phi) = S(-phi)`: `exp(phi + d) = exp(phi) exp(J_r(phi) d) + O(d^2)`.
pub fn right_jacobian(phi: &Vec3) -> Mat3 {
    s_matrix(&(-phi))
}

/// `A(theta) = I + X/2 + c(t) X^2`, the rotational block of `G(eta)`.
pub fn a_matrix(theta: &Vec3) -> Mat3 {
    let x = hat(theta);
    Mat3::identity() + x * 0.5 + x * x * inv_coeff(theta.norm())
}

/// Lower-left block `T(theta, beta)` of `G(eta)`.
pub fn t_matrix(theta: &Vec3, beta: &Vec3) -> Mat3 {
    let t = theta.norm();
    let c = inv_coeff(t);
    let (d1, d2) = if t < SMALL_ANGLE {
        let t2 = t * t;
        (
            1.0 / 6.0 + t2 / 180.0 + t2 * t2 / 5040.0,
            1.0 / 360.0 + t2 / 7560.0 + t2 * t2 / 201600.0,
        )
    } else {
        let (s, co) = (t.sin(), t.cos());
        (
            (1.0 + co) * (t - s) / (2.0 * t * s * s),
            (1.0 + co) * (t + s) / (2.0 * t * t * t * s * s) - 2.0 / (t * t * t * t),
        )
    };
    let a = a_matrix(theta);
    let sb = s_matrix(theta) * beta;
    let tb = theta.dot(beta);
    hat(&sb) * a * 0.5 + (theta * beta.transpose() + a * tb) * c - sb * theta.transpose() * d1
        + theta * theta.transpose() * (d2 * tb)
}

/// Block form of `G(eta)`, the map with `d(eta)/dt = G(eta) xi` for `d(exp eta)/dt = exp(eta) xi^`.
/// No range check: callers keep the angle below pi.
pub fn g_matrix_raw(eta: &Vec6) -> Mat6 {
    let theta = eta.fixed_rows::<3>(0).into_owned();
    let beta = eta.fixed_rows::<3>(3).into_owned();
    let a = a_matrix(&theta);
    let mut g = Mat6::zeros();
    g.fixed_view_mut::<3, 3>(0, 0).copy_from(&a);
    g.fixed_view_mut::<3, 3>(3, 3).copy_from(&a);
    g.fixed_view_mut::<3, 3>(3, 0).copy_from(&t_matrix(&theta, &beta));
    g
}

/// [`g_matrix_raw`] for validated coordinates.
pub fn g_matrix(eta: &ExpCoords) -> Mat6 {
    g_matrix_raw(&eta.to_vec6())
}

/// Equivalent series form `G = I + ad/2 + alpha ad^2 + beta ad^4`.
pub fn g_matrix_series(eta: &ExpCoords) -> Mat6 {
    let t = eta.principal_angle();
    let (alpha, beta) = if t < SMALL_ANGLE {
        let t2 = t * t;
        (1.0 / 12.0 - t2 * t2 / 30240.0, -1.0 / 720.0 - t2 / 15120.0 - t2 * t2 / 403200.0)
    } else {
        let cot = 1.0 / (0.5 * t).tan();
        let csc2 = 1.0 / (0.5 * t).sin().powi(2);
        (
            2.0 / (t * t) - 0.75 / t * cot - csc2 / 8.0,
            1.0 / t.powi(4) - cot / (4.0 * t.powi(3)) - csc2 / (8.0 * t * t),
        )
    };
    let x = ad_vec(&eta.to_vec6());
    let x2 = x * x;
    Mat6::identity() + x * 0.5 + x2 * alpha + x2 * x2 * beta
}

/// A rigid-body configuration `(R, b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub r: Rotation,
    pub b: Vec3,
}

impl Pose {
    pub fn new(r: Rotation, b: Vec3) -> Self {
        Pose { r, b }
    }

    pub fn identity() -> Self {
        Pose { r: Rotation::identity(), b: Vec3::zeros() }
    }

    pub fn inverse(&self) -> Self {
        let rt = self.r.transpose();
        Pose { r: rt, b: -(rt * self.b) }
    }

    /// Homogeneous 4x4 matrix.
    pub fn matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(self.r.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.b);
        m
    }

    /// `Ad_g = [[R, 0], [b^ R, R]]`.
    pub fn adjoint(&self) -> Mat6 {
        adjoint_ad(self)
    }

    pub fn renormalized(&self) -> Self {
        Pose { r: self.r.renormalized(), b: self.b }
    }
}

impl Mul for Pose {
    type Output = Pose;
    fn mul(self, rhs: Pose) -> Pose {
        Pose { r: self.r * rhs.r, b: self.b + self.r * rhs.b }
    }
}

/// Body-frame velocity `xi = (omega, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Twist {
    pub omega: Vec3,
    pub v: Vec3,
}

impl Twist {
    pub fn new(omega: Vec3, v: Vec3) -> Self {
        Twist { omega, v }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn to_vec6(&self) -> Vec6 {
        stack(&self.omega, &self.v)
    }

    pub fn from_vec6(x: &Vec6) -> Self {
        let (omega, v) = split(x);
        Twist { omega, v }
    }
}

/// Exponential coordinates `eta = (theta, beta)` with principal angle below `pi - EPS_LOG`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpCoords {
    theta: Vec3,
    beta: Vec3,
}

impl ExpCoords {
    pub fn new(theta: Vec3, beta: Vec3) -> Result<Self> {
        let t = theta.norm();
        if !(t < PI - EPS_LOG) {
            return Err(GeoError::NearPiSingularity { angle: t });
        }
        Ok(ExpCoords { theta, beta })
    }

    pub fn zero() -> Self {
        ExpCoords { theta: Vec3::zeros(), beta: Vec3::zeros() }
    }

    pub fn from_vec6(x: &Vec6) -> Result<Self> {
        let (theta, beta) = split(x);
        Self::new(theta, beta)
    }

    pub fn theta(&self) -> &Vec3 {
        &self.theta
    }

    pub fn beta(&self) -> &Vec3 {
        &self.beta
    }

    pub fn principal_angle(&self) -> f64 {
        self.theta.norm()
    }

    pub fn to_vec6(&self) -> Vec6 {
        stack(&self.theta, &self.beta)
    }
}

pub fn exp_se3(eta: &ExpCoords) -> Pose {
    Pose { r: exp_so3(&eta.theta), b: s_matrix(&eta.theta) * eta.beta }
}

/// Exponential of an unchecked 6-vector (any angle).
pub fn exp_se3_raw(eta: &Vec6) -> Pose {
    let (theta, beta) = split(eta);
    Pose { r: exp_so3(&theta), b: s_matrix(&theta) * beta }
}

/// Inverse of [`exp_se3`] with `beta = S^{-1}(theta) b`.
pub fn log_se3(g: &Pose) -> Result<ExpCoords> {
    let theta = log_so3(&g.r)?;
    let beta = s_inv_matrix(&theta) * g.b;
    Ok(ExpCoords { theta, beta })
}

/// `Ad_g` acting on twists ordered `(omega, v)`.
pub fn adjoint_ad(g: &Pose) -> Mat6 {
    let r = g.r.matrix();
    let mut m = Mat6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(r);
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(&(hat(&g.b) * r));
    m
}

/// `ad_xi = [[omega^, 0], [v^, omega^]]`.
pub fn ad(xi: &Twist) -> Mat6 {
    ad_vec(&xi.to_vec6())
}

/// [`ad`] on a stacked 6-vector.
pub fn ad_vec(x: &Vec6) -> Mat6 {
    let (w, v) = split(x);
    let wh = hat(&w);
    let mut m = Mat6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&wh);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&wh);
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(&hat(&v));
    m
}

/// `ad*_x y = ad_x^T y`, computed without forming the matrix.
pub fn ad_star(x: &Vec6, y: &Vec6) -> Vec6 {
    let (w, v) = split(x);
    let (m, f) = split(y);
    // ad^T = [[-w^, -v^], [0, -w^]]
    stack(&(-w.cross(&m) - v.cross(&f)), &(-w.cross(&f)))
}

pub fn stack(a: &Vec3, b: &Vec3) -> Vec6 {
    Vec6::new(a.x, a.y, a.z, b.x, b.y, b.z)
}

pub fn split(x: &Vec6) -> (Vec3, Vec3) {
    (Vec3::new(x[0], x[1], x[2]), Vec3::new(x[3], x[4], x[5]))
}

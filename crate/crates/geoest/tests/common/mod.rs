//! Helpers shared by the integration tests.
#![allow(dead_code)]

use geoest::liegroup::{exp_so3, Rotation, Vec3};
use geoest::measurement::MeasurementFrame;
use geoest::wahba::{BodyMeasurementSet, Mat3xK};
use rand::Rng;

/// Uniformly distributed axis times an angle in `[0, max_angle)`.
pub fn rand_rotvec<R: Rng>(rng: &mut R, max_angle: f64) -> Vec3 {
    let axis = loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            break v / n;
        }
    };
    axis * rng.gen_range(0.0..max_angle)
}

pub fn rand_rotation<R: Rng>(rng: &mut R) -> Rotation {
    exp_so3(&rand_rotvec(rng, std::f64::consts::PI - 1e-3))
}

pub fn rand_vec3<R: Rng>(rng: &mut R, scale: f64) -> Vec3 {
    Vec3::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale), rng.gen_range(-scale..scale))
}

fn n1() -> Vec3 {
    Vec3::new(1.0, 2.0, 2.0) / 3.0
}

fn n2() -> Vec3 {
    Vec3::new(0.0, 0.6, -0.8)
}

/// Smooth truth `R(t) = exp(a(t) n1) exp(b(t) n2)` with closed-form body rate.
pub fn truth(t: f64) -> (Rotation, Vec3) {
    let a = 0.8 * (0.7 * t).sin() + 0.3 * t;
    let da = 0.56 * (0.7 * t).cos() + 0.3;
    let b = 0.5 * (1.1 * t + 0.4).cos();
    let db = -0.55 * (1.1 * t + 0.4).sin();
    let rb = exp_so3(&(n2() * b));
    let r = exp_so3(&(n1() * a)) * rb;
    let omega = rb.transpose() * (n1() * da) + n2() * db;
    (r, omega)
}

/// Noise-free frames along [`truth`], every sensor active, gyro offset by `bias`.
pub fn frames(e: &Mat3xK, h: f64, steps: usize, bias: Vec3) -> Vec<MeasurementFrame> {
    (0..=steps)
        .map(|k| {
            let t = k as f64 * h;
            let (r, omega) = truth(t);
            MeasurementFrame {
                t,
                um: BodyMeasurementSet::new(r.matrix().transpose() * e),
                omega_m: omega + bias,
                active_sensor_ids: (0..e.ncols()).collect(),
            }
        })
        .collect()
}

/// Four well-spread unit directions.
pub fn directions() -> Mat3xK {
    let cols = [
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
        Vec3::new(0.0, 0.0, 1.0),
        Vec3::new(1.0, 1.0, 1.0).normalize(),
    ];
    Mat3xK::from_columns(&cols)
}

/// Rotation distance in Frobenius norm.
pub fn rot_dist(a: &Rotation, b: &Rotation) -> f64 {
    (a.matrix() - b.matrix()).norm()
}

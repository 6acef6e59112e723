mod common;

use geoest::baselines::*;
use geoest::liegroup::{exp_so3, principal_angle, Mat3, Rotation, Vec3};
use geoest::measurement::MeasurementFrame;
use geoest::varest::{step_implicit, Geometry, NewtonConfig, VarEstGains, VarEstState, WeightPolicy};
use geoest::wahba::{BodyMeasurementSet, PhiFunction};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn frame(t: f64, r: &Rotation, omega_m: Vec3) -> MeasurementFrame {
    let e = common::directions();
    MeasurementFrame {
        t,
        um: BodyMeasurementSet::new(r.matrix().transpose() * &e),
        omega_m,
        active_sensor_ids: (0..e.ncols()).collect(),
    }
}

fn random_spd(rng: &mut ChaCha8Rng) -> Mat3 {
    let a = Mat3::from_fn(|_, _| rand::Rng::gen_range(rng, -1.0..1.0));
    a * a.transpose() + Mat3::identity() * 0.2
}

fn cov_config(weights: Vec<Mat3>) -> CovFilterConfig {
    CovFilterConfig { e_all: common::directions(), weights, q_cov: Mat3::identity() * 1e-3 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn innovation_is_the_cost_gradient(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = common::directions();
        let weights: Vec<Mat3> = (0..e.ncols()).map(|_| random_spd(&mut rng)).collect();
        let f = frame(0.0, &common::rand_rotation(&mut rng), Vec3::zeros());
        let rhat = common::rand_rotation(&mut rng);
        let cost = |r: &Rotation| {
            (0..e.ncols())
                .map(|j| {
                    let d = r.matrix().transpose() * e.column(j) - f.direction(j);
                    0.5 * d.dot(&(weights[j] * d))
                })
                .sum::<f64>()
        };
        let ell = innovation(&rhat, &f, &e, &weights);
        let d = 1e-6;
        for i in 0..3 {
            let mut s = Vec3::zeros();
            s[i] = d;
            let fd = (cost(&(rhat * exp_so3(&s))) - cost(&(rhat * exp_so3(&-s)))) / (2.0 * d);
            prop_assert!((fd - ell[i]).abs() < 1e-5 * ell.norm().max(1e-3), "{} vs {}", fd, ell[i]);
        }
    }
}

#[test]
fn gain_matrices_stay_symmetric_positive_definite() {
    let h = 0.01;
    let cfg = cov_config(vec![Mat3::identity() * 4.0; 4]);
    let mut game = CovFilterState { rhat: Rotation::identity(), p: Mat3::identity() * 0.9, t: 0.0 };
    let mut mekf = game;
    for k in 0..2000 {
        let t = k as f64 * h;
        let (r, omega) = common::truth(t);
        let f = frame(t, &r, omega);
        game = game_step(&game, &f, t + h, &cfg).unwrap();
        mekf = mekf_step(&mekf, &f, t + h, &cfg).unwrap();
        for s in [&game, &mekf] {
            assert_eq!(s.p, s.p.transpose());
            assert!(s.p.symmetric_eigenvalues().min() > 0.0);
        }
    }
}

/// With `omega_0 = P_0 l_0` and `K_P = P_0`, every estimator takes the same first step.
#[test]
fn matched_start_gives_one_first_step() {
    let h = 0.01;
    let e = common::directions();
    let weights = vec![Mat3::identity(); 4];
    let (r, omega) = common::truth(0.0);
    let f0 = frame(0.0, &r, omega);
    let (r1, omega1) = common::truth(h);
    let f1 = frame(h, &r1, omega1);
    let rhat0 = r * exp_so3(&Vec3::new(0.0, 0.0, 1.0));
    let p0 = Mat3::identity() * 0.9;
    let init = matched_initialization(rhat0, p0, &f0, &e, &weights);
    assert!(init.ell0.norm() > 0.1);

    let cfg = cov_config(weights);
    let cov = CovFilterState { rhat: rhat0, p: p0, t: 0.0 };
    let game = game_step(&cov, &f0, h, &cfg).unwrap().rhat;
    let mekf = mekf_step(&cov, &f0, h, &cfg).unwrap().rhat;
    let cgo = cgo_step(&CgoState { rhat: rhat0, t: 0.0 }, &f0, h, &CgoConfig { e_all: e.clone(), k_p: init.k_p }).unwrap().rhat;
    let mut geom = Geometry::new(e, WeightPolicy::Unit).unwrap();
    let gains = VarEstGains::new(2.0, Mat3::identity(), PhiFunction::identity()).unwrap();
    let s0 = VarEstState::new(rhat0, init.varest_omega0, 0.0);
    let var = step_implicit(&s0, &f0, &f1, &mut geom, &gains, &NewtonConfig::default()).unwrap().rhat;
    for (name, r) in [("mekf", mekf), ("cgo", cgo), ("varest", var)] {
        assert!(common::rot_dist(&r, &game) < 1e-14, "{name}: {}", common::rot_dist(&r, &game));
    }
}

#[test]
fn cgo_error_decreases_from_sixty_degrees() {
    let h = 0.01;
    let e = common::directions();
    let cfg = CgoConfig { e_all: e.clone(), k_p: Mat3::identity() * 0.9 };
    let (r, _) = common::truth(0.0);
    let axis = Vec3::new(1.0, -1.0, 0.5).normalize();
    let mut s = CgoState { rhat: r * exp_so3(&(axis * std::f64::consts::FRAC_PI_3)), t: 0.0 };
    let potential = |s: &CgoState, r: &Rotation| {
        let f = frame(0.0, r, Vec3::zeros());
        (0..e.ncols()).map(|j| (s.rhat.matrix().transpose() * e.column(j) - f.direction(j)).norm_squared()).sum::<f64>()
    };
    let mut v = potential(&s, &r);
    for k in 0..3000 {
        let t = k as f64 * h;
        let (r, omega) = common::truth(t);
        s = cgo_step(&s, &frame(t, &r, omega), t + h, &cfg).unwrap();
        let (r1, _) = common::truth(t + h);
        let v1 = potential(&s, &r1);
        // Below about 1e-6 the Lie-Euler tracking error takes over.
        if v > 1e-4 {
            assert!(v1 < v, "step {k}: {v} -> {v1}");
        }
        v = v1;
    }
    let (r, _) = common::truth(30.0);
    let angle = principal_angle(&Rotation::from_matrix_unchecked(r.matrix() * s.rhat.matrix().transpose()));
    assert!(angle < 1e-2, "final error {angle}");
}

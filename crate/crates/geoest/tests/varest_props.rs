mod common;

use geoest::liegroup::{exp_so3, Mat3, Rotation, Vec3};
use geoest::measurement::MeasurementFrame;
use geoest::varest::*;
use geoest::wahba::{critical_points, BodyMeasurementSet, PhiFunction};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gains() -> VarEstGains {
    VarEstGains::new(2.0, Mat3::from_diagonal(&Vec3::new(1.8, 1.95, 2.1)), PhiFunction::identity()).unwrap()
}

fn geometry() -> Geometry {
    Geometry::new(common::directions(), WeightPolicy::Eigenvalues([1.67, 1.11, 0.56])).unwrap()
}

fn truth_frame(t: f64, bias: Vec3) -> MeasurementFrame {
    let (r, omega) = common::truth(t);
    let e = common::directions();
    MeasurementFrame {
        t,
        um: BodyMeasurementSet::new(r.matrix().transpose() * &e),
        omega_m: omega + bias,
        active_sensor_ids: (0..e.ncols()).collect(),
    }
}

fn state_dist(a: &VarEstState, b: &VarEstState) -> f64 {
    common::rot_dist(&a.rhat, &b.rhat) + (a.omega - b.omega).norm() + (a.betahat - b.betahat).norm()
}

/// Runs a scheme over `[0, t_end]` on noise-free frames.
fn run(scheme: Scheme, h: f64, t_end: f64, s0: VarEstState) -> VarEstState {
    let mut est = VarEst { scheme, gains: gains(), newton: NewtonConfig::default(), geometry: geometry() };
    let n = (t_end / h).round() as usize;
    let mut s = s0;
    let mut f0 = truth_frame(0.0, Vec3::zeros());
    for k in 1..=n {
        let f1 = truth_frame(k as f64 * h, Vec3::zeros());
        s = est.step(&s, &f0, &f1).unwrap();
        f0 = f1;
    }
    s
}

fn initial_state() -> VarEstState {
    let (r, _) = common::truth(0.0);
    VarEstState::new(r * exp_so3(&Vec3::new(1.2, -0.8, 0.5)), Vec3::new(0.3, -0.2, 0.4), 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    /// The implicit step run backwards in time undoes the explicit step.
    #[test]
    fn explicit_and_implicit_are_adjoint(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = common::directions();
        let mut geom = geometry();
        let g = gains();
        let h = 0.01;
        let r0 = common::rand_rotation(&mut rng);
        let r1 = common::rand_rotation(&mut rng);
        let mk = |t: f64, r: &Rotation, w: Vec3| MeasurementFrame {
            t,
            um: BodyMeasurementSet::new(r.matrix().transpose() * &e),
            omega_m: w,
            active_sensor_ids: vec![0, 1, 2, 3],
        };
        let f0 = mk(0.0, &r0, common::rand_vec3(&mut rng, 2.0));
        let f1 = mk(h, &r1, common::rand_vec3(&mut rng, 2.0));
        let s0 = VarEstState::new(common::rand_rotation(&mut rng), common::rand_vec3(&mut rng, 1.0), 0.0);
        let s1 = step_explicit(&s0, &f0, &f1, &mut geom, &g).unwrap();
        let back = step_implicit(&s1, &f1, &f0, &mut geom, &g, &NewtonConfig::default()).unwrap();
        prop_assert!(state_dist(&back, &s0) < 1e-10, "{}", state_dist(&back, &s0));
        prop_assert_eq!(back.t, s0.t);
    }

    #[test]
    fn symmetric_step_is_reversible(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut geom = geometry();
        let g = gains();
        let t = rng.gen_range(0.0..10.0);
        let f0 = truth_frame(t, Vec3::zeros());
        let f1 = truth_frame(t + 0.02, Vec3::zeros());
        let (r, _) = common::truth(t);
        let s0 = VarEstState::new(r * common::rand_rotation(&mut rng), common::rand_vec3(&mut rng, 1.0), t);
        let s1 = step_symmetric(&s0, &f0, &f1, &mut geom, &g, &NewtonConfig::default()).unwrap();
        let back = step_symmetric(&s1, &f1, &f0, &mut geom, &g, &NewtonConfig::default()).unwrap();
        prop_assert!(state_dist(&back, &s0) < 1e-9, "{}", state_dist(&back, &s0));
    }

    /// Along the continuous flow, `dV/dt = -omega^T D omega`.
    #[test]
    fn lyapunov_rate_is_the_dissipation(seed in any::<u64>(), with_bias in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut geom = geometry();
        let mut g = gains();
        let beta = if with_bias { common::rand_vec3(&mut rng, 0.05) } else { Vec3::zeros() };
        if with_bias {
            g = g.with_bias(Mat3::from_diagonal(&Vec3::new(3.0, 4.0, 5.0))).unwrap();
        }
        let t = rng.gen_range(0.0..10.0);
        let frame = truth_frame(t, beta);
        let (r, _) = common::truth(t);
        let mut s = VarEstState::new(r * common::rand_rotation(&mut rng), common::rand_vec3(&mut rng, 1.0), t);
        if with_bias {
            s.betahat = common::rand_vec3(&mut rng, 0.05);
        }
        let rates = continuous_rhs(&s, &frame, &mut geom, &g).unwrap();
        let k = geom.k_matrix(&frame.active_sensor_ids).unwrap();
        let v_at = |d: f64| {
            let sd = VarEstState {
                rhat: s.rhat * exp_so3(&(rates.rhat_rate * d)),
                omega: s.omega + rates.omega_dot * d,
                betahat: s.betahat + rates.betahat_dot * d,
                t: t + d,
            };
            lyapunov(&sd, &common::truth(t + d).0, &beta, &k, &g)
        };
        let d = 1e-5;
        let fd = (v_at(d) - v_at(-d)) / (2.0 * d);
        let exact = -s.omega.dot(&(g.d() * s.omega));
        prop_assert!((fd - exact).abs() < 1e-6 * (1.0 + exact.abs()), "{} vs {}", fd, exact);
    }
}


#[test]
fn lyapunov_decreases_per_step() {
    let h = 0.01;
    let mut geom = geometry();
    let g = gains();
    let k = geom.k_matrix(&[0, 1, 2, 3]).unwrap();
    let mut worst = f64::NEG_INFINITY;
    for scheme in [Scheme::Explicit, Scheme::Implicit, Scheme::Symmetric] {
        let mut est = VarEst { scheme, gains: g, newton: NewtonConfig::default(), geometry: geometry() };
        let mut s = initial_state();
        let mut f0 = truth_frame(0.0, Vec3::zeros());
        let mut v0 = lyapunov(&s, &common::truth(0.0).0, &Vec3::zeros(), &k, &g);
        for i in 1..=2000 {
            let f1 = truth_frame(i as f64 * h, Vec3::zeros());
            s = est.step(&s, &f0, &f1).unwrap();
            let v1 = lyapunov(&s, &common::truth(f1.t).0, &Vec3::zeros(), &k, &g);
            worst = worst.max(v1 - v0);
            f0 = f1;
            v0 = v1;
        }
    }
    eprintln!("worst per-step increase {worst:e}");
    assert!(worst <= 0.01 * h * h, "increase {worst}");
}

fn convergence_order(scheme: Scheme) -> (f64, f64) {
    let reference = run(scheme, 1e-4, 10.0, initial_state());
    let errs: Vec<f64> = [0.02, 0.01, 0.005].iter().map(|&h| state_dist(&run(scheme, h, 10.0, initial_state()), &reference)).collect();
    ((errs[0] / errs[1]).log2(), (errs[1] / errs[2]).log2())
}

#[test]
fn first_order_schemes_converge_linearly() {
    for scheme in [Scheme::Explicit, Scheme::Implicit] {
        let (a, b) = convergence_order(scheme);
        eprintln!("{} slopes {a:.3} {b:.3}", scheme.name());
        assert!((a - 1.0).abs() < 0.3 && (b - 1.0).abs() < 0.3, "{}: {a} {b}", scheme.name());
    }
}

#[test]
fn symmetric_scheme_converges_quadratically() {
    let (a, b) = convergence_order(Scheme::Symmetric);
    eprintln!("symmetric slopes {a:.3} {b:.3}");
    assert!((a - 2.0).abs() < 0.4 && (b - 2.0).abs() < 0.4, "{a} {b}");
}

/// With a static body at an unstable critical attitude the estimate does not move.
#[test]
fn critical_points_are_equilibria() {
    let e = common::directions();
    let r = exp_so3(&Vec3::new(0.3, 0.5, -0.2));
    let mut geom = geometry();
    let k = geom.k_matrix(&[0, 1, 2, 3]).unwrap();
    let frame = |t: f64| MeasurementFrame {
        t,
        um: BodyMeasurementSet::new(r.matrix().transpose() * &e),
        omega_m: Vec3::zeros(),
        active_sensor_ids: vec![0, 1, 2, 3],
    };
    for cp in critical_points(&k).unwrap() {
        // Q = R R_hat^T, so R_hat = Q^T R.
        let start = VarEstState::new(cp.q.transpose() * r, Vec3::zeros(), 0.0);
        for scheme in [Scheme::Explicit, Scheme::Implicit, Scheme::Symmetric] {
            let mut est = VarEst { scheme, gains: gains(), newton: NewtonConfig::default(), geometry: geometry() };
            let mut s = start;
            for i in 0..100 {
                s = est.step(&s, &frame(i as f64 * 0.01), &frame((i + 1) as f64 * 0.01)).unwrap();
            }
            assert!(state_dist(&s, &start) < 1e-10, "index {} {}: {}", cp.index, scheme.name(), state_dist(&s, &start));
        }
    }
}

/// Against a static body the discrete equilibrium is exact, so random starts
/// reach the truth up to rounding.
#[test]
fn random_starts_converge() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let e = common::directions();
    let r = exp_so3(&Vec3::new(-0.4, 0.9, 0.1));
    let frame = |t: f64| MeasurementFrame {
        t,
        um: BodyMeasurementSet::new(r.matrix().transpose() * &e),
        omega_m: Vec3::zeros(),
        active_sensor_ids: vec![0, 1, 2, 3],
    };
    for _ in 0..20 {
        let mut est = VarEst { scheme: Scheme::Explicit, gains: gains(), newton: NewtonConfig::default(), geometry: geometry() };
        let mut s = VarEstState::new(common::rand_rotation(&mut rng), common::rand_vec3(&mut rng, 1.0), 0.0);
        for i in 0..6000 {
            s = est.step(&s, &frame(i as f64 * 0.01), &frame((i + 1) as f64 * 0.01)).unwrap();
        }
        let err = common::rot_dist(&s.rhat, &r);
        assert!(err < 1e-8, "attitude error {err}");
    }
}

#[test]
fn newton_converges_quickly() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut most = 0;
    for _ in 0..10_000 {
        let a = common::rand_vec3(&mut rng, 2.0);
        let c = common::rand_vec3(&mut rng, 4.0);
        let guess = common::rand_vec3(&mut rng, 1.0);
        let (x, it) = newton_solve_omega(&a, &c, 2.0, 0.01, guess, &NewtonConfig::default()).unwrap();
        assert!((x - exp_so3(&((x - a) * 0.01)) * c / 2.0).amax() < 1e-12);
        most = most.max(it);
    }
    assert!(most <= 5, "{most} iterations");
}

#[test]
fn estimate_stays_on_the_group() {
    let mut est = VarEst { scheme: Scheme::Explicit, gains: gains(), newton: NewtonConfig::default(), geometry: geometry() };
    let mut s = initial_state();
    let mut f0 = truth_frame(0.0, Vec3::zeros());
    for i in 1..=100_000 {
        let f1 = truth_frame(i as f64 * 0.01, Vec3::zeros());
        s = est.step(&s, &f0, &f1).unwrap();
        f0 = f1;
    }
    assert!(s.rhat.orthonormality_error() < 1e-10, "{}", s.rhat.orthonormality_error());
}

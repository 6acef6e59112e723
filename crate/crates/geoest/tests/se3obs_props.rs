mod common;

use geoest::dynamics::{integrate_truth, ForceModel, Integrator, RigidBodyParams, SinusoidWrench, TruthState};
use geoest::liegroup::{exp_so3, Mat3, Mat6, Pose, Twist, Vec3, Vec6};
use geoest::se3obs::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn body() -> RigidBodyParams {
    RigidBodyParams::new(21.0, Mat3::from_diagonal(&Vec3::new(2.56, 3.01, 2.98))).unwrap()
}

fn gravity_gains() -> GravityObserverGains {
    GravityObserverGains {
        k1: Mat6::from_diagonal(&Vec6::new(0.5, 0.6, 0.7, 0.4, 0.5, 0.6)),
        k2: 1.5,
        k3: 2.0,
        k4: Mat6::identity() * 3.0,
    }
}

fn force_gains() -> ForceObserverGains {
    ForceObserverGains { k1: 1.0, k2: 2.0, k3: 1.5 }
}

fn ft_gains(k: f64) -> FiniteTimeGains {
    FiniteTimeGains { k, p_num: 23, p_den: 21, gamma: 0.03 }
}

fn constant_wrench() -> Vec6 {
    Vec6::new(0.01, -0.02, 0.015, 0.1, 0.05, -0.08)
}

fn truth0() -> TruthState {
    TruthState {
        g: Pose::new(exp_so3(&Vec3::new(0.4, 0.2, 0.1)), Vec3::new(3.0, 2.0, -1.0)),
        xi: Twist::new(Vec3::new(0.5, -0.5, 0.1), Vec3::new(-0.05, 0.25, 0.3)),
        t: 0.0,
    }
}

fn perturbed(rng: &mut ChaCha8Rng, s: &TruthState) -> ObserverState {
    let g = s.g * Pose::new(exp_so3(&common::rand_rotvec(rng, 1.5)), common::rand_vec3(rng, 1.0));
    let xi = Twist::from_vec6(&(s.xi.to_vec6() + Vec6::from_fn(|_, _| rand::Rng::gen_range(rng, -0.5..0.5))));
    ObserverState::new(g, xi, s.t)
}

/// The observer's force model and the matching truth force for each kind.
fn models(kind: &ObserverKind) -> ForceModel {
    match kind {
        ObserverKind::Gravity(_) => ForceModel::Zero,
        ObserverKind::Force(_) | ObserverKind::FiniteTime(_) => {
            ForceModel::Prescribed(SinusoidWrench::constant(constant_wrench()))
        }
    }
}

fn step(kind: &ObserverKind, s: &ObserverState, meas: &FullStateMeasurement, h: f64, substeps: usize) -> ObserverState {
    let p = body();
    match kind {
        ObserverKind::Gravity(k) => gravity_observer_step(s, meas, &p, k, 1.0, h, substeps).unwrap(),
        ObserverKind::Force(k) => force_observer_step(s, meas, &p, k, h, substeps).unwrap(),
        ObserverKind::FiniteTime(k) => finite_time_observer_step(s, meas, &p, &models(kind), k, h, substeps).unwrap(),
    }
}

fn kinds() -> [ObserverKind; 3] {
    [ObserverKind::Gravity(gravity_gains()), ObserverKind::Force(force_gains()), ObserverKind::FiniteTime(ft_gains(2.0))]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Richardson-extrapolated forward differences of `V` along the observer
    /// flow match the closed-form rate. The gravity case runs against a
    /// force-free truth, so the true parameter is zero.
    #[test]
    fn lyapunov_rate_matches_finite_differences(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = body();
        let truth = truth0();
        let mut s0 = perturbed(&mut rng, &truth);
        s0.muhat = rand::Rng::gen_range(&mut rng, -1.0..1.0);
        let meas = FullStateMeasurement { t: 0.0, g: truth.g, xi: truth.xi, wrench: constant_wrench() };
        for kind in kinds() {
            let force = models(&kind);
            let v_after = |d: f64| {
                let tr = integrate_truth(&truth, &p, &force, d, 1, Integrator::Rk4).unwrap()[1];
                let s = step(&kind, &s0, &meas, d, 1);
                lyapunov_value(&kind, &s, &tr.g, &tr.xi, 0.0, &p).unwrap()
            };
            let v0 = lyapunov_value(&kind, &s0, &truth.g, &truth.xi, 0.0, &p).unwrap();
            let d = 1e-4;
            let fd = 2.0 * (v_after(d / 2.0) - v0) / (d / 2.0) - (v_after(d) - v0) / d;
            let exact = lyapunov_rate(&kind, &s0, &truth.g, &truth.xi, &p).unwrap();
            prop_assert!(exact < 0.0);
            prop_assert!((fd - exact).abs() < 1e-5 * exact.abs(), "{:?}: {} vs {}", kind, fd, exact);
        }
    }

    #[test]
    fn lyapunov_values_are_nonnegative(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = truth0();
        let mut s = perturbed(&mut rng, &truth);
        s.muhat = rand::Rng::gen_range(&mut rng, -1.0..1.0);
        for kind in kinds() {
            let v = lyapunov_value(&kind, &s, &truth.g, &truth.xi, 0.3, &body()).unwrap();
            prop_assert!(v > 0.0);
            let at_truth = ObserverState { muhat: 0.3, ..ObserverState::new(truth.g, truth.xi, 0.0) };
            let v = lyapunov_value(&kind, &at_truth, &truth.g, &truth.xi, 0.3, &body()).unwrap();
            prop_assert!(v.abs() < 1e-20);
        }
    }
}

fn run(kind: &ObserverKind, s0: ObserverState, h: f64, steps: usize, substeps: usize) -> (Vec<f64>, ObserverState) {
    let p = body();
    let force = models(kind);
    let traj = integrate_truth(&truth0(), &p, &force, h, steps, Integrator::Rk4).unwrap();
    let mut s = s0;
    let mut v = vec![lyapunov_value(kind, &s, &traj[0].g, &traj[0].xi, 0.0, &p).unwrap()];
    for k in 0..steps {
        let meas = FullStateMeasurement { t: traj[k].t, g: traj[k].g, xi: traj[k].xi, wrench: constant_wrench() };
        s = step(kind, &s, &meas, h, substeps);
        v.push(lyapunov_value(kind, &s, &traj[k + 1].g, &traj[k + 1].xi, 0.0, &p).unwrap());
    }
    (v, s)
}

#[test]
fn lyapunov_function_decreases() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for kind in kinds() {
        let mut s0 = perturbed(&mut rng, &truth0());
        s0.muhat = 0.5;
        let (v, s) = run(&kind, s0, 0.01, 2000, 4);
        for (k, w) in v.windows(2).enumerate() {
            if w[0] > 1e-10 {
                assert!(w[1] < w[0], "{kind:?} step {k}: {} -> {}", w[0], w[1]);
            }
        }
        // The parameter error of the gravity observer decays slowly, so only a
        // modest overall reduction is required here.
        assert!(v.last().unwrap() < &(0.05 * v[0]), "{kind:?}: {} -> {}", v[0], v.last().unwrap());
        assert!(s.ghat.r.orthonormality_error() < 1e-12);
    }
}

#[test]
fn larger_finite_time_gain_converges_sooner() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let s0 = perturbed(&mut rng, &truth0());
    let times: Vec<f64> = [10.0, 50.0, 100.0]
        .iter()
        .map(|&k| {
            let (v, _) = run(&ObserverKind::FiniteTime(ft_gains(k)), s0, 0.01, 1000, 20);
            let i = v.iter().position(|&x| x < 1e-10).unwrap_or_else(|| panic!("k = {k} never reached 1e-10"));
            i as f64 * 0.01
        })
        .collect();
    assert!(times[0] > times[1] && times[1] > times[2], "{times:?}");
}

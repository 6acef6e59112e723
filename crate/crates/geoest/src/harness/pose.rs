//! SE(3) observer scenarios.

use std::f64::consts::PI;

use super::config::{GravityKind, PosePreset, PoseScenario, Scenario, ScenarioKind};
use super::result::{metric_principal_angle, Flag, FilterSeries, Sample};
use crate::dynamics::{integrate_truth, ForceModel, Integrator, OrbitSetup, RigidBodyParams, SinusoidWrench, TruthState};
use crate::error::{GeoError, Result};
use crate::liegroup::{exp_se3_raw, exp_so3, stack, Mat3, Mat6, Pose, Twist, Vec3, Vec6};
use crate::measurement::{NoiseKind, NoiseSource};
use crate::se3obs::{
    error_coords, finite_time_observer_step, force_observer_step, gravity_observer_step, lyapunov_value,
    FiniteTimeGains, ForceObserverGains, FullStateMeasurement, GravityObserverGains, ObserverKind, ObserverState,
};

const DEG: f64 = PI / 180.0;

/// Noise streams of the four measured quantities.
const POSE_NOISE_STREAM: u64 = 1 << 31;

fn v3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

/// Truth, measurements and the model shared by the observer, in run units.
#[derive(Debug, Clone)]
pub struct PoseSetup {
    pub h: f64,
    pub params: RigidBodyParams,
    /// Forces the observer is told about.
    pub known: ForceModel,
    pub truth: Vec<TruthState>,
    pub measurements: Vec<FullStateMeasurement>,
    /// True gravitational parameter in run units, zero without gravity.
    pub mu: f64,
    pub length_unit: f64,
    pub observer: ObserverKind,
    pub substeps: usize,
    pub init: ObserverState,
}

fn known_forces(p: &PoseScenario) -> ForceModel {
    let l = p.length_unit_m;
    let mut parts = Vec::new();
    match p.forces.gravity {
        GravityKind::None => {}
        GravityKind::Spherical => parts.push(ForceModel::SphericalGravity { mu: p.forces.mu_m3_s2 / l.powi(3), length_unit: l }),
        GravityKind::Uniform => parts.push(ForceModel::UniformGravity { accel: p.forces.accel_m_s2 / l }),
    }
    let w = stack(&v3(p.forces.torque_nm), &(v3(p.forces.force_n) / l));
    if w.amax() > 0.0 {
        parts.push(ForceModel::Prescribed(SinusoidWrench::constant(w)));
    }
    ForceModel::Sum(parts)
}

fn truth_forces(p: &PoseScenario, known: &ForceModel) -> ForceModel {
    match &p.disturbance {
        None => known.clone(),
        Some(d) => {
            let amp = stack(&v3(d.torque_amp_nm), &(v3(d.force_amp_n) / p.length_unit_m));
            let dist = SinusoidWrench {
                offset: Vec6::zeros(),
                amp,
                freq_rad_s: Vec6::repeat(d.freq_rad_s),
                phase_rad: Vec6::zeros(),
            };
            ForceModel::Sum(vec![known.clone(), ForceModel::Prescribed(dist)])
        }
    }
}

fn initial_truth(p: &PoseScenario) -> TruthState {
    let l = p.length_unit_m;
    let t = &p.truth;
    let si = match t.preset {
        Some(PosePreset::AsteroidOrbit) => {
            let o = OrbitSetup { mu: p.forces.mu_m3_s2, ..OrbitSetup::asteroid() };
            o.initial_state(false)
        }
        None => TruthState {
            g: Pose::new(exp_so3(&v3(t.r0_rotvec_rad)), v3(t.b0_m)),
            xi: Twist::new(v3(t.omega0_rad_s), v3(t.v0_m_s)),
            t: 0.0,
        },
    };
    TruthState { g: Pose::new(si.g.r, si.g.b / l), xi: Twist::new(si.xi.omega, si.xi.v / l), t: 0.0 }
}

fn observer_kind(kind: ScenarioKind, p: &PoseScenario) -> Result<ObserverKind> {
    let o = &p.observer;
    let missing = || GeoError::Config("observer gains missing".into());
    let k = match kind {
        ScenarioKind::GravityObserver => {
            let g = o.gravity.as_ref().ok_or_else(missing)?;
            let d6 = |x: [f64; 6]| Mat6::from_diagonal(&Vec6::from_row_slice(&x));
            ObserverKind::Gravity(GravityObserverGains { k1: d6(g.k1_diag), k2: g.k2, k3: g.k3, k4: d6(g.k4_diag) })
        }
        ScenarioKind::ForceObserver => {
            let f = o.force.as_ref().ok_or_else(missing)?;
            ObserverKind::Force(ForceObserverGains { k1: f.k1, k2: f.k2, k3: f.k3 })
        }
        ScenarioKind::FiniteTimeObserver => {
            let f = o.finite_time.as_ref().ok_or_else(missing)?;
            ObserverKind::FiniteTime(FiniteTimeGains { k: f.k, p_num: f.p_num, p_den: f.p_den, gamma: f.gamma })
        }
        ScenarioKind::Attitude => return Err(GeoError::Config("not an observer scenario".into())),
    };
    match &k {
        ObserverKind::Gravity(g) => g.validate()?,
        ObserverKind::Force(g) => g.validate()?,
        ObserverKind::FiniteTime(g) => g.validate()?,
    }
    Ok(k)
}

/// Per-component sinusoid of amplitude `amp` at `freq_hz`, phases from the seed.
fn sinusoid(src: &NoiseSource, id: u64, freq_hz: f64, amp: f64) -> NoiseKind {
    let mut k = NoiseKind::SinusoidSum { freqs_hz: vec![freq_hz], amps: vec![amp], phases: None };
    k.resolve_phases(src, POSE_NOISE_STREAM + id);
    k
}

/// Generates truth and measurements. Not part of the observer's timing.
pub fn prepare(s: &Scenario) -> Result<PoseSetup> {
    let p = s.pose.as_ref().ok_or_else(|| GeoError::Config("not an observer scenario".into()))?;
    let l = p.length_unit_m;
    let params = RigidBodyParams::new(p.body.mass_kg, Mat3::from_diagonal(&v3(p.body.inertia_diag_kg_m2)))?;
    let known = known_forces(p);
    let actual = truth_forces(p, &known);
    let truth = integrate_truth(&initial_truth(p), &params, &actual, s.h_s, s.steps(), Integrator::Rk4)?;
    let src = NoiseSource::new(s.seed);
    let noise = p.noise.as_ref().map(|n| {
        [
            sinusoid(&src, 0, n.freq_hz, n.attitude_deg * DEG),
            sinusoid(&src, 1, n.freq_hz, n.position_m / l),
            sinusoid(&src, 2, n.freq_hz, n.omega_deg_s * DEG),
            sinusoid(&src, 3, n.freq_hz, n.velocity_m_s / l),
        ]
    });
    let mut rng = src.rng(0, 0);
    let mut measurements = Vec::with_capacity(truth.len());
    for x in &truth {
        let wrench = actual.wrench(&x.g, x.t, &params)?;
        let (g, xi) = match &noise {
            None => (x.g, x.xi),
            Some([att, pos, om, vel]) => {
                let r = x.g.r * exp_so3(&att.sample(x.t, &mut rng));
                (
                    Pose::new(r, x.g.b + pos.sample(x.t, &mut rng)),
                    Twist::new(x.xi.omega + om.sample(x.t, &mut rng), x.xi.v + vel.sample(x.t, &mut rng)),
                )
            }
        };
        let g = match measurements.last() {
            Some(prev) if p.noise.as_ref().is_some_and(|n| n.dead_reckon_pose) => {
                let prev: &FullStateMeasurement = prev;
                (prev.g * exp_se3_raw(&(prev.xi.to_vec6() * (x.t - prev.t)))).renormalized()
            }
            _ => g,
        };
        measurements.push(FullStateMeasurement { t: x.t, g, xi, wrench });
    }
    let e = &p.estimate;
    let mut init = ObserverState::new(
        Pose::new(exp_so3(&v3(e.r_rotvec_rad)), v3(e.b_m) / l),
        Twist::new(v3(e.omega_rad_s), v3(e.v_m_s) / l),
        0.0,
    );
    init.muhat = e.muhat_m3_s2 / l.powi(3);
    let mu = if p.forces.gravity == GravityKind::Spherical { p.forces.mu_m3_s2 / l.powi(3) } else { 0.0 };
    Ok(PoseSetup {
        h: s.h_s,
        params,
        known,
        truth,
        measurements,
        mu,
        length_unit: l,
        observer: observer_kind(s.kind, p)?,
        substeps: p.observer.substeps,
        init,
    })
}

pub fn observer_name(k: &ObserverKind) -> &'static str {
    match k {
        ObserverKind::Gravity(_) => "gravity_observer",
        ObserverKind::Force(_) => "force_observer",
        ObserverKind::FiniteTime(_) => "finite_time_observer",
    }
}

/// One observer step from the measurement at the start of the step.
pub fn observer_step(setup: &PoseSetup, s: &ObserverState, meas: &FullStateMeasurement) -> Result<ObserverState> {
    let (h, n) = (setup.h, setup.substeps);
    match &setup.observer {
        ObserverKind::Gravity(g) => gravity_observer_step(s, meas, &setup.params, g, setup.length_unit, h, n),
        ObserverKind::Force(g) => force_observer_step(s, meas, &setup.params, g, h, n),
        ObserverKind::FiniteTime(g) => finite_time_observer_step(s, meas, &setup.params, &setup.known, g, h, n),
    }
}

/// Runs the observer and scores it against the truth.
pub fn run_setup(setup: &PoseSetup) -> Result<FilterSeries> {
    let n = setup.measurements.len().saturating_sub(1);
    let mut states = Vec::with_capacity(n + 1);
    states.push(setup.init);
    let mut s = setup.init;
    let mut error = None;
    let mut wall = 0.0;
    for meas in &setup.measurements[..n] {
        let elapsed = super::stopwatch();
        let next = observer_step(setup, &s, meas);
        wall += elapsed();
        match next {
            Ok(x) => {
                s = x;
                states.push(s);
            }
            Err(e) => {
                error = Some(e.to_string());
                break;
            }
        }
    }
    let mut samples = Vec::with_capacity(n + 1);
    let mut singular_at = None;
    for (k, x) in setup.truth.iter().enumerate() {
        let sample = states.get(k).filter(|_| singular_at.is_none()).and_then(|st| {
            let e = error_coords(st, &x.g, &x.xi).ok()?;
            let v = lyapunov_value(&setup.observer, st, &x.g, &x.xi, setup.mu, &setup.params).unwrap_or(f64::NAN);
            let mu_err = match setup.observer {
                ObserverKind::Gravity(_) => setup.mu - st.muhat,
                _ => 0.0,
            };
            Some(Sample {
                t: x.t,
                phi: metric_principal_angle(&x.g.r, &st.ghat.r),
                omega_err: e.xi_err.fixed_rows::<3>(0).norm(),
                beta_err: e.eta.fixed_rows::<3>(3).into_owned(),
                mu_err,
                pose: Some((e.eta, e.xi_err)),
                lyapunov: v,
                flag: Flag::Ok,
            })
        });
        match sample {
            Some(smp) => samples.push(smp),
            None => {
                singular_at.get_or_insert(x.t);
                if error.is_none() && k < states.len() {
                    error = Some(format!("estimate error near 180 deg at t = {}", x.t));
                }
                samples.push(Sample::singular(x.t));
            }
        }
    }
    Ok(FilterSeries { filter: observer_name(&setup.observer).to_string(), samples, singular_at, error, wall_clock_s: wall })
}

pub fn run(s: &Scenario) -> Result<Vec<FilterSeries>> {
    let setup = prepare(s)?;
    Ok(vec![run_setup(&setup)?])
}

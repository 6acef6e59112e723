//! Attitude scenarios: truth, shared measurement stream, filters, metrics.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand_distr::{Distribution, Normal, UnitSphere};

use super::config::{
    AttitudeScenario, FilterKind, MotionKind, NoiseFamily, Scenario, SchemeName, VarEstSettings,
};
use super::result::{metric_principal_angle, Flag, FilterSeries, Sample, SINGULAR_ANGLE_RAD, SINGULAR_HOLD_S};
use crate::baselines::{
    cgo_innovation, cgo_step, game_step, innovation, matched_initialization, mekf_step, CgoConfig, CgoState,
    CovFilterConfig, CovFilterState,
};
use crate::dynamics::{AttitudeMotion, AttitudeState, SinusoidWrench};
use crate::error::{GeoError, Result};
use crate::liegroup::{exp_so3, Mat3, Rotation, Vec3, Vec6};
use crate::measurement::{
    ButterworthFilter, DirectionNoiseModel, GyroNoiseModel, MeasurementFrame, MeasurementGenerator, NoiseKind,
    NoiseSource, SensorSchedule,
};
use crate::varest::{
    lyapunov, Geometry, NewtonConfig, Scheme, VarEst, VarEstGains, VarEstState, WeightPolicy,
};
use crate::wahba::{BodyMeasurementSet, Mat3xK, PhiFunction, WeightMatrix};

/// Stream of the random initial attitude; apart from the sensor streams.
const INIT_STREAM: u64 = 1 << 30;

const DEG: f64 = PI / 180.0;

fn v3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

/// Truth and measurements shared by every filter of a run.
#[derive(Debug, Clone)]
pub struct AttitudeSetup {
    pub h: f64,
    pub truth: Vec<AttitudeState>,
    pub frames: Vec<MeasurementFrame>,
    pub e_all: Mat3xK,
    pub gyro_bias: Vec3,
    pub rhat0: Rotation,
}

/// One filter's state in a uniform wrapper.
#[derive(Debug, Clone, Copy)]
pub enum FilterState {
    VarEst(VarEstState),
    Cov(CovFilterState),
    Cgo(CgoState),
}

/// A configured filter ready to step through frames.
#[derive(Debug, Clone)]
pub enum AttitudeFilter {
    VarEst(VarEst),
    Game(CovFilterConfig),
    Mekf(CovFilterConfig),
    Cgo(CgoConfig),
    /// Does nothing; used to check that timing excludes shared work.
    Noop,
}

impl AttitudeFilter {
    pub fn step(&mut self, s: &FilterState, f0: &MeasurementFrame, f1: &MeasurementFrame) -> Result<FilterState> {
        match (self, s) {
            (AttitudeFilter::VarEst(est), FilterState::VarEst(st)) => Ok(FilterState::VarEst(est.step(st, f0, f1)?)),
            (AttitudeFilter::Game(cfg), FilterState::Cov(st)) => Ok(FilterState::Cov(game_step(st, f0, f1.t, cfg)?)),
            (AttitudeFilter::Mekf(cfg), FilterState::Cov(st)) => Ok(FilterState::Cov(mekf_step(st, f0, f1.t, cfg)?)),
            (AttitudeFilter::Cgo(cfg), FilterState::Cgo(st)) => Ok(FilterState::Cgo(cgo_step(st, f0, f1.t, cfg)?)),
            (AttitudeFilter::Noop, s) => Ok(*s),
            _ => Err(GeoError::Config("filter and state kinds differ".into())),
        }
    }
}

/// Filter plus initial state, as built from a scenario.
#[derive(Debug, Clone)]
pub struct ConfiguredFilter {
    pub name: String,
    pub filter: AttitudeFilter,
    pub init: FilterState,
}

fn direction_table(a: &AttitudeScenario) -> Result<Mat3xK> {
    let mut cols = Vec::with_capacity(a.sensors.directions.len());
    for (j, d) in a.sensors.directions.iter().enumerate() {
        let v = v3(*d);
        let n = v.norm();
        if a.sensors.normalize_directions && n > 0.0 {
            cols.push(v / n);
        } else if (n - 1.0).abs() <= 1e-6 {
            cols.push(v);
        } else {
            return Err(GeoError::Config(format!("direction {j} has norm {n}; set normalize_directions")));
        }
    }
    Ok(Mat3xK::from_columns(&cols))
}

fn direction_noise(a: &AttitudeScenario) -> DirectionNoiseModel {
    let n = &a.sensors.direction_noise;
    match n.kind {
        NoiseFamily::None => DirectionNoiseModel::none(),
        NoiseFamily::Bump => DirectionNoiseModel::bump(n.level_deg * DEG),
        NoiseFamily::Sinusoid => DirectionNoiseModel {
            kind: NoiseKind::SinusoidSum {
                freqs_hz: n.freqs_hz.clone(),
                amps: n.amps_deg.iter().map(|a| a * DEG).collect(),
                phases: None,
            },
            dj: Mat3::identity(),
        },
    }
}

fn gyro_noise(a: &AttitudeScenario) -> GyroNoiseModel {
    let n = &a.sensors.gyro_noise;
    let model = match n.kind {
        NoiseFamily::None => GyroNoiseModel::none(),
        NoiseFamily::Bump => GyroNoiseModel::bump(n.level_deg_s * DEG),
        NoiseFamily::Sinusoid => GyroNoiseModel {
            kind: NoiseKind::SinusoidSum {
                freqs_hz: n.freqs_hz.clone(),
                amps: n.amps_deg_s.iter().map(|a| a * DEG).collect(),
                phases: None,
            },
            b: Mat3::identity(),
            bias: Vec3::zeros(),
        },
    };
    model.with_bias(v3(a.sensors.gyro_bias_rad_s))
}

fn initial_attitude(a: &AttitudeScenario, seed: u64) -> Rotation {
    if let Some(r) = a.truth.r0_rotvec_rad {
        return exp_so3(&v3(r));
    }
    if let Some(std) = a.truth.r0_random_std_deg {
        let mut rng = NoiseSource::new(seed).fixed_rng(INIT_STREAM);
        let axis: [f64; 3] = UnitSphere.sample(&mut rng);
        let angle = Normal::new(0.0, std * DEG).expect("positive deviation").sample(&mut rng);
        // Stay clear of the antipodal set where the error angle is undefined.
        let angle = angle.clamp(-(PI - 0.05), PI - 0.05);
        return exp_so3(&(v3(axis) * angle));
    }
    Rotation::identity()
}

fn motion(a: &AttitudeScenario) -> AttitudeMotion {
    match a.truth.motion {
        MotionKind::Prescribed => AttitudeMotion::PrescribedProfile,
        MotionKind::RigidBody => {
            let t = &a.truth;
            let j = v3(t.inertia_diag_kg_m2.unwrap_or([1.0; 3]));
            let six = |x: [f64; 3]| Vec6::new(x[0], x[1], x[2], 0.0, 0.0, 0.0);
            AttitudeMotion::Dynamics {
                j: Mat3::from_diagonal(&j),
                torque: SinusoidWrench {
                    offset: six(t.torque_offset_nm),
                    amp: six(t.torque_amp_nm),
                    freq_rad_s: six(t.torque_freq_rad_s),
                    phase_rad: six(t.torque_phase_rad),
                },
            }
        }
    }
}

/// Runs the Butterworth pre-filter over a frame sequence, per sensor and gyro.
pub fn prefilter_frames(frames: &mut [MeasurementFrame], sensors: usize, h: f64) -> Result<()> {
    let mut dir: Vec<ButterworthFilter> = (0..sensors).map(|_| ButterworthFilter::new(h)).collect::<Result<_>>()?;
    let mut gyro = ButterworthFilter::new(h)?;
    for f in frames.iter_mut() {
        let cols: Vec<Vec3> =
            f.active_sensor_ids.iter().enumerate().map(|(j, &id)| dir[id].filter(&f.direction(j))).collect();
        f.um = BodyMeasurementSet::from_columns(&cols);
        f.omega_m = gyro.filter(&f.omega_m);
    }
    Ok(())
}

/// Generates truth and measurements. Not part of any filter's timing.
pub fn prepare(s: &Scenario) -> Result<AttitudeSetup> {
    let a = s.attitude.as_ref().ok_or_else(|| GeoError::Config("not an attitude scenario".into()))?;
    let h = s.h_s;
    let n = s.steps();
    let e_all = direction_table(a)?;
    let k = e_all.ncols();
    let schedule = if a.sensors.schedule.is_empty() {
        SensorSchedule::always((0..k).collect())
    } else {
        SensorSchedule::new(a.sensors.schedule.iter().map(|g| (g.start_s, g.sensors.clone())).collect())?
    };
    let gen = MeasurementGenerator::new(e_all.clone(), vec![direction_noise(a); k], gyro_noise(a), schedule, s.seed)?;
    let motion = motion(a);
    let r0 = initial_attitude(a, s.seed);
    let mut st = AttitudeState { r: r0, omega: motion.initial_omega(v3(a.truth.omega0_rad_s), 0.0), t: 0.0 };
    let mut truth = Vec::with_capacity(n + 1);
    let mut frames = Vec::with_capacity(n + 1);
    for i in 0..=n {
        if i > 0 {
            st = motion.step(&st, h);
            st.t = i as f64 * h;
            if i % 1000 == 0 {
                st.r = st.r.renormalized();
            }
        }
        frames.push(gen.frame(i as u64, st.t, &st.r, &st.omega)?);
        truth.push(st);
    }
    if a.sensors.butterworth {
        prefilter_frames(&mut frames, k, h)?;
    }
    let est = &a.estimate;
    let rhat0 = match (est.rhat0_rotvec_rad, est.error0_rotvec_rad) {
        (Some(r), _) => exp_so3(&v3(r)),
        (None, Some(q)) => Rotation::from_matrix_unchecked(exp_so3(&v3(q)).matrix().transpose() * r0.matrix()),
        (None, None) => Rotation::identity(),
    };
    Ok(AttitudeSetup { h, truth, frames, e_all, gyro_bias: v3(a.sensors.gyro_bias_rad_s), rhat0 })
}

/// Noise coefficients `(direction, gyro)` assumed by GAME and MEKF, rad and rad/s.
fn covariance_coefficients(a: &AttitudeScenario) -> Result<(f64, f64)> {
    let dn = &a.sensors.direction_noise;
    let gn = &a.sensors.gyro_noise;
    let dir = match (a.covariance.direction_coeff_deg, dn.kind) {
        (Some(c), _) => c,
        (None, NoiseFamily::Bump) => dn.level_deg,
        (None, NoiseFamily::Sinusoid) => dn.amps_deg.iter().map(|x| x.abs()).sum(),
        (None, NoiseFamily::None) => {
            return Err(GeoError::Config("GAME and MEKF need covariance.direction_coeff_deg without direction noise".into()))
        }
    };
    let gyro = match (a.covariance.gyro_coeff_deg_s, gn.kind) {
        (Some(c), _) => c,
        (None, NoiseFamily::Bump) => gn.level_deg_s,
        (None, NoiseFamily::Sinusoid) => gn.amps_deg_s.iter().map(|x| x.abs()).sum(),
        (None, NoiseFamily::None) => 0.0,
    };
    if !(dir > 0.0) {
        return Err(GeoError::Config("direction noise coefficient must be positive".into()));
    }
    Ok((dir * DEG, gyro * DEG))
}

fn weight_policy(v: &VarEstSettings) -> Result<WeightPolicy> {
    if let Some(d) = &v.w_diag {
        return Ok(WeightPolicy::Fixed(WeightMatrix::diagonal(d)?));
    }
    if let Some(rows) = &v.w_matrix {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(GeoError::Config("w_matrix must be square".into()));
        }
        return Ok(WeightPolicy::Fixed(WeightMatrix::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))?));
    }
    if let Some(d) = v.k_eigenvalues {
        return Ok(WeightPolicy::Eigenvalues(d));
    }
    Ok(WeightPolicy::Unit)
}

pub fn scheme(s: SchemeName) -> Scheme {
    match s {
        SchemeName::Implicit => Scheme::Implicit,
        SchemeName::Explicit => Scheme::Explicit,
        SchemeName::Symmetric => Scheme::Symmetric,
    }
}

/// Builds a variational estimator from its settings.
pub fn build_varest(v: &VarEstSettings, e_all: Mat3xK) -> Result<VarEst> {
    let mut gains = VarEstGains::new(v.m_kg, Mat3::from_diagonal(&v3(v.d_diag_nms)), PhiFunction::identity())?;
    if let Some(p) = v.bias_p_diag {
        gains = gains.with_bias(Mat3::from_diagonal(&v3(p)))?;
    }
    let mut newton = NewtonConfig::default();
    if let Some(t) = v.newton_tol_rad_s {
        newton.tol = t;
    }
    if let Some(m) = v.newton_max_iter {
        newton.max_iter = m;
    }
    newton.validate()?;
    Ok(VarEst { scheme: scheme(v.scheme), gains, newton, geometry: Geometry::new(e_all, weight_policy(v)?)? })
}

/// Every selected filter with its initial state.
pub fn configure_filters(s: &Scenario, setup: &AttitudeSetup) -> Result<Vec<ConfiguredFilter>> {
    let a = s.attitude.as_ref().ok_or_else(|| GeoError::Config("not an attitude scenario".into()))?;
    let est = &a.estimate;
    let f0 = &setup.frames[0];
    let k = setup.e_all.ncols();
    let needs_cov = a.filters.iter().any(|f| matches!(f, FilterKind::Game | FilterKind::Mekf));
    let (dir_c, gyro_c) = if needs_cov || est.matched_omega0 { covariance_coefficients(a)? } else { (1.0, 0.0) };
    let weights = vec![Mat3::identity() / (dir_c * dir_c); k];
    let q_cov = Mat3::identity() * gyro_c * gyro_c;
    let p0 = est.p0_diag.map(|p| Mat3::from_diagonal(&v3(p))).unwrap_or_else(Mat3::identity);
    let matched = matched_initialization(setup.rhat0, p0, f0, &setup.e_all, &weights);
    let mut out = Vec::new();
    for kind in &a.filters {
        let (filter, init) = match kind {
            FilterKind::Varest => {
                let v = a.varest.as_ref().ok_or_else(|| GeoError::Config("missing varest settings".into()))?;
                let mut st = VarEstState::new(setup.rhat0, Vec3::zeros(), 0.0);
                st.betahat = v3(est.betahat0_rad_s);
                st.omega = if est.matched_omega0 {
                    matched.varest_omega0
                } else if let Some(w) = est.omega_err0_rad_s {
                    v3(w)
                } else if let Some(w) = est.omegahat0_rad_s {
                    f0.omega_m - v3(w) - st.betahat
                } else {
                    Vec3::zeros()
                };
                (AttitudeFilter::VarEst(build_varest(v, setup.e_all.clone())?), FilterState::VarEst(st))
            }
            FilterKind::Game | FilterKind::Mekf => {
                let cfg = CovFilterConfig { e_all: setup.e_all.clone(), weights: weights.clone(), q_cov };
                let st = CovFilterState { rhat: setup.rhat0, p: p0, t: 0.0 };
                let f = if *kind == FilterKind::Game { AttitudeFilter::Game(cfg) } else { AttitudeFilter::Mekf(cfg) };
                (f, FilterState::Cov(st))
            }
            FilterKind::Cgo => (
                AttitudeFilter::Cgo(CgoConfig { e_all: setup.e_all.clone(), k_p: matched.k_p }),
                FilterState::Cgo(CgoState { rhat: setup.rhat0, t: 0.0 }),
            ),
        };
        out.push(ConfiguredFilter { name: kind.label().to_string(), filter, init });
    }
    Ok(out)
}

/// Raw output of a filter loop: states until the first failure, and step times.
#[derive(Debug, Clone)]
pub struct LoopOutput {
    pub states: Vec<FilterState>,
    pub error: Option<String>,
    pub step_times_s: Vec<f64>,
}

/// Steps `filter` through all frames. Only the update calls are timed.
pub fn run_loop(filter: &mut AttitudeFilter, init: FilterState, frames: &[MeasurementFrame]) -> LoopOutput {
    let n = frames.len().saturating_sub(1);
    let mut states = Vec::with_capacity(n + 1);
    let mut step_times_s = Vec::with_capacity(n);
    states.push(init);
    let mut s = init;
    let mut error = None;
    for k in 0..n {
        let elapsed = super::stopwatch();
        let next = filter.step(&s, &frames[k], &frames[k + 1]);
        step_times_s.push(elapsed());
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
    LoopOutput { states, error, step_times_s }
}

fn filter_rhat(s: &FilterState) -> Rotation {
    match s {
        FilterState::VarEst(v) => v.rhat,
        FilterState::Cov(c) => c.rhat,
        FilterState::Cgo(c) => c.rhat,
    }
}

/// Metrics of one loop against the truth.
pub fn series_from_loop(
    name: &str,
    filter: &mut AttitudeFilter,
    out: &LoopOutput,
    setup: &AttitudeSetup,
) -> Result<FilterSeries> {
    let mut samples = Vec::with_capacity(setup.frames.len());
    let mut singular_at = None;
    let hold = (SINGULAR_HOLD_S / setup.h).round().max(1.0) as usize;
    let mut above = 0usize;
    for (k, frame) in setup.frames.iter().enumerate() {
        let Some(state) = out.states.get(k).filter(|_| singular_at.is_none()) else {
            singular_at.get_or_insert(frame.t);
            samples.push(Sample::singular(frame.t));
            continue;
        };
        let truth = &setup.truth[k];
        let rhat = filter_rhat(state);
        let phi = metric_principal_angle(&truth.r, &rhat);
        let (omega_hat, betahat, lyap) = match (state, &mut *filter) {
            (FilterState::VarEst(v), AttitudeFilter::VarEst(est)) => {
                let kmat = est.geometry.k_matrix(&frame.active_sensor_ids);
                let l = match kmat {
                    Ok(km) => lyapunov(v, &truth.r, &setup.gyro_bias, &km, &est.gains),
                    Err(_) => f64::NAN,
                };
                (v.omega_hat(&frame.omega_m), v.betahat, l)
            }
            (FilterState::Cov(c), AttitudeFilter::Game(cfg) | AttitudeFilter::Mekf(cfg)) => {
                let ell = innovation(&c.rhat, frame, &cfg.e_all, &cfg.weights);
                (frame.omega_m - c.p * ell, Vec3::zeros(), f64::NAN)
            }
            (FilterState::Cgo(c), AttitudeFilter::Cgo(cfg)) => {
                (frame.omega_m + cfg.k_p * cgo_innovation(&c.rhat, frame, &cfg.e_all), Vec3::zeros(), f64::NAN)
            }
            _ => (frame.omega_m, Vec3::zeros(), f64::NAN),
        };
        above = if phi > SINGULAR_ANGLE_RAD { above + 1 } else { 0 };
        if above >= hold {
            singular_at = Some(frame.t);
            samples.push(Sample::singular(frame.t));
            continue;
        }
        samples.push(Sample {
            t: frame.t,
            phi,
            omega_err: (truth.omega - omega_hat).norm(),
            beta_err: setup.gyro_bias - betahat,
            mu_err: 0.0,
            pose: None,
            lyapunov: lyap,
            flag: Flag::Ok,
        });
    }
    let error = out.error.clone().or_else(|| singular_at.map(|t| format!("attitude error above 170 deg for 1 s at t = {t}")));
    Ok(FilterSeries {
        filter: name.to_string(),
        samples,
        singular_at,
        error,
        wall_clock_s: out.step_times_s.iter().sum(),
    })
}

/// Runs every filter of an attitude scenario over one shared measurement stream.
pub fn run(s: &Scenario) -> Result<Vec<FilterSeries>> {
    let setup = prepare(s)?;
    let filters = configure_filters(s, &setup)?;
    let mut series = Vec::with_capacity(filters.len());
    for mut f in filters {
        let out = run_loop(&mut f.filter, f.init, &setup.frames);
        series.push(series_from_loop(&f.name, &mut f.filter, &out, &setup)?);
    }
    Ok(series)
}

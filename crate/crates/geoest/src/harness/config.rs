//! Scenario files: TOML with units in key names.

use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};

fn one() -> f64 {
    1.0
}

fn default_substeps() -> usize {
    1
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub kind: ScenarioKind,
    pub h_s: f64,
    pub duration_s: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub attitude: Option<AttitudeScenario>,
    #[serde(default)]
    pub pose: Option<PoseScenario>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Attitude,
    GravityObserver,
    ForceObserver,
    FiniteTimeObserver,
}

/// Attitude estimation with direction sensors and a rate gyro.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttitudeScenario {
    pub filters: Vec<FilterKind>,
    pub truth: AttitudeTruth,
    pub sensors: Sensors,
    #[serde(default)]
    pub estimate: InitialEstimate,
    #[serde(default)]
    pub varest: Option<VarEstSettings>,
    #[serde(default)]
    pub covariance: CovarianceSettings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    Varest,
    Game,
    Mekf,
    Cgo,
}

impl FilterKind {
    pub fn label(&self) -> &'static str {
        match self {
            FilterKind::Varest => "varest",
            FilterKind::Game => "game",
            FilterKind::Mekf => "mekf",
            FilterKind::Cgo => "cgo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionKind {
    /// The fixed angular-velocity profile of the filter comparison.
    Prescribed,
    /// Euler's equations with a sinusoidal body torque.
    RigidBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttitudeTruth {
    pub motion: MotionKind,
    /// Initial attitude as a rotation vector.
    #[serde(default)]
    pub r0_rotvec_rad: Option<[f64; 3]>,
    /// Random initial attitude: uniform axis, normal angle with this deviation.
    #[serde(default)]
    pub r0_random_std_deg: Option<f64>,
    #[serde(default)]
    pub omega0_rad_s: [f64; 3],
    #[serde(default)]
    pub inertia_diag_kg_m2: Option<[f64; 3]>,
    #[serde(default)]
    pub torque_offset_nm: [f64; 3],
    #[serde(default)]
    pub torque_amp_nm: [f64; 3],
    #[serde(default)]
    pub torque_freq_rad_s: [f64; 3],
    #[serde(default)]
    pub torque_phase_rad: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sensors {
    /// Inertial directions, one per sensor.
    pub directions: Vec<[f64; 3]>,
    /// Scale tabulated directions to unit length.
    #[serde(default)]
    pub normalize_directions: bool,
    /// Active sensors over time; every sensor is always active when empty.
    #[serde(default)]
    pub schedule: Vec<ScheduleSegment>,
    pub direction_noise: DirectionNoiseSpec,
    pub gyro_noise: GyroNoiseSpec,
    #[serde(default)]
    pub gyro_bias_rad_s: [f64; 3],
    /// First-order Butterworth pre-filter on every reading.
    #[serde(default)]
    pub butterworth: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSegment {
    pub start_s: f64,
    pub sensors: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFamily {
    #[default]
    None,
    /// Bump-distributed components scaled by the level.
    Bump,
    /// Sum of sinusoids with seeded phases.
    Sinusoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DirectionNoiseSpec {
    #[serde(default)]
    pub kind: NoiseFamily,
    #[serde(default)]
    pub level_deg: f64,
    #[serde(default)]
    pub freqs_hz: Vec<f64>,
    #[serde(default)]
    pub amps_deg: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GyroNoiseSpec {
    #[serde(default)]
    pub kind: NoiseFamily,
    #[serde(default)]
    pub level_deg_s: f64,
    #[serde(default)]
    pub freqs_hz: Vec<f64>,
    #[serde(default)]
    pub amps_deg_s: Vec<f64>,
}

/// Initial estimates shared by all filters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct InitialEstimate {
    #[serde(default)]
    pub rhat0_rotvec_rad: Option<[f64; 3]>,
    /// Initial error `Q0 = R0 R_hat0^T` as a rotation vector.
    #[serde(default)]
    pub error0_rotvec_rad: Option<[f64; 3]>,
    /// Start every filter at `Omega_hat0 = Omega_m0 - P0 l0`.
    #[serde(default)]
    pub matched_omega0: bool,
    /// Initial angular-velocity error of the variational estimator.
    #[serde(default)]
    pub omega_err0_rad_s: Option<[f64; 3]>,
    /// Initial angular-velocity estimate of the variational estimator.
    #[serde(default)]
    pub omegahat0_rad_s: Option<[f64; 3]>,
    /// Initial gain matrix of GAME and MEKF, also the CGO gain.
    #[serde(default)]
    pub p0_diag: Option<[f64; 3]>,
    #[serde(default)]
    pub betahat0_rad_s: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    Implicit,
    #[default]
    Explicit,
    Symmetric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarEstSettings {
    #[serde(default)]
    pub scheme: SchemeName,
    pub m_kg: f64,
    pub d_diag_nms: [f64; 3],
    /// Fixed diagonal weights for the full sensor set.
    #[serde(default)]
    pub w_diag: Option<Vec<f64>>,
    /// Fixed full weights, row by row.
    #[serde(default)]
    pub w_matrix: Option<Vec<Vec<f64>>>,
    /// Weights chosen per active set so that `K` has these eigenvalues.
    #[serde(default)]
    pub k_eigenvalues: Option<[f64; 3]>,
    /// Enables bias estimation with `P = diag(bias_p_diag)`.
    #[serde(default)]
    pub bias_p_diag: Option<[f64; 3]>,
    #[serde(default)]
    pub newton_tol_rad_s: Option<f64>,
    #[serde(default)]
    pub newton_max_iter: Option<usize>,
}

/// Noise coefficients assumed by GAME and MEKF. Defaults follow the sensor models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CovarianceSettings {
    #[serde(default)]
    pub direction_coeff_deg: Option<f64>,
    #[serde(default)]
    pub gyro_coeff_deg_s: Option<f64>,
}

/// Pose and velocity observers on SE(3).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseScenario {
    pub body: Body,
    /// Translational quantities are divided by this length inside the run.
    #[serde(default = "one")]
    pub length_unit_m: f64,
    pub truth: PoseTruth,
    #[serde(default)]
    pub forces: Forces,
    #[serde(default)]
    pub disturbance: Option<Disturbance>,
    #[serde(default)]
    pub noise: Option<PoseNoise>,
    pub estimate: PoseEstimate,
    pub observer: ObserverSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Body {
    pub mass_kg: f64,
    pub inertia_diag_kg_m2: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PosePreset {
    /// Periapsis of the elliptical asteroid orbit.
    AsteroidOrbit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PoseTruth {
    #[serde(default)]
    pub preset: Option<PosePreset>,
    #[serde(default)]
    pub r0_rotvec_rad: [f64; 3],
    #[serde(default)]
    pub b0_m: [f64; 3],
    #[serde(default)]
    pub omega0_rad_s: [f64; 3],
    #[serde(default)]
    pub v0_m_s: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GravityKind {
    #[default]
    None,
    /// Central field with gravity gradient.
    Spherical,
    /// Constant acceleration along inertial `-z`.
    Uniform,
}

/// Forces known to the model: gravity plus a constant body wrench.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Forces {
    #[serde(default)]
    pub gravity: GravityKind,
    #[serde(default)]
    pub mu_m3_s2: f64,
    #[serde(default)]
    pub accel_m_s2: f64,
    #[serde(default)]
    pub torque_nm: [f64; 3],
    #[serde(default)]
    pub force_n: [f64; 3],
}

/// Unmodeled body wrench `amp sin(freq t)` acting on the truth only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disturbance {
    #[serde(default)]
    pub torque_amp_nm: [f64; 3],
    #[serde(default)]
    pub force_amp_n: [f64; 3],
    pub freq_rad_s: f64,
}

/// Sinusoidal errors on the measured pose and velocities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseNoise {
    pub freq_hz: f64,
    #[serde(default)]
    pub attitude_deg: f64,
    #[serde(default)]
    pub position_m: f64,
    #[serde(default)]
    pub omega_deg_s: f64,
    #[serde(default)]
    pub velocity_m_s: f64,
    /// Only the first pose sample is measured; later poses are propagated
    /// from the measured velocities.
    #[serde(default)]
    pub dead_reckon_pose: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PoseEstimate {
    #[serde(default)]
    pub r_rotvec_rad: [f64; 3],
    #[serde(default)]
    pub b_m: [f64; 3],
    #[serde(default)]
    pub omega_rad_s: [f64; 3],
    #[serde(default)]
    pub v_m_s: [f64; 3],
    #[serde(default)]
    pub muhat_m3_s2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverSettings {
    /// RK4 pieces per measurement step.
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    #[serde(default)]
    pub gravity: Option<GravityGainSettings>,
    #[serde(default)]
    pub force: Option<ForceGainSettings>,
    #[serde(default)]
    pub finite_time: Option<FiniteTimeGainSettings>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GravityGainSettings {
    pub k1_diag: [f64; 6],
    pub k2: f64,
    pub k3: f64,
    pub k4_diag: [f64; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceGainSettings {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteTimeGainSettings {
    pub k: f64,
    pub p_num: u32,
    pub p_den: u32,
    pub gamma: f64,
}

fn cfg_err(msg: impl Into<String>) -> GeoError {
    GeoError::Config(msg.into())
}

fn finite(name: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(cfg_err(format!("`{name}` must be finite")))
    }
}

fn positive(name: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| *x > 0.0 && x.is_finite()) {
        Ok(())
    } else {
        Err(cfg_err(format!("`{name}` must be positive")))
    }
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| cfg_err(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| cfg_err(e.to_string()))
    }

    /// Number of measurement steps.
    pub fn steps(&self) -> usize {
        (self.duration_s / self.h_s).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h_s > 0.0 && self.h_s.is_finite()) {
            return Err(cfg_err(format!("h_s = {} must be positive", self.h_s)));
        }
        if !(self.duration_s >= self.h_s && self.duration_s.is_finite()) {
            return Err(cfg_err(format!("duration_s = {} must be at least h_s = {}", self.duration_s, self.h_s)));
        }
        match self.kind {
            ScenarioKind::Attitude => {
                let a = self.attitude.as_ref().ok_or_else(|| cfg_err("attitude scenario needs an [attitude] table"))?;
                if self.pose.is_some() {
                    return Err(cfg_err("attitude scenario must not have a [pose] table"));
                }
                a.validate()
            }
            kind => {
                let p = self.pose.as_ref().ok_or_else(|| cfg_err("observer scenario needs a [pose] table"))?;
                if self.attitude.is_some() {
                    return Err(cfg_err("observer scenario must not have an [attitude] table"));
                }
                p.validate(kind)
            }
        }
    }
}

impl AttitudeScenario {
    fn validate(&self) -> Result<()> {
        if self.filters.is_empty() {
            return Err(cfg_err("no filters selected"));
        }
        for (i, f) in self.filters.iter().enumerate() {
            if self.filters[..i].contains(f) {
                return Err(cfg_err(format!("filter `{}` listed twice", f.label())));
            }
        }
        let t = &self.truth;
        if t.r0_rotvec_rad.is_some() && t.r0_random_std_deg.is_some() {
            return Err(cfg_err("give either r0_rotvec_rad or r0_random_std_deg"));
        }
        if let Some(s) = t.r0_random_std_deg {
            positive("r0_random_std_deg", &[s])?;
        }
        finite("omega0_rad_s", &t.omega0_rad_s)?;
        if t.motion == MotionKind::RigidBody {
            let j = t.inertia_diag_kg_m2.ok_or_else(|| cfg_err("rigid_body motion needs inertia_diag_kg_m2"))?;
            positive("inertia_diag_kg_m2", &j)?;
        }
        let s = &self.sensors;
        if s.directions.len() < 2 {
            return Err(cfg_err("at least two directions are needed"));
        }
        for seg in &s.schedule {
            finite("schedule.start_s", &[seg.start_s])?;
        }
        let e = &self.estimate;
        if e.rhat0_rotvec_rad.is_some() && e.error0_rotvec_rad.is_some() {
            return Err(cfg_err("give either rhat0_rotvec_rad or error0_rotvec_rad"));
        }
        let omega_choices = [e.matched_omega0, e.omega_err0_rad_s.is_some(), e.omegahat0_rad_s.is_some()];
        if omega_choices.iter().filter(|&&b| b).count() > 1 {
            return Err(cfg_err("give at most one of matched_omega0, omega_err0_rad_s, omegahat0_rad_s"));
        }
        let needs_p0 = e.matched_omega0 || self.filters.iter().any(|f| *f != FilterKind::Varest);
        if needs_p0 {
            let p0 = e.p0_diag.ok_or_else(|| cfg_err("p0_diag is required by GAME, MEKF, CGO and matched_omega0"))?;
            positive("p0_diag", &p0)?;
        }
        if self.filters.contains(&FilterKind::Varest) {
            let v = self.varest.as_ref().ok_or_else(|| cfg_err("filter `varest` needs a [attitude.varest] table"))?;
            positive("m_kg", &[v.m_kg])?;
            positive("d_diag_nms", &v.d_diag_nms)?;
            let weights = [v.w_diag.is_some(), v.w_matrix.is_some(), v.k_eigenvalues.is_some()];
            if weights.iter().filter(|&&b| b).count() > 1 {
                return Err(cfg_err("give at most one of w_diag, w_matrix, k_eigenvalues"));
            }
            if let Some(p) = v.bias_p_diag {
                positive("bias_p_diag", &p)?;
            }
        }
        Ok(())
    }
}

impl PoseScenario {
    fn validate(&self, kind: ScenarioKind) -> Result<()> {
        positive("mass_kg", &[self.body.mass_kg])?;
        positive("inertia_diag_kg_m2", &self.body.inertia_diag_kg_m2)?;
        positive("length_unit_m", &[self.length_unit_m])?;
        if self.observer.substeps == 0 {
            return Err(cfg_err("observer.substeps must be at least 1"));
        }
        let present = |b: bool, name: &str| if b { Ok(()) } else { Err(cfg_err(format!("{name} gains are required"))) };
        match kind {
            ScenarioKind::GravityObserver => {
                present(self.observer.gravity.is_some(), "[pose.observer.gravity]")?;
                if self.forces.gravity != GravityKind::Spherical {
                    return Err(cfg_err("the gravity observer needs spherical gravity"));
                }
                positive("mu_m3_s2", &[self.forces.mu_m3_s2])?;
            }
            ScenarioKind::ForceObserver => present(self.observer.force.is_some(), "[pose.observer.force]")?,
            ScenarioKind::FiniteTimeObserver => present(self.observer.finite_time.is_some(), "[pose.observer.finite_time]")?,
            ScenarioKind::Attitude => unreachable!("checked by caller"),
        }
        if let Some(n) = &self.noise {
            finite("noise", &[n.freq_hz, n.attitude_deg, n.position_m, n.omega_deg_s, n.velocity_m_s])?;
        }
        Ok(())
    }
}

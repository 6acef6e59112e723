//! Sensor models: inertial direction sensors, rate gyros with constant bias,
//! bounded noise, and the first-order Butterworth pre-filter.
//!
//! Random draws come from counter-based ChaCha streams keyed by
//! `(seed, sensor_id, step)`, so a frame can be regenerated in any order and two
//! consumers of the same scenario see the same bits.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{GeoError, Result};
use crate::liegroup::{Mat3, Rotation, Vec3};
use crate::wahba::{BodyMeasurementSet, Mat3xK};

/// Stream id of the rate gyro. Direction sensors use their index.
pub const GYRO_SENSOR_ID: u64 = 1 << 20;

/// Words reserved per step in each stream. Rejection sampling uses far fewer.
const WORDS_PER_STEP: u128 = 4096;

/// Offset separating the fixed-phase streams from the per-step streams.
const PHASE_STREAM_OFFSET: u64 = 1 << 40;

/// Counter-based noise source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseSource {
    seed: u64,
}

impl NoiseSource {
    pub fn new(seed: u64) -> Self {
        NoiseSource { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Generator positioned at the start of `step` in the sensor's stream.
    pub fn rng(&self, sensor_id: u64, step: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(sensor_id);
        r.set_word_pos(step as u128 * WORDS_PER_STEP);
        r
    }

    /// Generator for quantities fixed over a whole run, such as sinusoid phases.
    pub fn fixed_rng(&self, sensor_id: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(PHASE_STREAM_OFFSET + sensor_id);
        r
    }
}

/// Draw from the density proportional to `exp(-1 / (1 - (x/hw)^2))` on `(-hw, hw)`.
pub fn bump_sample<R: Rng + ?Sized>(half_width: f64, rng: &mut R) -> f64 {
    if !(half_width > 0.0) {
        return 0.0;
    }
    loop {
        let x: f64 = rng.gen_range(-1.0..1.0);
        let y: f64 = rng.gen();
        // Envelope is the peak value exp(-1).
        if y < (1.0 - 1.0 / (1.0 - x * x)).exp() {
            return x * half_width;
        }
    }
}

/// Scalar noise family applied componentwise.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseKind {
    None,
    /// Independent bump-distributed components with the given half width.
    BumpBounded { half_width: f64 },
    /// `sum_k amps[k] sin(2 pi freqs_hz[k] t + phases[k][i])` on component `i`.
    /// Missing phases are drawn once per sensor from the run seed.
    SinusoidSum { freqs_hz: Vec<f64>, amps: Vec<f64>, phases: Option<Vec<[f64; 3]>> },
}

impl NoiseKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseKind::None => Ok(()),
            NoiseKind::BumpBounded { half_width } => {
                if *half_width >= 0.0 && half_width.is_finite() {
                    Ok(())
                } else {
                    Err(GeoError::Config(format!("bump half width {half_width} must be finite and non-negative")))
                }
            }
            NoiseKind::SinusoidSum { freqs_hz, amps, phases } => {
                if freqs_hz.len() != amps.len() {
                    return Err(GeoError::Config("sinusoid frequencies and amplitudes differ in length".into()));
                }
                if let Some(p) = phases {
                    if p.len() != freqs_hz.len() {
                        return Err(GeoError::Config("sinusoid phases and frequencies differ in length".into()));
                    }
                }
                Ok(())
            }
        }
    }

    /// Largest magnitude any component can take.
    pub fn bound(&self) -> f64 {
        match self {
            NoiseKind::None => 0.0,
            NoiseKind::BumpBounded { half_width } => *half_width,
            NoiseKind::SinusoidSum { amps, .. } => amps.iter().map(|a| a.abs()).sum(),
        }
    }

    /// Fills in missing sinusoid phases from the fixed stream of `sensor_id`.
    pub fn resolve_phases(&mut self, src: &NoiseSource, sensor_id: u64) {
        if let NoiseKind::SinusoidSum { freqs_hz, phases, .. } = self {
            if phases.is_none() {
                let mut r = src.fixed_rng(sensor_id);
                let p = (0..freqs_hz.len())
                    .map(|_| [0; 3].map(|_: i32| r.gen_range(0.0..2.0 * PI)))
                    .collect();
                *phases = Some(p);
            }
        }
    }

    /// One noise vector at time `t`.
    pub fn sample<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> Vec3 {
        match self {
            NoiseKind::None => Vec3::zeros(),
            NoiseKind::BumpBounded { half_width } => Vec3::new(
                bump_sample(*half_width, rng),
                bump_sample(*half_width, rng),
                bump_sample(*half_width, rng),
            ),
            NoiseKind::SinusoidSum { freqs_hz, amps, phases } => {
                let mut v = Vec3::zeros();
                for (k, (f, a)) in freqs_hz.iter().zip(amps).enumerate() {
                    for i in 0..3 {
                        let ph = phases.as_ref().map_or(2.0 * PI * i as f64 / 3.0, |p| p[k][i]);
                        v[i] += a * (2.0 * PI * f * t + ph).sin();
                    }
                }
                v
            }
        }
    }
}

/// Direction sensor error `D_j nu_j(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionNoiseModel {
    pub kind: NoiseKind,
    pub dj: Mat3,
}

impl DirectionNoiseModel {
    pub fn none() -> Self {
        DirectionNoiseModel { kind: NoiseKind::None, dj: Mat3::identity() }
    }

    /// Unit-half-width bump noise scaled by `level` on every component.
    pub fn bump(level: f64) -> Self {
        DirectionNoiseModel { kind: NoiseKind::BumpBounded { half_width: 1.0 }, dj: Mat3::identity() * level }
    }
}

/// Gyro error `B w(t) + beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct GyroNoiseModel {
    pub kind: NoiseKind,
    pub b: Mat3,
    pub bias: Vec3,
}

impl GyroNoiseModel {
    pub fn none() -> Self {
        GyroNoiseModel { kind: NoiseKind::None, b: Mat3::identity(), bias: Vec3::zeros() }
    }

    pub fn bump(level: f64) -> Self {
        GyroNoiseModel { kind: NoiseKind::BumpBounded { half_width: 1.0 }, b: Mat3::identity() * level, bias: Vec3::zeros() }
    }

    pub fn with_bias(mut self, bias: Vec3) -> Self {
        self.bias = bias;
        self
    }
}

/// Measurements available at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementFrame {
    pub t: f64,
    /// Measured directions for the active sensors, augmented when two are active.
    pub um: BodyMeasurementSet,
    pub omega_m: Vec3,
    /// Indices into the full direction table, in column order of `um`.
    pub active_sensor_ids: Vec<usize>,
}

impl MeasurementFrame {
    /// Number of measured directions, excluding a synthetic cross-product column.
    pub fn raw_count(&self) -> usize {
        self.active_sensor_ids.len()
    }

    /// Measured direction `j`, `j < raw_count()`.
    pub fn direction(&self, j: usize) -> Vec3 {
        self.um.matrix().column(j).into_owned()
    }
}

/// `u_j = R^T e_j + D_j nu_j(t)` for every column of `e`.
///
/// `sensor_ids[j]` selects the noise stream and model of column `j`.
pub fn measure_directions(
    r: &Rotation,
    e: &Mat3xK,
    sensor_ids: &[usize],
    noise: &[DirectionNoiseModel],
    t: f64,
    step: u64,
    src: &NoiseSource,
) -> Result<BodyMeasurementSet> {
    if sensor_ids.len() != e.ncols() {
        return Err(GeoError::DimensionMismatch(format!("{} sensor ids for {} directions", sensor_ids.len(), e.ncols())));
    }
    let mut u = r.matrix().transpose() * e;
    for (j, &id) in sensor_ids.iter().enumerate() {
        let model = noise.get(id).ok_or_else(|| GeoError::DimensionMismatch(format!("no noise model for sensor {id}")))?;
        if model.kind != NoiseKind::None {
            let mut rng = src.rng(id as u64, step);
            let nu = model.kind.sample(t, &mut rng);
            let mut c = u.column_mut(j);
            c += model.dj * nu;
        }
    }
    Ok(BodyMeasurementSet::new(u))
}

/// `Omega_m = Omega + B w(t) + beta`.
pub fn measure_gyro(omega: &Vec3, noise: &GyroNoiseModel, t: f64, step: u64, src: &NoiseSource) -> Vec3 {
    let w = match noise.kind {
        NoiseKind::None => Vec3::zeros(),
        _ => {
            let mut rng = src.rng(GYRO_SENSOR_ID, step);
            noise.b * noise.kind.sample(t, &mut rng)
        }
    };
    omega + w + noise.bias
}

/// Which direction sensors report over time: `(start time, ids)` segments.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorSchedule {
    segments: Vec<(f64, Vec<usize>)>,
}

impl SensorSchedule {
    pub fn always(ids: Vec<usize>) -> Self {
        SensorSchedule { segments: vec![(f64::NEG_INFINITY, ids)] }
    }

    /// Segments must have increasing start times.
    pub fn new(mut segments: Vec<(f64, Vec<usize>)>) -> Result<Self> {
        if segments.is_empty() {
            return Err(GeoError::Config("sensor schedule is empty".into()));
        }
        if segments.windows(2).any(|w| !(w[0].0 < w[1].0)) {
            return Err(GeoError::Config("sensor schedule start times must increase".into()));
        }
        segments[0].0 = f64::NEG_INFINITY;
        Ok(SensorSchedule { segments })
    }

    /// Active ids at time `t`. Small negative rounding in `t` does not switch segments early.
    pub fn active(&self, t: f64) -> &[usize] {
        let t = t + 1e-9;
        let i = self.segments.iter().rposition(|(s, _)| *s <= t).unwrap_or(0);
        &self.segments[i].1
    }
}

/// Generates frames from a truth trajectory.
#[derive(Debug, Clone)]
pub struct MeasurementGenerator {
    e_all: Mat3xK,
    direction_noise: Vec<DirectionNoiseModel>,
    gyro_noise: GyroNoiseModel,
    schedule: SensorSchedule,
    src: NoiseSource,
}

impl MeasurementGenerator {
    pub fn new(
        e_all: Mat3xK,
        mut direction_noise: Vec<DirectionNoiseModel>,
        mut gyro_noise: GyroNoiseModel,
        schedule: SensorSchedule,
        seed: u64,
    ) -> Result<Self> {
        if direction_noise.len() != e_all.ncols() {
            return Err(GeoError::Config(format!(
                "{} direction noise models for {} sensors",
                direction_noise.len(),
                e_all.ncols()
            )));
        }
        let src = NoiseSource::new(seed);
        for (id, m) in direction_noise.iter_mut().enumerate() {
            m.kind.validate()?;
            m.kind.resolve_phases(&src, id as u64);
        }
        gyro_noise.kind.validate()?;
        gyro_noise.kind.resolve_phases(&src, GYRO_SENSOR_ID);
        for seg in &schedule.segments {
            if seg.1.len() < 2 {
                return Err(GeoError::Config("at least two directions must be active at all times".into()));
            }
            if let Some(&bad) = seg.1.iter().find(|&&i| i >= e_all.ncols()) {
                return Err(GeoError::Config(format!("schedule references unknown sensor {bad}")));
            }
        }
        Ok(MeasurementGenerator { e_all, direction_noise, gyro_noise, schedule, src })
    }

    pub fn directions(&self) -> &Mat3xK {
        &self.e_all
    }

    pub fn schedule(&self) -> &SensorSchedule {
        &self.schedule
    }

    pub fn direction_noise(&self) -> &[DirectionNoiseModel] {
        &self.direction_noise
    }

    pub fn gyro_noise(&self) -> &GyroNoiseModel {
        &self.gyro_noise
    }

    /// Inertial directions for a subset of sensors.
    pub fn active_directions(&self, ids: &[usize]) -> Mat3xK {
        Mat3xK::from_columns(&ids.iter().map(|&i| self.e_all.column(i).into_owned()).collect::<Vec<_>>())
    }

    pub fn frame(&self, step: u64, t: f64, r: &Rotation, omega: &Vec3) -> Result<MeasurementFrame> {
        let ids = self.schedule.active(t).to_vec();
        let e = self.active_directions(&ids);
        let um = measure_directions(r, &e, &ids, &self.direction_noise, t, step, &self.src)?;
        let omega_m = measure_gyro(omega, &self.gyro_noise, t, step, &self.src);
        Ok(MeasurementFrame { t, um, omega_m, active_sensor_ids: ids })
    }
}

/// Filter state for `(2 + h) xbar_{k+1} = (2 - h) xbar_k + h (x_k + x_{k+1})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ButterworthState {
    pub xbar: Vec3,
    pub h: f64,
}

/// One step of the recurrence. Unit DC gain; the cutoff is 1 rad/s in units of `1/h`.
pub fn butterworth_step(state: &ButterworthState, xm_k: &Vec3, xm_k1: &Vec3) -> Vec3 {
    let h = state.h;
    (state.xbar * (2.0 - h) + (xm_k + xm_k1) * h) / (2.0 + h)
}

/// Streaming wrapper that starts at the first input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ButterworthFilter {
    state: Option<(ButterworthState, Vec3)>,
    h: f64,
}

impl ButterworthFilter {
    pub fn new(h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(GeoError::Config(format!("butterworth step {h} must be positive")));
        }
        Ok(ButterworthFilter { state: None, h })
    }

    pub fn filter(&mut self, xm: &Vec3) -> Vec3 {
        match &mut self.state {
            None => {
                self.state = Some((ButterworthState { xbar: *xm, h: self.h }, *xm));
                *xm
            }
            Some((st, last)) => {
                st.xbar = butterworth_step(st, last, xm);
                *last = *xm;
                st.xbar
            }
        }
    }
}

/// One row of an IMU log: body-frame accelerometer, magnetometer and gyro readings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    pub t: f64,
    pub accel: Vec3,
    pub mag: Vec3,
    pub gyro: Vec3,
}

const IMU_HEADER: [&str; 10] = ["t", "ax", "ay", "az", "mx", "my", "mz", "gx", "gy", "gz"];

/// Parses `t,ax,ay,az,mx,my,mz,gx,gy,gz`. Empty cells repeat the sensor's last reading.
pub fn parse_imu_csv(text: &str) -> Result<Vec<ImuSample>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(GeoError::Parse { line: 1, message: "empty file".into() })?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let mut pos = [0usize; 10];
    for (k, name) in IMU_HEADER.iter().enumerate() {
        pos[k] = cols.iter().position(|c| c == name).ok_or_else(|| GeoError::Parse {
            line: 1,
            message: format!("missing column `{name}`"),
        })?;
    }
    let mut out: Vec<ImuSample> = Vec::new();
    let mut last: [Option<f64>; 10] = [None; 10];
    for (i, line) in lines {
        let lineno = i + 1;
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let mut v = [0.0; 10];
        for k in 0..10 {
            let cell = cells.get(pos[k]).copied().unwrap_or("");
            v[k] = if cell.is_empty() {
                last[k].ok_or_else(|| GeoError::Parse { line: lineno, message: format!("no value yet for `{}`", IMU_HEADER[k]) })?
            } else {
                cell.parse::<f64>().map_err(|e| GeoError::Parse {
                    line: lineno,
                    message: format!("column `{}`: {e}", IMU_HEADER[k]),
                })?
            };
            if !v[k].is_finite() {
                return Err(GeoError::Parse { line: lineno, message: format!("non-finite `{}`", IMU_HEADER[k]) });
            }
            last[k] = Some(v[k]);
        }
        if let Some(prev) = out.last() {
            if !(v[0] > prev.t) {
                return Err(GeoError::NonMonotoneTimestamps { line: lineno });
            }
        }
        out.push(ImuSample {
            t: v[0],
            accel: Vec3::new(v[1], v[2], v[3]),
            mag: Vec3::new(v[4], v[5], v[6]),
            gyro: Vec3::new(v[7], v[8], v[9]),
        });
    }
    Ok(out)
}

//! Browser bindings for the demo page in `www/`.
//!
//! Each export is a thin wrapper over a plain Rust function so the logic can
//! be tested natively; only the wrappers touch `JsError`.

use geoest::harness::{render_svg_string, results_csv_string, run_scenario, scenarios};
use geoest::liegroup::{exp_so3, log_so3, principal_angle, Mat3, Vec3};
use geoest::wahba::{critical_points, KMatrix};
use wasm_bindgen::prelude::*;

/// CSV and SVG from one scenario run.
#[wasm_bindgen]
pub struct RunOutput {
    csv: String,
    svg: String,
}

#[wasm_bindgen]
impl RunOutput {
    #[wasm_bindgen(getter)]
    pub fn csv(&self) -> String {
        self.csv.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn svg(&self) -> String {
        self.svg.clone()
    }
}

/// Shipped scenario names, one per line.
#[wasm_bindgen]
pub fn scenario_names() -> String {
    scenarios::names().collect::<Vec<_>>().join("\n")
}

pub fn run_named(name: &str, seed: u64, duration_s: f64) -> Result<RunOutput, String> {
    let mut s = scenarios::shipped(name).map_err(|e| e.to_string())?;
    s.seed = seed;
    if duration_s > 0.0 {
        s.duration_s = duration_s;
    }
    let result = run_scenario(&s).map_err(|e| e.to_string())?;
    let csv = results_csv_string(&result).map_err(|e| e.to_string())?;
    Ok(RunOutput { csv, svg: render_svg_string(&result) })
}

/// Runs a shipped scenario. A non-positive duration keeps the scenario's own.
#[wasm_bindgen]
pub fn run_shipped(name: &str, seed: u64, duration_s: f64) -> Result<RunOutput, JsError> {
    run_named(name, seed, duration_s).map_err(|e| JsError::new(&e))
}

/// `[R (row-major, 9), log R (3), principal angle]` for the rotation vector `(x, y, z)`.
pub fn so3_round_trip(x: f64, y: f64, z: f64) -> Result<Vec<f64>, String> {
    let r = exp_so3(&Vec3::new(x, y, z));
    let back = log_so3(&r).map_err(|e| e.to_string())?;
    let m = r.matrix();
    let mut out: Vec<f64> = (0..3).flat_map(|i| (0..3).map(move |j| m[(i, j)])).collect();
    out.extend(back.iter());
    out.push(principal_angle(&r));
    Ok(out)
}

#[wasm_bindgen]
pub fn rotation_round_trip(x: f64, y: f64, z: f64) -> Result<Vec<f64>, JsError> {
    so3_round_trip(x, y, z).map_err(|e| JsError::new(&e))
}

/// Cost `tr((I - Q) K)` at the four critical points of `K = diag(d1, d2, d3)`,
/// ordered by Morse index.
pub fn critical_costs(d1: f64, d2: f64, d3: f64) -> Result<Vec<f64>, String> {
    let k = KMatrix::new(Mat3::from_diagonal(&Vec3::new(d1, d2, d3))).map_err(|e| e.to_string())?;
    let cps = critical_points(&k).map_err(|e| e.to_string())?;
    Ok(cps.iter().map(|c| ((Mat3::identity() - c.q.matrix()) * k.matrix()).trace()).collect())
}

#[wasm_bindgen]
pub fn morse_critical_costs(d1: f64, d2: f64, d3: f64) -> Result<Vec<f64>, JsError> {
    critical_costs(d1, d2, d3).map_err(|e| JsError::new(&e))
}

//! Scenario configuration, runs, metrics, benchmarking, export and log replay.
//!
//! A scenario generates its truth trajectory and measurement stream once;
//! every configured filter then consumes the same frames. Only the filter
//! update loop is timed.

pub mod attitude;
pub mod bench;
pub mod config;
pub mod export;
pub mod pose;
pub mod replay;
pub mod result;
pub mod scenarios;

pub use bench::{compare_filters, BenchmarkReport, FilterTiming};
pub use config::{Scenario, ScenarioKind};
pub use export::{export_csv, parse_results_csv, render_svg, render_svg_string, results_csv_string, CsvRow};
pub use replay::{replay_imu, ReplayOutput, ReplaySettings};
pub use result::{metric_principal_angle, metric_series, Flag, FilterSeries, RunResult, Sample};

use crate::error::Result;

/// Elapsed-seconds closure. Browsers have no monotonic `Instant`, so the
/// wasm build reports zero.
#[cfg(not(target_arch = "wasm32"))]
pub(crate) fn stopwatch() -> impl Fn() -> f64 {
    let t0 = std::time::Instant::now();
    move || t0.elapsed().as_secs_f64()
}

#[cfg(target_arch = "wasm32")]
pub(crate) fn stopwatch() -> impl Fn() -> f64 {
    || 0.0
}

/// Runs a validated scenario. Filter failures are recorded in the series, not returned.
pub fn run_scenario(s: &Scenario) -> Result<RunResult> {
    s.validate()?;
    let series = match s.kind {
        ScenarioKind::Attitude => attitude::run(s)?,
        _ => pose::run(s)?,
    };
    Ok(RunResult { scenario: s.name.clone(), series })
}

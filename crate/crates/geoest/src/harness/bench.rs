//! Runtime comparison of filters on a shared measurement stream.

use std::io::Write;

use super::attitude::{self, AttitudeFilter, FilterState};
use super::config::{Scenario, ScenarioKind};
use super::pose;
use crate::error::{GeoError, Result};

/// Timing of one filter over several repeats.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterTiming {
    pub filter: String,
    /// Total update time of each repeat, s.
    pub totals_s: Vec<f64>,
    pub mean_total_s: f64,
    /// Mean and 95th percentile of a single update over all repeats, s.
    pub per_step_mean_s: f64,
    pub per_step_p95_s: f64,
    /// Relative spread `(max - min) / mean` of the totals.
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub scenario: String,
    pub repeats: usize,
    pub timings: Vec<FilterTiming>,
    /// Filter names, fastest first.
    pub ordering: Vec<String>,
}

impl BenchmarkReport {
    pub fn timing(&self, filter: &str) -> Option<&FilterTiming> {
        self.timings.iter().find(|t| t.filter == filter)
    }

    /// Rank of `filter` in the ordering, 0 for the fastest.
    pub fn rank(&self, filter: &str) -> Option<usize> {
        self.ordering.iter().position(|f| f == filter)
    }
}

fn summarize(filter: String, totals_s: Vec<f64>, mut steps: Vec<f64>) -> FilterTiming {
    let mean_total_s = totals_s.iter().sum::<f64>() / totals_s.len().max(1) as f64;
    let (lo, hi) = totals_s.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    steps.sort_by(f64::total_cmp);
    let per_step_mean_s = steps.iter().sum::<f64>() / steps.len().max(1) as f64;
    let p95 = if steps.is_empty() { 0.0 } else { steps[((steps.len() - 1) as f64 * 0.95).round() as usize] };
    let spread = if mean_total_s > 0.0 { (hi - lo) / mean_total_s } else { 0.0 };
    FilterTiming { filter, totals_s, mean_total_s, per_step_mean_s, per_step_p95_s: p95, spread }
}

fn ordering(timings: &[FilterTiming]) -> Vec<String> {
    let mut idx: Vec<usize> = (0..timings.len()).collect();
    idx.sort_by(|&a, &b| timings[a].mean_total_s.total_cmp(&timings[b].mean_total_s));
    idx.into_iter().map(|i| timings[i].filter.clone()).collect()
}

/// Times every filter of a scenario over `repeats` runs. Truth and
/// measurements are generated once, outside all timing.
pub fn benchmark_scenario(s: &Scenario, repeats: usize) -> Result<BenchmarkReport> {
    if repeats == 0 {
        return Err(GeoError::Config("repeats must be at least 1".into()));
    }
    let timings = match s.kind {
        ScenarioKind::Attitude => {
            let setup = attitude::prepare(s)?;
            let filters = attitude::configure_filters(s, &setup)?;
            let mut out = Vec::new();
            for f in &filters {
                let mut totals = Vec::with_capacity(repeats);
                let mut steps = Vec::new();
                for _ in 0..repeats {
                    let mut filter = f.filter.clone();
                    let run = attitude::run_loop(&mut filter, f.init, &setup.frames);
                    totals.push(run.step_times_s.iter().sum());
                    steps.extend(run.step_times_s);
                }
                out.push(summarize(f.name.clone(), totals, steps));
            }
            out
        }
        _ => {
            let setup = pose::prepare(s)?;
            let mut totals = Vec::with_capacity(repeats);
            for _ in 0..repeats {
                totals.push(pose::run_setup(&setup)?.wall_clock_s);
            }
            let n = setup.measurements.len().saturating_sub(1).max(1) as f64;
            let steps = totals.iter().map(|t| t / n).collect();
            vec![summarize(pose::observer_name(&setup.observer).to_string(), totals, steps)]
        }
    };
    let ordering = ordering(&timings);
    Ok(BenchmarkReport { scenario: s.name.clone(), repeats, timings, ordering })
}

/// Runtime comparison; needs at least two filters.
pub fn compare_filters(s: &Scenario, repeats: usize) -> Result<BenchmarkReport> {
    let n = match (&s.kind, &s.attitude) {
        (ScenarioKind::Attitude, Some(a)) => a.filters.len(),
        _ => 1,
    };
    if n < 2 {
        return Err(GeoError::Config(format!("comparison needs at least two filters, scenario `{}` has {n}", s.name)));
    }
    benchmark_scenario(s, repeats)
}

/// Total time of a loop whose filter does nothing, over the scenario's frames.
pub fn time_noop(s: &Scenario) -> Result<f64> {
    let setup = attitude::prepare(s)?;
    let init = FilterState::Cgo(crate::baselines::CgoState { rhat: setup.rhat0, t: 0.0 });
    let run = attitude::run_loop(&mut AttitudeFilter::Noop, init, &setup.frames);
    Ok(run.step_times_s.iter().sum())
}

pub const BENCH_HEADER: [&str; 7] =
    ["scenario", "filter", "repeats", "mean_total_s", "per_step_mean_s", "per_step_p95_s", "rank"];

pub fn write_benchmark_csv<W: Write>(reports: &[BenchmarkReport], out: W) -> Result<()> {
    let io = |e: csv::Error| GeoError::Io(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BENCH_HEADER).map_err(io)?;
    for r in reports {
        for t in &r.timings {
            w.write_record([
                r.scenario.clone(),
                t.filter.clone(),
                r.repeats.to_string(),
                t.mean_total_s.to_string(),
                t.per_step_mean_s.to_string(),
                t.per_step_p95_s.to_string(),
                r.rank(&t.filter).unwrap_or(0).to_string(),
            ])
            .map_err(io)?;
        }
    }
    w.flush().map_err(|e| GeoError::Io(e.to_string()))
}

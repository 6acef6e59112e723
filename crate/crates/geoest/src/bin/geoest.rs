//! Command-line front end: simulate, compare, bench, replay.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use geoest::harness::bench::{benchmark_scenario, compare_filters, write_benchmark_csv, BenchmarkReport};
use geoest::harness::export::{export_csv, parse_trajectory_csv, render_svg, write_trajectory_csv};
use geoest::harness::replay::{replay_imu, score_replay, ReplaySettings};
use geoest::harness::{run_scenario, scenarios, RunResult, Scenario};
use geoest::GeoError;

#[derive(Parser)]
#[command(name = "geoest", version, about = "Geometric attitude and pose estimators: simulation, comparison, replay")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Svg,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file, or a shipped scenario by name, and write its results.
    Simulate {
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Time every filter of a scenario and report the runtime ordering.
    Compare {
        scenario: String,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time all shipped scenarios and write a benchmark CSV.
    Bench {
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the variational estimator over an IMU log.
    Replay {
        imu: PathBuf,
        /// TOML file overriding replay settings.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Truth trajectory CSV with the same timestamps; enables error metrics.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// List shipped scenarios.
    List,
}

/// Process exit status for an error.
fn exit_code(e: &GeoError) -> u8 {
    match e {
        GeoError::Config(_) | GeoError::DimensionMismatch(_) | GeoError::DegenerateEigenvalues(_) => 2,
        GeoError::Io(_) | GeoError::Parse { .. } | GeoError::NonMonotoneTimestamps { .. } => 3,
        _ => 4,
    }
}

fn load(spec: &str) -> Result<Scenario, GeoError> {
    let path = Path::new(spec);
    if path.exists() {
        Scenario::from_file(path)
    } else if scenarios::names().any(|n| n == spec) {
        scenarios::shipped(spec)
    } else {
        Err(GeoError::Io(format!("no scenario file `{spec}` and no shipped scenario of that name")))
    }
}

fn out_dir(out: Option<PathBuf>, s: Option<&Scenario>) -> Result<PathBuf, GeoError> {
    let dir = out.or_else(|| s.and_then(|s| s.output_dir.clone()).map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_result(result: &RunResult, dir: &Path, name: &str, format: Format) -> Result<(), GeoError> {
    if format != Format::Svg {
        let p = dir.join(format!("{name}.csv"));
        export_csv(result, &p)?;
        println!("wrote {}", p.display());
    }
    if format != Format::Csv {
        let p = dir.join(format!("{name}.svg"));
        render_svg(result, &p)?;
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn summarize(result: &RunResult) {
    for s in &result.series {
        let last = s.last();
        match (&s.singular_at, last) {
            (Some(t), _) => println!("{:<22} singular at t = {t} s: {}", s.filter, s.error.as_deref().unwrap_or("")),
            (None, Some(x)) => println!(
                "{:<22} final phi = {:.3e} rad, |omega err| = {:.3e} rad/s, update time {:.4} s",
                s.filter, x.phi, x.omega_err, s.wall_clock_s
            ),
            (None, None) => println!("{:<22} no samples", s.filter),
        }
    }
}

fn print_report(r: &BenchmarkReport) {
    println!("{} ({} repeats), fastest first:", r.scenario, r.repeats);
    for name in &r.ordering {
        let t = r.timing(name).expect("ordering lists timed filters");
        println!(
            "  {:<22} total {:.4} s  per step {:.3e} s (p95 {:.3e} s)  spread {:.1}%",
            name,
            t.mean_total_s,
            t.per_step_mean_s,
            t.per_step_p95_s,
            100.0 * t.spread
        );
    }
}

fn run(cli: Cli) -> Result<ExitCode, GeoError> {
    match cli.command {
        Command::Simulate { scenario, seed, out, format } => {
            let mut s = load(&scenario)?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            let result = run_scenario(&s)?;
            summarize(&result);
            let dir = out_dir(out, Some(&s))?;
            write_result(&result, &dir, &s.name, format)?;
            if result.all_failed() {
                eprintln!("every filter failed");
                return Ok(ExitCode::from(4));
            }
        }
        Command::Compare { scenario, repeats, seed, out } => {
            let mut s = load(&scenario)?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            let report = compare_filters(&s, repeats)?;
            print_report(&report);
            let dir = out_dir(out, Some(&s))?;
            let p = dir.join(format!("{}_compare.csv", s.name));
            write_benchmark_csv(&[report], std::fs::File::create(&p)?)?;
            println!("wrote {}", p.display());
        }
        Command::Bench { repeats, out } => {
            let mut reports = Vec::new();
            for name in scenarios::names() {
                let report = benchmark_scenario(&scenarios::shipped(name)?, repeats)?;
                print_report(&report);
                reports.push(report);
            }
            let dir = out_dir(out, None)?;
            let p = dir.join("bench.csv");
            write_benchmark_csv(&reports, std::fs::File::create(&p)?)?;
            println!("wrote {}", p.display());
        }
        Command::Replay { imu, scenario, truth, out, format } => {
            let settings = match scenario {
                Some(p) => ReplaySettings::from_toml_str(&std::fs::read_to_string(p)?)?,
                None => ReplaySettings::default(),
            };
            let output = replay_imu(&imu, &settings)?;
            let dir = out_dir(out, None)?;
            let stem = imu.file_stem().and_then(|s| s.to_str()).unwrap_or("imu").to_string();
            let p = dir.join(format!("{stem}_estimate.csv"));
            write_trajectory_csv(&output.trajectory, std::fs::File::create(&p)?)?;
            println!("wrote {} ({} samples, {:.4} s)", p.display(), output.trajectory.len(), output.wall_clock_s);
            if let Some(tp) = truth {
                let rows = parse_trajectory_csv(&std::fs::read_to_string(tp)?)?;
                let result = score_replay(&output, &rows)?;
                summarize(&result);
                write_result(&result, &dir, &format!("{stem}_errors"), format)?;
            }
        }
        Command::List => {
            for (name, text) in scenarios::SHIPPED {
                let s = Scenario::from_toml_str(text)?;
                println!("{name:<24} {}", s.description);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

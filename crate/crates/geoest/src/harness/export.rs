//! CSV and SVG output.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use super::result::{Flag, RunResult};
use crate::error::{GeoError, Result};
use crate::liegroup::{Rotation, Vec3};

pub const RESULTS_HEADER: [&str; 9] =
    ["t", "filter", "phi_rad", "omega_err_norm", "beta_err_x", "beta_err_y", "beta_err_z", "mu_err", "flag"];

pub const TRAJECTORY_HEADER: [&str; 19] = [
    "t", "r11", "r12", "r13", "r21", "r22", "r23", "r31", "r32", "r33", "bx", "by", "bz", "wx", "wy", "wz", "vx", "vy",
    "vz",
];

/// One line of the results CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub t: f64,
    pub filter: String,
    pub phi_rad: f64,
    pub omega_err_norm: f64,
    pub beta_err: [f64; 3],
    pub mu_err: f64,
    pub flag: Flag,
}

impl CsvRow {
    /// Equality that treats NaN as equal to NaN, for round-trip checks.
    pub fn same_as(&self, other: &CsvRow) -> bool {
        let eq = |a: f64, b: f64| a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan());
        eq(self.t, other.t)
            && self.filter == other.filter
            && eq(self.phi_rad, other.phi_rad)
            && eq(self.omega_err_norm, other.omega_err_norm)
            && (0..3).all(|i| eq(self.beta_err[i], other.beta_err[i]))
            && eq(self.mu_err, other.mu_err)
            && self.flag == other.flag
    }
}

fn io_err(e: impl std::fmt::Display) -> GeoError {
    GeoError::Io(e.to_string())
}

impl RunResult {
    /// Rows in output order: filters in configuration order, time ascending.
    pub fn csv_rows(&self) -> Vec<CsvRow> {
        self.series
            .iter()
            .flat_map(|s| {
                s.samples.iter().map(move |x| CsvRow {
                    t: x.t,
                    filter: s.filter.clone(),
                    phi_rad: x.phi,
                    omega_err_norm: x.omega_err,
                    beta_err: [x.beta_err.x, x.beta_err.y, x.beta_err.z],
                    mu_err: x.mu_err,
                    flag: x.flag,
                })
            })
            .collect()
    }
}

/// Writes the results CSV. Numbers use the shortest text that parses back exactly.
pub fn write_results_csv<W: Write>(result: &RunResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER).map_err(io_err)?;
    for r in result.csv_rows() {
        w.write_record([
            r.t.to_string(),
            r.filter,
            r.phi_rad.to_string(),
            r.omega_err_norm.to_string(),
            r.beta_err[0].to_string(),
            r.beta_err[1].to_string(),
            r.beta_err[2].to_string(),
            r.mu_err.to_string(),
            r.flag.as_str().to_string(),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn results_csv_string(result: &RunResult) -> Result<String> {
    let mut buf = Vec::new();
    write_results_csv(result, &mut buf)?;
    String::from_utf8(buf).map_err(io_err)
}

pub fn export_csv(result: &RunResult, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_results_csv(result, std::io::BufWriter::new(f))
}

fn parse_f64(s: &str, line: usize, col: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| GeoError::Parse { line, message: format!("column `{col}`: {e}") })
}

/// Parses a results CSV back into rows.
pub fn parse_results_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| GeoError::Parse { line: 1, message: e.to_string() })?;
    if header.iter().ne(RESULTS_HEADER) {
        return Err(GeoError::Parse { line: 1, message: format!("unexpected header {header:?}") });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| GeoError::Parse { line, message: e.to_string() })?;
        let f = |k: usize| parse_f64(&rec[k], line, RESULTS_HEADER[k]);
        rows.push(CsvRow {
            t: f(0)?,
            filter: rec[1].to_string(),
            phi_rad: f(2)?,
            omega_err_norm: f(3)?,
            beta_err: [f(4)?, f(5)?, f(6)?],
            mu_err: f(7)?,
            flag: Flag::parse(&rec[8]).ok_or_else(|| GeoError::Parse { line, message: format!("bad flag `{}`", &rec[8]) })?,
        });
    }
    Ok(rows)
}

/// A pose-and-velocity trajectory row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub r: Rotation,
    pub b: Vec3,
    pub omega: Vec3,
    pub v: Vec3,
}

pub fn write_trajectory_csv<W: Write>(rows: &[TrajectoryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_HEADER).map_err(io_err)?;
    for r in rows {
        let m = r.r.matrix();
        let mut rec = vec![r.t.to_string()];
        for i in 0..3 {
            for j in 0..3 {
                rec.push(m[(i, j)].to_string());
            }
        }
        for v in [&r.b, &r.omega, &r.v] {
            rec.extend(v.iter().map(|x| x.to_string()));
        }
        w.write_record(&rec).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn parse_trajectory_csv(text: &str) -> Result<Vec<TrajectoryRow>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| GeoError::Parse { line: 1, message: e.to_string() })?;
    if header.iter().ne(TRAJECTORY_HEADER) {
        return Err(GeoError::Parse { line: 1, message: format!("unexpected header {header:?}") });
    }
    let mut out: Vec<TrajectoryRow> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| GeoError::Parse { line, message: e.to_string() })?;
        let mut v = [0.0; 19];
        for (k, x) in v.iter_mut().enumerate() {
            *x = parse_f64(rec.get(k).unwrap_or(""), line, TRAJECTORY_HEADER[k])?;
        }
        let r = Rotation::from_matrix(crate::liegroup::Mat3::from_row_slice(&v[1..10]))
            .map_err(|e| GeoError::Parse { line, message: e.to_string() })?;
        if let Some(prev) = out.last() {
            if !(v[0] > prev.t) {
                return Err(GeoError::NonMonotoneTimestamps { line });
            }
        }
        out.push(TrajectoryRow {
            t: v[0],
            r,
            b: Vec3::new(v[10], v[11], v[12]),
            omega: Vec3::new(v[13], v[14], v[15]),
            v: Vec3::new(v[16], v[17], v[18]),
        });
    }
    Ok(out)
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Line chart of the attitude error in degrees against time, one line per filter.
pub fn render_svg_string(result: &RunResult) -> String {
    let (w, h) = (800.0, 480.0);
    let (ml, mr, mt, mb) = (70.0, 150.0, 40.0, 50.0);
    let pw = w - ml - mr;
    let ph = h - mt - mb;
    let finite = |x: &f64| x.is_finite();
    let t_max = result.series.iter().flat_map(|s| s.samples.iter().map(|x| x.t)).filter(finite).fold(0.0, f64::max);
    let y_max = result
        .series
        .iter()
        .flat_map(|s| s.samples.iter().map(|x| x.phi.to_degrees()))
        .filter(finite)
        .fold(0.0, f64::max);
    let t_max = if t_max > 0.0 { t_max } else { 1.0 };
    let y_max = if y_max > 0.0 { y_max * 1.05 } else { 1.0 };
    let sx = |t: f64| ml + pw * t / t_max;
    let sy = |y: f64| mt + ph * (1.0 - y / y_max);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, ml + pw / 2.0, escape(&result.scenario));
    let _ = writeln!(
        s,
        r#"<path d="M{ml},{mt} V{} H{}" fill="none" stroke="black"/>"#,
        mt + ph,
        ml + pw
    );
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let (tx, yv) = (t_max * f, y_max * f);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{:.3}</text>"#, sx(tx), mt + ph + 18.0, tx);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3}</text>"#, ml - 6.0, sy(yv) + 4.0, yv);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">t (s)</text>"#, ml + pw / 2.0, h - 10.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">principal angle (deg)</text>"#,
        mt + ph / 2.0,
        mt + ph / 2.0
    );
    for (i, series) in result.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let stride = (series.samples.len() / 2000).max(1);
        let mut d = String::new();
        let mut pen_down = false;
        for x in series.samples.iter().step_by(stride) {
            let y = x.phi.to_degrees();
            if !y.is_finite() {
                pen_down = false;
                continue;
            }
            let _ = write!(d, "{}{:.2},{:.2} ", if pen_down { "L" } else { "M" }, sx(x.t), sy(y));
            pen_down = true;
        }
        if !d.is_empty() {
            let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, d.trim_end());
        }
        let ly = mt + 16.0 * i as f64 + 8.0;
        let lx = ml + pw + 14.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let label = if series.singular() { format!("{} (singular)", series.filter) } else { series.filter.clone() };
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&label));
    }
    s.push_str("</svg>\n");
    s
}

pub fn render_svg(result: &RunResult, path: &Path) -> Result<()> {
    std::fs::write(path, render_svg_string(result))?;
    Ok(())
}

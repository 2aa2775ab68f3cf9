//! Artifact writers. All files start with a format version; floats are
//! written in shortest round-trip form, so identical runs produce
//! byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use loopsim_core::compiler::{emit_timing_chart, DriverRow, Schedule};
use loopsim_core::gaussian::EllipseSummary;
use nalgebra::{Matrix2, Vector2};
use serde_json::{json, Value};

pub const FORMAT_VERSION: u32 = 1;

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Pretty JSON with a version stamp folded into the top-level object.
pub fn write_json(path: &Path, value: &Value) -> Result<PathBuf> {
    let mut value = value.clone();
    if let Value::Object(map) = &mut value {
        map.insert("format_version".into(), json!(FORMAT_VERSION));
    }
    let text = serde_json::to_string_pretty(&value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(path.to_path_buf())
}

/// CSV with a leading version comment and a header row.
pub fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<PathBuf> {
    let mut text = format!("# format_version={FORMAT_VERSION}\n{header}\n");
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path.to_path_buf())
}

pub fn json_vec2(v: &Vector2<f64>) -> Value {
    json!([v[0], v[1]])
}

pub fn json_mat2(m: &Matrix2<f64>) -> Value {
    json!([[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]])
}

pub fn json_ellipse(e: &EllipseSummary) -> Value {
    json!({
        "mean_x": e.mean_x,
        "mean_p": e.mean_p,
        "major_variance": e.major_variance,
        "minor_variance": e.minor_variance,
        "tilt_deg": e.tilt_deg,
    })
}

/// Reflectivity as the percentage the driver display shows.
pub fn percent(reflectivity: f64) -> i64 {
    (reflectivity * 100.0).round() as i64
}

pub fn driver_header() -> String {
    format!(
        "{:<16} {:>4} {:>9} {:>9} {:>9}",
        "gate", "R", "theta1", "theta2", "gain"
    )
}

/// One driver row in the style of the gate-parameter table: quantized
/// reflectivity in percent, phases in degrees, gain in dB.
pub fn driver_line(row: &DriverRow) -> String {
    format!(
        "{:<16} {:>3}% {:>8.1}d {:>8.1}d {:>7.1}dB",
        row.gate,
        percent(row.reflectivity_driver),
        row.theta1_deg,
        row.theta2_deg,
        row.gain_db_driver
    )
}

/// Schedule artifact: bins, driver table, timing chart.
pub fn write_schedule(dir: &Path, schedule: &Schedule, rows: &[DriverRow]) -> Result<Vec<PathBuf>> {
    let schedule_json = json!({
        "bin_ns": schedule.bin_ns,
        "total_ns": schedule.total_ns(),
        "n_gate_bins": schedule.n_gate_bins(),
        "bins": serde_json::to_value(&schedule.bins)?,
        "driver": serde_json::to_value(rows)?,
    });
    let mut written = vec![write_json(&dir.join("schedule.json"), &schedule_json)?];
    let events = emit_timing_chart(schedule);
    let lines: Vec<String> = events
        .iter()
        .map(|e| format!("{},{},{},{}", e.t_ns, e.component, e.value, e.unit))
        .collect();
    written.push(write_csv(
        &dir.join("timing.csv"),
        "t_ns,component,value,unit",
        &lines,
    )?);
    Ok(written)
}

/// Ellipse contour polyline for plotting, one standard deviation.
pub fn write_contour(path: &Path, ellipse: &EllipseSummary, n_points: usize) -> Result<PathBuf> {
    let rows: Vec<String> = ellipse
        .contour(n_points)
        .iter()
        .map(|[x, p]| format!("{x},{p}"))
        .collect();
    write_csv(path, "x,p", &rows)
}

//! Files written by every run: trajectory CSVs, `report.json`, `plot.svg`
//! and the `manifest.json` that allows the run to be replayed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use szego_core::dynamics::Trajectory;

use crate::error::{LabError, LabResult};

pub const MANIFEST: &str = "manifest.json";
pub const REPORT: &str = "report.json";
pub const PLOT: &str = "plot.svg";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Every parameter of the subcommand after config merging.
    pub params: Value,
    pub seed: u64,
    pub version: String,
    /// The only field that differs between replays.
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
    pub summary: Value,
    pub status: String,
    pub error: Option<String>,
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> LabResult<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| LabError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(path)
}

/// `traj.csv` for a single run, `traj_<label>.csv` for sweeps.
pub fn csv_name(label: &str) -> String {
    if label.is_empty() {
        return "traj.csv".into();
    }
    let clean: String = label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "._=-".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("traj_{clean}.csv")
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialise");
    text.push('\n');
    text
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];
const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN: f64 = 60.0;

/// Static plot of the `H^1` norm (solid) and the orbit distance (dashed)
/// against time, one colour per trajectory.
pub fn plot_svg(trajectories: &[(String, Trajectory)]) -> String {
    let series: Vec<(&str, Vec<(f64, f64)>, bool)> = trajectories
        .iter()
        .flat_map(|(label, traj)| {
            let h1 = traj.monitors.iter().map(|r| (r.t, r.h1)).collect();
            let orbit = traj.monitors.iter().map(|r| (r.t, r.orbit_dist)).collect();
            [(label.as_str(), h1, false), (label.as_str(), orbit, true)]
        })
        .collect();
    let points = series
        .iter()
        .flat_map(|(_, pts, _)| pts.iter())
        .filter(|(t, y)| t.is_finite() && y.is_finite());
    let (mut t0, mut t1, mut y0, mut y1) =
        (f64::INFINITY, f64::NEG_INFINITY, 0.0_f64, f64::NEG_INFINITY);
    for &(t, y) in points {
        t0 = t0.min(t);
        t1 = t1.max(t);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(t1 > t0) {
        t0 = if t0.is_finite() { t0 } else { 0.0 };
        t1 = t0 + 1.0;
    }
    if !(y1 > y0) {
        y1 = y0 + 1.0;
    }
    let sx = |t: f64| MARGIN + (t - t0) / (t1 - t0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        svg,
        r#"<path d="M{left},{top} L{left},{bottom} L{right},{bottom}" fill="none" stroke="black"/>"#
    );
    for (x, anchor, text) in [(left, "start", t0), (right, "end", t1)] {
        let _ = writeln!(
            svg,
            r#"<text x="{x}" y="{}" text-anchor="{anchor}">{text:.4}</text>"#,
            bottom + 18.0
        );
    }
    for (y, text) in [(bottom, y0), (top, y1)] {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{text:.4e}</text>"#,
            left - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">t</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{left}" y="{}">H1 norm (solid), orbit distance (dashed)</text>"#,
        top - 24.0
    );
    for (idx, (label, pts, dashed)) in series.iter().enumerate() {
        let colour = PALETTE[(idx / 2) % PALETTE.len()];
        let path: Vec<String> = pts
            .iter()
            .filter(|(t, y)| t.is_finite() && y.is_finite())
            .map(|&(t, y)| format!("{:.2},{:.2}", sx(t), sy(y)))
            .collect();
        if path.is_empty() {
            continue;
        }
        let dash = if *dashed {
            r#" stroke-dasharray="5,3""#
        } else {
            ""
        };
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5"{dash}/>"#,
            path.join(" ")
        );
        if !dashed && !label.is_empty() {
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" fill="{colour}" text-anchor="end">{}</text>"#,
                right,
                top + 14.0 * (idx / 2 + 1) as f64,
                escape(label)
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

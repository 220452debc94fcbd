//! Result files: `metrics.csv`, `plot.svg`, `slots.csv` and `config.toml`.
//!
//! Floats are written with Rust's shortest round-trip formatting, so parsing
//! a written CSV gives back the exact values. The SVG is built from the rows
//! alone, so equal rows give byte-identical plots.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use super::config::{ExperimentConfig, Preset, SweepAxis};
use super::experiment::{MetricsRow, RunMetrics};
use crate::error::{Error, Result};
use crate::protocol::{write_slot_csv, SlotRecord};

pub const METRICS_HEADER: &str = "axis_value,scheme,mean_success,std,collisions,sic_failures";
pub const METRICS_FILE: &str = "metrics.csv";
pub const PLOT_FILE: &str = "plot.svg";
pub const SLOTS_FILE: &str = "slots.csv";
pub const CONFIG_FILE: &str = "config.toml";

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut s = String::from(METRICS_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.axis_value, r.scheme, r.mean_success, r.std, r.collisions, r.sic_failures
        );
    }
    s
}

pub fn parse_metrics_csv(text: &str) -> std::result::Result<Vec<MetricsRow>, String> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == METRICS_HEADER => {}
        Some((_, h)) => return Err(format!("line 1: expected header `{METRICS_HEADER}`, got `{h}`")),
        None => return Err("empty file".into()),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(format!("line {}: expected 6 fields, got {}", i + 1, f.len()));
        }
        let num = |k: usize| -> std::result::Result<f64, String> {
            f[k].trim()
                .parse::<f64>()
                .map_err(|e| format!("line {}: field {}: {e}", i + 1, k + 1))
        };
        rows.push(MetricsRow {
            axis_value: f[0]
                .trim()
                .parse()
                .map_err(|e| format!("line {}: field 1: {e}", i + 1))?,
            scheme: f[1].trim().to_string(),
            mean_success: num(2)?,
            std: num(3)?,
            collisions: num(4)?,
            sic_failures: num(5)?,
        });
    }
    Ok(rows)
}

pub fn read_metrics_csv(path: impl AsRef<Path>) -> Result<Vec<MetricsRow>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_metrics_csv(&text).map_err(|m| Error::parse(path, m))
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Rounds an axis maximum up to a 1-2-5 step multiple.
fn nice_ceiling(max: f64) -> (f64, f64) {
    if max <= 0.0 {
        return (1.0, 0.2);
    }
    let raw = max / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    ((max / step).ceil() * step, step)
}

/// Line plot of mean successes per slot, one curve per series.
pub fn render_svg(axis: SweepAxis, rows: &[MetricsRow]) -> String {
    let metrics = RunMetrics {
        axis,
        rows: rows.to_vec(),
        runtime: Default::default(),
    };
    let labels = metrics.labels();
    let xs: Vec<f64> = rows.iter().map(|r| r.axis_value as f64).collect();
    let x_min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let x_max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (x_min, x_max) = if xs.is_empty() {
        (0.0, 1.0)
    } else if x_min == x_max {
        (x_min - 1.0, x_max + 1.0)
    } else {
        (x_min, x_max)
    };
    let y_top = rows.iter().map(|r| r.mean_success).fold(0.0, f64::max);
    let (y_max, y_step) = nice_ceiling(y_top);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x_min) / (x_max - x_min) * pw;
    let py = |y: f64| TOP + ph - y / y_max * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    s.push_str("<!-- data\n");
    s.push_str(&metrics_csv(rows));
    s.push_str("-->\n");
    let _ = writeln!(s, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"black\"/>"
    );
    let mut y = 0.0;
    while y <= y_max + 1e-9 {
        let yy = py(y);
        let _ = writeln!(
            s,
            "<line x1=\"{LEFT}\" y1=\"{yy:.2}\" x2=\"{:.2}\" y2=\"{yy:.2}\" stroke=\"#dddddd\"/>",
            LEFT + pw
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
            LEFT - 6.0,
            yy + 4.0,
            trim_float(y)
        );
        y += y_step;
    }
    let mut ticks: Vec<usize> = rows.iter().map(|r| r.axis_value).collect();
    ticks.sort_unstable();
    ticks.dedup();
    let stride = ticks.len().div_ceil(12).max(1);
    for &t in ticks.iter().step_by(stride) {
        let xx = px(t as f64);
        let _ = writeln!(
            s,
            "<text x=\"{xx:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{t}</text>",
            TOP + ph + 18.0
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
        LEFT + pw / 2.0,
        HEIGHT - 15.0,
        axis.label()
    );
    let _ = writeln!(
        s,
        "<text x=\"18\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.2})\">Successful devices per slot</text>",
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );
    for (i, label) in labels.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let dash = if label.starts_with("conventional") {
            " stroke-dasharray=\"6 4\""
        } else {
            ""
        };
        let points: Vec<String> = metrics
            .series(label)
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x as f64), py(y)))
            .collect();
        let _ = writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"{dash} points=\"{}\"/>",
            points.join(" ")
        );
        for p in &points {
            let (cx, cy) = p.split_once(',').unwrap_or(("0", "0"));
            let _ = writeln!(s, "<circle cx=\"{cx}\" cy=\"{cy}\" r=\"3\" fill=\"{color}\"/>");
        }
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(
            s,
            "<line x1=\"{lx:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" stroke=\"{color}\" stroke-width=\"2\"{dash}/>",
            lx + 24.0
        );
        let _ = writeln!(s, "<text x=\"{:.2}\" y=\"{:.2}\">{label}</text>", lx + 30.0, ly + 4.0);
    }
    s.push_str("</svg>\n");
    s
}

fn trim_float(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// `config.toml` contents: the effective config preceded by provenance notes.
pub fn config_metadata(config: &ExperimentConfig, preset: Option<Preset>) -> String {
    let mut s = String::new();
    if let Some(p) = preset {
        let _ = writeln!(s, "# preset: {}", p.name());
        s.push_str(p.provenance());
    }
    s.push_str(&config.to_toml());
    s
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `metrics.csv` and `plot.svg` into `out_dir`, returning their paths.
pub fn emit_outputs(metrics: &RunMetrics, out_dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(out_dir)?;
    let csv = out_dir.join(METRICS_FILE);
    write_file(&csv, metrics_csv(&metrics.rows).as_bytes())?;
    let svg = out_dir.join(PLOT_FILE);
    write_file(&svg, render_svg(metrics.axis, &metrics.rows).as_bytes())?;
    Ok(vec![csv, svg])
}

pub fn emit_config(config: &ExperimentConfig, preset: Option<Preset>, out_dir: &Path) -> Result<PathBuf> {
    ensure_dir(out_dir)?;
    let path = out_dir.join(CONFIG_FILE);
    write_file(&path, config_metadata(config, preset).as_bytes())?;
    Ok(path)
}

pub fn emit_slots(records: &[SlotRecord], out_dir: &Path) -> Result<PathBuf> {
    ensure_dir(out_dir)?;
    let path = out_dir.join(SLOTS_FILE);
    let mut buf = Vec::new();
    write_slot_csv(&mut buf, records).map_err(|e| Error::io(&path, e))?;
    let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

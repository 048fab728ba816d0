//! CSV and SVG artifact emission.
//!
//! CSV contracts: fixed headers, 9 significant digits, LF line endings,
//! byte-identical across runs with equal seeds. SVG charts are hand-emitted
//! polylines with no external assets.

use super::{BenchError, RunRecord, SweepRow};
use std::fmt::Write as _;
use std::path::Path;

pub const RUN_HEADER: &str = "t,z_exact,z_raw,z_readout,z_full,success_prob,train_cost";
pub const SWEEP_HEADER: &str = "p,n,dev_raw,dev_readout,dev_full";
pub const ORACLE_HEADER: &str = "t,z_exact";

/// 9 significant digits, scientific notation.
pub fn format_sig(x: f64) -> String {
    format!("{x:.8e}")
}

fn opt_sig(x: Option<f64>) -> String {
    x.map(format_sig).unwrap_or_default()
}

pub fn records_csv(records: &[RunRecord]) -> String {
    let mut out = String::from(RUN_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            format_sig(r.t),
            format_sig(r.z_exact),
            format_sig(r.z_raw),
            opt_sig(r.z_readout),
            opt_sig(r.z_full),
            format_sig(r.success_prob),
            format_sig(r.train_cost),
        );
    }
    out
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            format_sig(row.p),
            row.n,
            format_sig(row.dev_raw),
            opt_sig(row.dev_readout),
            opt_sig(row.dev_full),
        );
    }
    out
}

pub fn oracle_csv(times: &[f64], exact: &[f64]) -> String {
    let mut out = String::from(ORACLE_HEADER);
    out.push('\n');
    for (t, z) in times.iter().zip(exact) {
        let _ = writeln!(out, "{},{}", format_sig(*t), format_sig(*z));
    }
    out
}

pub fn write_text(path: &Path, content: &str) -> Result<(), BenchError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, content)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// SVG line charts
// ---------------------------------------------------------------------------

struct Series {
    label: String,
    color: &'static str,
    dash: &'static str,
    points: Vec<(f64, f64)>,
}

const COLOR_EXACT: &str = "#2f9e44";
const COLOR_RAW: &str = "#1c7ed6";
const COLOR_READOUT: &str = "#f08c00";
const COLOR_FULL: &str = "#e03131";
const DASHES: &[&str] = &["none", "6,3", "2,2", "8,2,2,2"];

fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (width, height) = (640.0, 420.0);
    let (left, right, top, bottom) = (62.0, 170.0, 34.0, 48.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;

    let all: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .collect();
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in &all {
        x_min = x_min.min(*x);
        x_max = x_max.max(*x);
        y_min = y_min.min(*y);
        y_max = y_max.max(*y);
    }
    if !x_min.is_finite() {
        x_min = 0.0;
        x_max = 1.0;
        y_min = 0.0;
        y_max = 1.0;
    }
    if (x_max - x_min).abs() < 1e-12 {
        x_max = x_min + 1.0;
    }
    let pad = (y_max - y_min).abs().max(1e-9) * 0.08;
    y_min -= pad;
    y_max += pad;

    let px = |x: f64| left + (x - x_min) / (x_max - x_min) * plot_w;
    let py = |y: f64| top + (y_max - y) / (y_max - y_min) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" font-family="monospace" font-size="12">"#
    );
    let _ = writeln!(
        svg,
        r##"<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>"##
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="14">{title}</text>"#,
        left + plot_w / 2.0
    );
    // Axes.
    let _ = writeln!(
        svg,
        r##"<line x1="{l:.2}" y1="{b:.2}" x2="{r:.2}" y2="{b:.2}" stroke="#333333" stroke-width="1"/>"##,
        l = left,
        r = left + plot_w,
        b = top + plot_h
    );
    let _ = writeln!(
        svg,
        r##"<line x1="{l:.2}" y1="{t:.2}" x2="{l:.2}" y2="{b:.2}" stroke="#333333" stroke-width="1"/>"##,
        l = left,
        t = top,
        b = top + plot_h
    );
    // Ticks: 5 per axis.
    for i in 0..=4 {
        let fx = x_min + (x_max - x_min) * i as f64 / 4.0;
        let fy = y_min + (y_max - y_min) * i as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{:.3}</text>"#,
            px(fx),
            top + plot_h + 16.0,
            fx
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{:.3}</text>"#,
            left - 6.0,
            py(fy) + 4.0,
            fy
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{l:.2}" y1="{y:.2}" x2="{r:.2}" y2="{y:.2}" stroke="#dddddd" stroke-width="0.5"/>"##,
            l = left,
            r = left + plot_w,
            y = py(fy)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{x_label}</text>"#,
        left + plot_w / 2.0,
        height - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{y_label}</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0
    );

    for (idx, s) in series.iter().enumerate() {
        if s.points.is_empty() {
            continue;
        }
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y)))
            .collect();
        let dash = if s.dash == "none" {
            String::new()
        } else {
            format!(r#" stroke-dasharray="{}""#, s.dash)
        };
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"#,
            pts.join(" "),
            s.color
        );
        // Legend entry.
        let ly = top + 8.0 + idx as f64 * 18.0;
        let lx = left + plot_w + 14.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{}" stroke-width="2"{dash}/>"#,
            lx + 22.0,
            s.color
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 28.0,
            ly + 4.0,
            s.label
        );
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn records_svg(records: &[RunRecord]) -> String {
    let series = [
        (
            "exact",
            COLOR_EXACT,
            records
                .iter()
                .map(|r| (r.t, Some(r.z_exact)))
                .collect::<Vec<_>>(),
        ),
        (
            "raw",
            COLOR_RAW,
            records.iter().map(|r| (r.t, Some(r.z_raw))).collect(),
        ),
        (
            "readout",
            COLOR_READOUT,
            records.iter().map(|r| (r.t, r.z_readout)).collect(),
        ),
        (
            "full",
            COLOR_FULL,
            records.iter().map(|r| (r.t, r.z_full)).collect(),
        ),
    ];
    let series: Vec<Series> = series
        .into_iter()
        .map(|(label, color, pts)| Series {
            label: label.to_string(),
            color,
            dash: "none",
            points: pts
                .into_iter()
                .filter_map(|(x, y)| y.map(|v| (x, v)))
                .collect(),
        })
        .filter(|s| !s.points.is_empty())
        .collect();
    line_chart("Z magnetization vs time", "t", "<Z(t)>", &series)
}

pub fn sweep_svg(rows: &[SweepRow]) -> String {
    let mut depths: Vec<usize> = rows.iter().map(|r| r.n).collect();
    depths.sort_unstable();
    depths.dedup();
    let mut series = Vec::new();
    for (di, &n) in depths.iter().enumerate() {
        let dash = DASHES[di % DASHES.len()];
        let of_depth: Vec<&SweepRow> = rows.iter().filter(|r| r.n == n).collect();
        let mk = |label: &str, color: &'static str, f: &dyn Fn(&SweepRow) -> Option<f64>| Series {
            label: format!("{label} n={n}"),
            color,
            dash,
            points: of_depth
                .iter()
                .filter_map(|r| f(r).map(|v| (r.p, v)))
                .collect(),
        };
        series.push(mk("raw", COLOR_RAW, &|r| Some(r.dev_raw)));
        series.push(mk("readout", COLOR_READOUT, &|r| r.dev_readout));
        series.push(mk("full", COLOR_FULL, &|r| r.dev_full));
    }
    series.retain(|s| !s.points.is_empty());
    line_chart(
        "Average deviation vs CX error rate",
        "p",
        "avg |dZ|",
        &series,
    )
}

/// Renders a CSV artifact (run or sweep table, detected by header) as SVG.
pub fn csv_to_svg(csv_text: &str) -> Result<String, BenchError> {
    let mut lines = csv_text.lines();
    let header = lines
        .next()
        .ok_or_else(|| BenchError::Config("empty CSV input".into()))?;
    let parse_cell = |cell: &str| -> Option<f64> {
        let trimmed = cell.trim();
        if trimmed.is_empty() {
            None
        } else {
            trimmed.parse::<f64>().ok()
        }
    };
    match header {
        RUN_HEADER => {
            let mut records = Vec::new();
            for line in lines.filter(|l| !l.trim().is_empty()) {
                let cells: Vec<&str> = line.split(',').collect();
                if cells.len() != 7 {
                    return Err(BenchError::Config(format!("bad run CSV row: '{line}'")));
                }
                records.push(RunRecord {
                    t: parse_cell(cells[0])
                        .ok_or_else(|| BenchError::Config("bad t cell".into()))?,
                    z_exact: parse_cell(cells[1])
                        .ok_or_else(|| BenchError::Config("bad z_exact cell".into()))?,
                    z_raw: parse_cell(cells[2])
                        .ok_or_else(|| BenchError::Config("bad z_raw cell".into()))?,
                    z_readout: parse_cell(cells[3]),
                    z_full: parse_cell(cells[4]),
                    success_prob: parse_cell(cells[5]).unwrap_or(f64::NAN),
                    train_cost: parse_cell(cells[6]).unwrap_or(f64::NAN),
                });
            }
            Ok(records_svg(&records))
        }
        SWEEP_HEADER => {
            let mut rows = Vec::new();
            for line in lines.filter(|l| !l.trim().is_empty()) {
                let cells: Vec<&str> = line.split(',').collect();
                if cells.len() != 5 {
                    return Err(BenchError::Config(format!("bad sweep CSV row: '{line}'")));
                }
                rows.push(SweepRow {
                    p: parse_cell(cells[0])
                        .ok_or_else(|| BenchError::Config("bad p cell".into()))?,
                    n: cells[1]
                        .trim()
                        .parse::<usize>()
                        .map_err(|_| BenchError::Config("bad n cell".into()))?,
                    dev_raw: parse_cell(cells[2])
                        .ok_or_else(|| BenchError::Config("bad dev_raw cell".into()))?,
                    dev_readout: parse_cell(cells[3]),
                    dev_full: parse_cell(cells[4]),
                });
            }
            Ok(sweep_svg(&rows))
        }
        other => Err(BenchError::Config(format!(
            "unrecognized CSV header '{other}'"
        ))),
    }
}

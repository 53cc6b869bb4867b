//! Trace and aggregate CSV files, extended-real percentiles, and SVG curves.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

pub const TRACE_COLUMNS: [&str; 5] = ["eval", "seed", "best_feasible", "rs_hat", "rf_hat"];
pub const AGGREGATE_COLUMNS: [&str; 4] = ["eval", "median", "q25", "q75"];

/// Best feasible objective so far (`inf` when none) and the current model residuals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub eval: usize,
    pub seed: u64,
    pub best_feasible: f64,
    pub rs_hat: f64,
    pub rf_hat: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub eval: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record(TRACE_COLUMNS)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>, HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    check_header(r.headers()?, &TRACE_COLUMNS, path)?;
    Ok(r.deserialize().collect::<Result<Vec<TraceRow>, _>>()?)
}

pub fn write_aggregate(path: &Path, rows: &[AggregateRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record(AGGREGATE_COLUMNS)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_aggregate(path: &Path) -> Result<Vec<AggregateRow>, HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    check_header(r.headers()?, &AGGREGATE_COLUMNS, path)?;
    Ok(r.deserialize().collect::<Result<Vec<AggregateRow>, _>>()?)
}

fn check_header(found: &csv::StringRecord, expected: &[&str], path: &Path) -> Result<(), HarnessError> {
    if found.iter().ne(expected.iter().copied()) {
        return Err(HarnessError::Runtime(format!(
            "{}: expected columns {}, found {}",
            path.display(),
            expected.join(","),
            found.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

/// Linear-interpolation percentile of sorted values on the extended real line.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty() && (0.0..=1.0).contains(&q));
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    let (a, b) = (sorted[lo], sorted[hi]);
    if frac == 0.0 || a == b {
        a
    } else if b.is_infinite() {
        b
    } else {
        a + frac * (b - a)
    }
}

/// Per-evaluation median and quartiles across seeds.
pub fn aggregate(traces: &[Vec<TraceRow>]) -> Result<Vec<AggregateRow>, HarnessError> {
    let Some(first) = traces.first() else {
        return Ok(Vec::new());
    };
    let n = first.len();
    if traces.iter().any(|t| t.len() != n) {
        return Err(HarnessError::Runtime("traces have different lengths".into()));
    }
    let mut out = Vec::with_capacity(n);
    let mut column = Vec::with_capacity(traces.len());
    for i in 0..n {
        let eval = first[i].eval;
        column.clear();
        for t in traces {
            if t[i].eval != eval {
                return Err(HarnessError::Runtime(format!("misaligned traces at row {}", i + 1)));
            }
            if t[i].best_feasible.is_nan() {
                return Err(HarnessError::Runtime(format!("NaN best objective at evaluation {eval}")));
            }
            column.push(t[i].best_feasible);
        }
        column.sort_by(|a, b| a.total_cmp(b));
        out.push(AggregateRow {
            eval,
            median: percentile(&column, 0.5),
            q25: percentile(&column, 0.25),
            q75: percentile(&column, 0.75),
        });
    }
    Ok(out)
}

/// `trace_seed*.csv` files of a directory, ordered by seed.
pub fn trace_files(dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let mut files: Vec<(u64, PathBuf)> = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if let Some(seed) = name.strip_prefix("trace_seed").and_then(|s| s.strip_suffix(".csv")) {
            if let Ok(seed) = seed.parse() {
                files.push((seed, path));
            }
        }
    }
    files.sort();
    Ok(files.into_iter().map(|(_, p)| p).collect())
}

/// Rebuilds `aggregate.csv` (and optionally the SVG) from the traces in `dir`.
pub fn aggregate_dir(dir: &Path, plots: bool) -> Result<Vec<AggregateRow>, HarnessError> {
    let files = trace_files(dir)?;
    if files.is_empty() {
        return Err(HarnessError::Runtime(format!("no trace files in {}", dir.display())));
    }
    let traces = files.iter().map(|f| read_trace(f)).collect::<Result<Vec<_>, _>>()?;
    let agg = aggregate(&traces)?;
    write_aggregate(&dir.join("aggregate.csv"), &agg)?;
    if plots {
        let title = dir.file_name().and_then(|n| n.to_str()).unwrap_or("results");
        std::fs::write(dir.join("convergence.svg"), render_svg(&agg, title))?;
    }
    Ok(agg)
}

/// Median curve with an interquartile band; infinite values are left out.
pub fn render_svg(rows: &[AggregateRow], title: &str) -> String {
    let (w, h, pad) = (640.0, 400.0, 50.0);
    let finite: Vec<f64> = rows
        .iter()
        .flat_map(|r| [r.median, r.q25, r.q75])
        .filter(|v| v.is_finite())
        .collect();
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#, w / 2.0, escape(title));
    if rows.is_empty() || finite.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        hi = lo + 1.0;
    }
    let n = rows.last().map_or(1, |r| r.eval).max(2) as f64;
    let sx = |e: usize| pad + (e as f64 - 1.0) / (n - 1.0) * (w - 2.0 * pad);
    let sy = |v: f64| h - pad - (v - lo) / (hi - lo) * (h - 2.0 * pad);

    let band: Vec<&AggregateRow> = rows.iter().filter(|r| r.q25.is_finite() && r.q75.is_finite()).collect();
    if !band.is_empty() {
        let mut pts = String::new();
        for r in &band {
            let _ = write!(pts, "{:.2},{:.2} ", sx(r.eval), sy(r.q75));
        }
        for r in band.iter().rev() {
            let _ = write!(pts, "{:.2},{:.2} ", sx(r.eval), sy(r.q25));
        }
        let _ = writeln!(svg, r#"<polygon points="{}" fill="steelblue" fill-opacity="0.25" stroke="none"/>"#, pts.trim_end());
    }
    let mut line = String::new();
    for r in rows.iter().filter(|r| r.median.is_finite()) {
        let _ = write!(line, "{:.2},{:.2} ", sx(r.eval), sy(r.median));
    }
    let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#, line.trim_end());
    let _ = writeln!(
        svg,
        r#"<line x1="{pad}" y1="{y}" x2="{x2}" y2="{y}" stroke="black"/><line x1="{pad}" y1="{pad}" x2="{pad}" y2="{y}" stroke="black"/>"#,
        y = h - pad,
        x2 = w - pad
    );
    let _ = writeln!(svg, r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">evaluations</text>"#, w / 2.0, h - 12.0);
    let _ = writeln!(svg, r#"<text x="{pad}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{hi:.4}</text>"#, pad - 4.0);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{lo:.4}</text>"#, pad - 4.0, h - pad);
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

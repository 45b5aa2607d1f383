//! Plot-ready CSV files, JSON reports and small SVG line charts.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SweepRow;
use crate::detection::AnomalyScore;
use crate::metrics::{RocPoint, RunReport};
use crate::training::EpochRecord;
use crate::{Error, Result};

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::file(path, e)
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for row in rows {
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.flush()?;
    Ok(())
}

/// One row of a scores file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub graph_id: usize,
    pub node: usize,
    pub xi: f64,
    /// 1 for abnormal.
    #[serde(rename = "true")]
    pub truth: u8,
    pub predicted: u8,
}

pub fn write_scores(path: &Path, scores: &[AnomalyScore], predicted: &[bool]) -> Result<()> {
    if scores.len() != predicted.len() {
        return Err(Error::shape("scores vs predictions", scores.len(), predicted.len()));
    }
    write_rows(
        path,
        scores.iter().zip(predicted).map(|(s, &p)| ScoreRow {
            graph_id: s.graph_id,
            node: s.node_index,
            xi: s.xi,
            truth: s.abnormal as u8,
            predicted: p as u8,
        }),
    )
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoreRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().map(|row| row.map_err(csv_err(path))).collect()
}

pub fn write_history(path: &Path, history: &[EpochRecord]) -> Result<()> {
    write_rows(path, history)
}

pub fn write_roc(path: &Path, roc: &[RocPoint]) -> Result<()> {
    write_rows(path, roc)
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    write_rows(path, rows)
}

#[derive(Serialize)]
struct ReportRow<'a> {
    row: &'a str,
    seed: String,
    auc: f64,
    acc: f64,
    f1: f64,
    threshold: f64,
    tp: usize,
    fp: usize,
    tn: usize,
    fn_: usize,
}

/// `report.json` with every field and `report.csv` with one row per run
/// followed by mean and std rows.
pub fn write_report(dir: &Path, report: &RunReport) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    let json = dir.join("report.json");
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::Data(e.to_string()))?;
    fs::write(&json, text + "\n").map_err(|e| Error::file(&json, e))?;

    let mut rows: Vec<ReportRow<'_>> = report
        .runs
        .iter()
        .zip(&report.seeds)
        .map(|(m, s)| ReportRow {
            row: "run",
            seed: s.to_string(),
            auc: m.auc,
            acc: m.acc,
            f1: m.f1,
            threshold: m.threshold,
            tp: m.confusion.tp,
            fp: m.confusion.fp,
            tn: m.confusion.tn,
            fn_: m.confusion.fn_,
        })
        .collect();
    for (row, pick) in [("mean", 0usize), ("std", 1)] {
        let v = |s: crate::metrics::Summary| if pick == 0 { s.mean } else { s.std };
        rows.push(ReportRow {
            row,
            seed: String::new(),
            auc: v(report.auc),
            acc: v(report.acc),
            f1: v(report.f1),
            threshold: f64::NAN,
            tp: 0,
            fp: 0,
            tn: 0,
            fn_: 0,
        });
    }
    write_rows(&dir.join("report.csv"), rows)
}

/// Line chart of one or more `(label, points)` series.
pub fn svg_line_chart(title: &str, x_label: &str, y_label: &str, series: &[(&str, Vec<(f64, f64)>)]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 56.0;
    const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let pts = series.iter().flat_map(|(_, p)| p.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        svg,
        r#"<path d="M{M} {M} V{b} H{r}" fill="none" stroke="black"/>"#,
        b = H - M,
        r = W - M
    );
    for (v, x, y, anchor) in [
        (x0, sx(x0), H - M + 16.0, "middle"),
        (x1, sx(x1), H - M + 16.0, "middle"),
        (y0, M - 6.0, sy(y0) + 4.0, "end"),
        (y1, M - 6.0, sy(y1) + 4.0, "end"),
    ] {
        let _ = writeln!(svg, r#"<text x="{x:.1}" y="{y:.1}" text-anchor="{anchor}">{}</text>"#, tick(v));
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 14.0, escape(x_label));
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    for (i, (label, points)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, path.join(" "));
        let ly = M + 14.0 * i as f64;
        let _ = writeln!(svg, r#"<text x="{}" y="{ly}" fill="{color}" text-anchor="end">{}</text>"#, W - M, escape(label));
    }
    svg.push_str("</svg>\n");
    svg
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn write_svg(path: &Path, svg: &str) -> Result<()> {
    fs::write(path, svg).map_err(|e| Error::file(path, e))
}

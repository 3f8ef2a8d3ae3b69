use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::run::{fmt_opt, write_file, SWEEP_HEADER};
use crate::error::{Error, Result};
use crate::metrics::EvalReport;

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOutcome {
    pub summary: String,
    /// One accuracy-vs-level CSV per noise kind.
    pub series: Vec<PathBuf>,
}

/// Mean metrics of all sweep rows sharing a (kind, level) cell.
#[derive(Debug, Clone, PartialEq)]
struct Cell {
    kind: String,
    level: f64,
    n: usize,
    /// accuracy, precision, recall, f1, auc, ap
    sums: [f64; 6],
}

impl Cell {
    fn mean(&self, i: usize) -> f64 {
        self.sums[i] / self.n as f64
    }
}

fn parse_num(field: &str, line: usize) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| Error::CsvLine { line, reason: format!("bad number {field:?}") })
}

fn parse_sweep(text: &str) -> Result<Vec<Cell>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == SWEEP_HEADER => {}
        other => {
            return Err(Error::CsvHeader {
                found: other.unwrap_or("").to_string(),
            })
        }
    }
    let mut cells: Vec<Cell> = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(Error::CsvLine {
                line: line_no,
                reason: format!("expected 9 fields, found {}", f.len()),
            });
        }
        let level = parse_num(f[1], line_no)?;
        let mut vals = [0.0; 6];
        for (k, v) in vals.iter_mut().enumerate() {
            *v = parse_num(f[3 + k], line_no)?;
        }
        match cells.iter_mut().find(|c| c.kind == f[0] && c.level == level) {
            Some(c) => {
                c.n += 1;
                c.sums.iter_mut().zip(vals).for_each(|(s, v)| *s += v);
            }
            None => cells.push(Cell {
                kind: f[0].to_string(),
                level,
                n: 1,
                sums: vals,
            }),
        }
    }
    Ok(cells)
}

/// Line chart of `(level, accuracy)` points on a 0..1 accuracy axis.
pub fn render_svg(title: &str, points: &[(f64, f64)]) -> String {
    let (w, h, m) = (480.0, 320.0, 48.0);
    let x_max = points.iter().map(|p| p.0).fold(0.0f64, f64::max).max(1e-9);
    let sx = |x: f64| m + x / x_max * (w - 2.0 * m);
    let sy = |y: f64| h - m - y.clamp(0.0, 1.0) * (h - 2.0 * m);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="14">{title}</text>"#, w / 2.0);
    let _ = writeln!(
        s,
        r#"<polyline points="{m},{} {m},{} {},{}" fill="none" stroke="black"/>"#,
        m,
        h - m,
        w - m,
        h - m
    );
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="10">{tick:.2}</text>"#,
            m - 4.0,
            sy(tick) + 3.0
        );
    }
    for &(x, _) in points {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="10">{:.0}%</text>"#,
            sx(x),
            h - m + 14.0,
            x * 100.0
        );
    }
    let path: Vec<String> = points.iter().map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
    let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#, path.join(" "));
    for &(x, y) in points {
        let _ = writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="steelblue"/>"#, sx(x), sy(y));
    }
    s.push_str("</svg>\n");
    s
}

/// Renders `summary.txt` for a results directory and, when it holds a
/// `sweep.csv`, one `series/<kind>.csv` per noise kind (clean cell as level 0)
/// plus optional SVG charts.
pub fn run_report(dir: &Path, svg: bool) -> Result<ReportOutcome> {
    let report_path = dir.join("report.json");
    let sweep_path = dir.join("sweep.csv");
    let report: Option<EvalReport> = if report_path.exists() {
        Some(serde_json::from_str(&std::fs::read_to_string(&report_path)?)?)
    } else {
        None
    };
    let cells = if sweep_path.exists() {
        Some(parse_sweep(&std::fs::read_to_string(&sweep_path)?)?)
    } else {
        None
    };
    if report.is_none() && cells.is_none() {
        return Err(Error::Config(format!("no report.json or sweep.csv in {}", dir.display())));
    }

    let mut summary = String::new();
    if let Some(r) = &report {
        summary.push_str("Classification report\n\n");
        summary.push_str(&r.to_table());
    }
    let mut series = Vec::new();
    if let Some(cells) = &cells {
        if !summary.is_empty() {
            summary.push('\n');
        }
        let _ = writeln!(summary, "Noise sweep\n");
        let _ = writeln!(summary, "{:<10} {:>6} {:>5} {:>8} {:>8} {:>8} {:>8}", "kind", "level", "runs", "accuracy", "f1", "auc", "ap");
        for c in cells {
            let _ = writeln!(
                summary,
                "{:<10} {:>6.2} {:>5} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
                c.kind,
                c.level,
                c.n,
                c.mean(0),
                c.mean(3),
                c.mean(4),
                c.mean(5)
            );
        }
        let clean = cells.iter().find(|c| c.kind == "clean");
        let mut kinds: Vec<&str> = Vec::new();
        for c in cells {
            if c.kind != "clean" && !kinds.contains(&c.kind.as_str()) {
                kinds.push(&c.kind);
            }
        }
        for kind in kinds {
            let mut csv = String::from("level,runs,accuracy,precision_macro,recall_macro,f1_macro,auc,ap\n");
            let mut points = Vec::new();
            for c in clean.into_iter().chain(cells.iter().filter(|c| c.kind == kind)) {
                let level = if c.kind == "clean" { 0.0 } else { c.level };
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{}",
                    level,
                    c.n,
                    c.mean(0),
                    c.mean(1),
                    c.mean(2),
                    c.mean(3),
                    fmt_opt(Some(c.mean(4))),
                    fmt_opt(Some(c.mean(5)))
                );
                points.push((level, c.mean(0)));
            }
            let path = dir.join("series").join(format!("{kind}.csv"));
            write_file(&path, csv)?;
            series.push(path);
            if svg {
                write_file(
                    &dir.join("series").join(format!("{kind}.svg")),
                    render_svg(&format!("accuracy vs {kind} level"), &points),
                )?;
            }
        }
    }
    write_file(&dir.join("summary.txt"), &summary)?;
    Ok(ReportOutcome { summary, series })
}

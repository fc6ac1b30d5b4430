use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::marl::{BatchMetrics, Mode};

/// One `metrics.csv` record.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub run_id: String,
    pub mode: Mode,
    pub seed: u64,
    pub batch: usize,
    pub global_step: usize,
    pub payoff: Vec<f64>,
    pub overall_payoff: f64,
    pub precision: f64,
    pub alpha: f64,
    pub contribution: Vec<f64>,
    pub entropy: Vec<f64>,
}

impl MetricsRow {
    pub fn from_batch(run_id: &str, mode: Mode, seed: u64, m: &BatchMetrics) -> Self {
        Self {
            run_id: run_id.to_string(),
            mode,
            seed,
            batch: m.batch,
            global_step: m.global_step,
            payoff: m.payoff.clone(),
            overall_payoff: m.overall_payoff,
            precision: m.precision,
            alpha: m.alpha,
            contribution: m.contribution.clone(),
            entropy: m.entropy.clone(),
        }
    }

    pub fn num_orgs(&self) -> usize {
        self.payoff.len()
    }

    fn fields(&self) -> Vec<String> {
        let mut out = vec![
            self.run_id.clone(),
            self.mode.name().to_string(),
            self.seed.to_string(),
            self.batch.to_string(),
            self.global_step.to_string(),
        ];
        out.extend(self.payoff.iter().map(f64::to_string));
        out.push(self.overall_payoff.to_string());
        out.push(self.precision.to_string());
        out.push(self.alpha.to_string());
        out.extend(self.contribution.iter().map(f64::to_string));
        out.extend(self.entropy.iter().map(f64::to_string));
        out
    }
}

pub fn csv_header(n: usize) -> Vec<String> {
    let mut h: Vec<String> = ["run_id", "mode", "seed", "batch", "global_step"]
        .map(String::from)
        .into();
    h.extend((0..n).map(|i| format!("payoff_{i}")));
    h.extend(["overall_payoff", "precision", "alpha"].map(String::from));
    h.extend((0..n).map(|i| format!("contribution_{i}")));
    h.extend((0..n).map(|i| format!("entropy_{i}")));
    h
}

/// Writes rows with a header. All rows must have the same organization count.
pub fn emit_csv(rows: &[MetricsRow], path: &Path) -> Result<()> {
    let n = rows.first().map_or(0, MetricsRow::num_orgs);
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    w.write_record(csv_header(n))?;
    for row in rows {
        if row.num_orgs() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: row.num_orgs(),
            });
        }
        if row.fields().iter().skip(5).any(|f| !f.parse::<f64>().is_ok_and(f64::is_finite)) {
            return Err(Error::NonFinite(format!("metrics row {}", row.batch)));
        }
        w.write_record(row.fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let n = header.iter().filter(|h| h.starts_with("payoff_")).count();
    if header.iter().collect::<Vec<_>>() != csv_header(n) {
        return Err(Error::param("metrics.csv", "unexpected header"));
    }
    let bad = |what: &str| Error::param("metrics.csv", format!("malformed {what}"));
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let f = |i: usize| -> Result<f64> { rec[i].parse().map_err(|_| bad(&header[i])) };
        let floats = |start: usize| -> Result<Vec<f64>> { (start..start + n).map(f).collect() };
        rows.push(MetricsRow {
            run_id: rec[0].to_string(),
            mode: Mode::parse(&rec[1]).ok_or_else(|| bad("mode"))?,
            seed: rec[2].parse().map_err(|_| bad("seed"))?,
            batch: rec[3].parse().map_err(|_| bad("batch"))?,
            global_step: rec[4].parse().map_err(|_| bad("global_step"))?,
            payoff: floats(5)?,
            overall_payoff: f(5 + n)?,
            precision: f(6 + n)?,
            alpha: f(7 + n)?,
            contribution: floats(8 + n)?,
            entropy: floats(8 + 2 * n)?,
        });
    }
    Ok(rows)
}

/// Appends `{ts, kind, payload}` lines. `ts` is a sequence number, so the
/// file is a deterministic function of the run.
pub struct EventLog {
    out: BufWriter<File>,
    ts: u64,
}

#[derive(Serialize)]
struct Event<'a, T: Serialize> {
    ts: u64,
    kind: &'a str,
    payload: T,
}

impl EventLog {
    pub fn create(path: &Path) -> Result<Self> {
        Ok(Self {
            out: BufWriter::new(File::create(path)?),
            ts: 0,
        })
    }

    pub fn record<T: Serialize>(&mut self, kind: &str, payload: T) -> Result<()> {
        serde_json::to_writer(&mut self.out, &Event { ts: self.ts, kind, payload })?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        self.ts += 1;
        Ok(())
    }
}

/// A polyline with an optional shaded band `(x, lo, hi)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub band: Vec<(f64, f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
            band: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

pub const SVG_WIDTH: f64 = 720.0;
pub const SVG_HEIGHT: f64 = 420.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Data-to-pixel mapping of the plot area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axes {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Axes {
    /// Plot area of an [`emit_svg`] chart fitted to `series`.
    pub fn fit(series: &[Series]) -> Self {
        let xs = series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.0).chain(s.band.iter().map(|b| b.0)));
        let ys = series.iter().flat_map(|s| {
            s.points
                .iter()
                .map(|p| p.1)
                .chain(s.band.iter().flat_map(|b| [b.1, b.2]))
        });
        let (x_min, x_max) = span(xs);
        let (y_min, y_max) = span(ys);
        Self {
            left: 80.0,
            top: 40.0,
            width: SVG_WIDTH - 80.0 - 170.0,
            height: SVG_HEIGHT - 40.0 - 60.0,
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    pub fn map(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.left + (x - self.x_min) / (self.x_max - self.x_min) * self.width,
            self.top + (self.y_max - y) / (self.y_max - self.y_min) * self.height,
        )
    }
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 1.0, hi + 1.0)
    } else {
        (lo, hi)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render_svg(chart: &Chart) -> String {
    let ax = Axes::fit(&chart.series);
    let mut s = String::new();
    let (w, h) = (SVG_WIDTH, SVG_HEIGHT);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        ax.left + ax.width / 2.0,
        escape(&chart.title)
    );
    let (x0, y1) = (ax.left, ax.top + ax.height);
    let _ = writeln!(
        s,
        r#"<g stroke="black" fill="none"><line x1="{x0}" y1="{y1}" x2="{}" y2="{y1}"/><line x1="{x0}" y1="{}" x2="{x0}" y2="{y1}"/></g>"#,
        x0 + ax.width,
        ax.top
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = ax.x_min + t * (ax.x_max - ax.x_min);
        let yv = ax.y_min + t * (ax.y_max - ax.y_min);
        let (px, _) = ax.map(xv, ax.y_min);
        let (_, py) = ax.map(ax.x_min, yv);
        let _ = writeln!(
            s,
            r#"<line x1="{px}" y1="{y1}" x2="{px}" y2="{}" stroke="black"/><text x="{px}" y="{}" text-anchor="middle">{}</text>"#,
            y1 + 5.0,
            y1 + 18.0,
            tick(xv)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{py}" x2="{x0}" y2="{py}" stroke="black"/><text x="{}" y="{}" text-anchor="end">{}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            py + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        ax.left + ax.width / 2.0,
        h - 15.0,
        escape(&chart.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
        ax.top + ax.height / 2.0,
        escape(&chart.y_label)
    );
    for (i, series) in chart.series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        if !series.band.is_empty() {
            let upper = series.band.iter().map(|&(x, _, hi)| ax.map(x, hi));
            let lower = series.band.iter().rev().map(|&(x, lo, _)| ax.map(x, lo));
            let _ = writeln!(
                s,
                r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
                coords(upper.chain(lower))
            );
        }
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            coords(series.points.iter().map(|&(x, y)| ax.map(x, y)))
        );
        let ly = ax.top + 10.0 + 18.0 * i as f64;
        let lx = ax.left + ax.width + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 25.0,
            ly + 4.0,
            escape(&series.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn coords(points: impl Iterator<Item = (f64, f64)>) -> String {
    points
        .map(|(x, y)| format!("{x:.3},{y:.3}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{}", (v * 100.0).round() / 100.0)
    }
}

pub fn emit_svg(chart: &Chart, path: &Path) -> Result<()> {
    std::fs::write(path, render_svg(chart))?;
    Ok(())
}

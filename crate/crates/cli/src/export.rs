//! CSV and SVG writers.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use optoweak::fockspace::WignerGrid;

use crate::sweep::SweepResult;

pub const SWEEP_HEADER: [&str; 4] = ["tau", "q_over_sigma", "p_dimensionless", "success_prob"];

/// Shortest `%.17g`-style rendering: 17 significant digits, trailing zeros
/// dropped, and both zeros written as `0`.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..17).contains(&exp) {
        trim_fraction(format!("{:.*}", (16 - exp) as usize, x))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_fraction(mantissa.to_string()), exp.abs())
    }
}

fn trim_fraction(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(format_number).unwrap_or_default()
}

pub fn sweep_csv(result: &SweepResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_HEADER)?;
    for row in &result.rows {
        w.write_record([format_number(row.tau), opt(row.q_over_sigma), opt(row.p_dimensionless), format_number(row.success_prob)])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn wigner_csv(grid: &WignerGrid) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["x", "y", "w"])?;
    for iy in 0..grid.spec.ny {
        for ix in 0..grid.spec.nx {
            w.write_record([format_number(grid.spec.x(ix)), format_number(grid.spec.y(iy)), format_number(grid.at(ix, iy))])?;
        }
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn emit_csv(result: &SweepResult, path: &Path) -> Result<()> {
    write_text(path, &sweep_csv(result)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

impl Series {
    /// Rows whose field is empty are skipped.
    pub fn from_sweep(label: impl Into<String>, result: &SweepResult, field: impl Fn(&crate::sweep::SweepRow) -> Option<f64>, dashed: bool) -> Self {
        let points = result.rows.iter().filter_map(|r| field(r).map(|v| (r.tau, v))).collect();
        Series { label: label.into(), points, dashed }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 70.0;
const PALETTE: [&str; 4] = ["#1f3a93", "#b2182b", "#2d8a4e", "#6a3d9a"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Round step sizes (1, 2, 5 × 10ⁿ) giving about `target` intervals.
fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let raw = (hi - lo) / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    let s = format!("{:.6}", v);
    let s = trim_fraction(s);
    if s == "-0" { "0".into() } else { s }
}

fn padded_range(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    left: f64,
    top: f64,
    w: f64,
    h: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x0) / (self.x1 - self.x0) * self.w
    }

    fn py(&self, y: f64) -> f64 {
        self.top + (self.y1 - y) / (self.y1 - self.y0) * self.h
    }

    fn axes(&self, svg: &mut String, x_label: &str, y_label: &str) {
        let (l, t, w, h) = (self.left, self.top, self.w, self.h);
        let _ = writeln!(svg, r#"<rect x="{l}" y="{t}" width="{w}" height="{h}" fill="none" stroke="black"/>"#);
        for x in ticks(self.x0, self.x1, 8) {
            let px = self.px(x);
            let _ = writeln!(
                svg,
                r#"<line x1="{px:.2}" y1="{b}" x2="{px:.2}" y2="{b2}" stroke="black"/><text x="{px:.2}" y="{ty}" font-size="12" text-anchor="middle">{}</text>"#,
                tick_label(x),
                b = t + h,
                b2 = t + h + 5.0,
                ty = t + h + 20.0
            );
        }
        for y in ticks(self.y0, self.y1, 6) {
            let py = self.py(y);
            let _ = writeln!(
                svg,
                r#"<line x1="{l}" y1="{py:.2}" x2="{l2}" y2="{py:.2}" stroke="black"/><text x="{tx}" y="{ty:.2}" font-size="12" text-anchor="end">{}</text>"#,
                tick_label(y),
                l2 = l - 5.0,
                tx = l - 8.0,
                ty = py + 4.0
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="14" text-anchor="middle">{}</text>"#,
            l + w / 2.0,
            t + h + 45.0,
            escape(x_label)
        );
        let (yx, yy) = (l - 60.0, t + h / 2.0);
        let _ = writeln!(
            svg,
            r#"<text x="{yx:.2}" y="{yy:.2}" font-size="14" text-anchor="middle" transform="rotate(-90 {yx:.2} {yy:.2})">{}</text>"#,
            escape(y_label)
        );
    }
}

fn header(width: f64, height: f64, title: &str) -> String {
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"#);
    let _ = writeln!(svg, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{:.2}" y="28" font-size="16" text-anchor="middle">{}</text>"#, width / 2.0, escape(title));
    svg
}

/// One polyline per series; dashed series use a dash pattern.
pub fn line_plot_svg(plot: &LinePlot) -> Result<String> {
    let all: Vec<(f64, f64)> = plot.series.iter().flat_map(|s| s.points.iter().copied()).collect();
    if all.is_empty() {
        bail!("nothing to plot for '{}'", plot.title);
    }
    let fold = |f: fn(&(f64, f64)) -> f64| all.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (xa, xb) = fold(|p| p.0);
    let (ya, yb) = fold(|p| p.1);
    let (x0, x1) = if xb > xa { (xa, xb) } else { padded_range(xa, xb) };
    let (y0, y1) = padded_range(ya, yb);
    let frame = Frame { x0, x1, y0, y1, left: LEFT, top: TOP, w: WIDTH - LEFT - RIGHT, h: HEIGHT - TOP - BOTTOM };

    let mut svg = header(WIDTH, HEIGHT, &plot.title);
    frame.axes(&mut svg, &plot.x_label, &plot.y_label);
    for (i, s) in plot.series.iter().enumerate().filter(|(_, s)| !s.points.is_empty()) {
        let color = PALETTE[i % PALETTE.len()];
        let dash = if s.dashed { r#" stroke-dasharray="7 4""# } else { "" };
        let mut pts = String::with_capacity(s.points.len() * 16);
        for &(x, y) in &s.points {
            let _ = write!(pts, "{:.2},{:.2} ", frame.px(x), frame.py(y));
        }
        let _ = writeln!(svg, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#, pts.trim_end());
        let ly = TOP + 18.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT - 150.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="1.5"{dash}/><text x="{}" y="{}" font-size="12">{}</text>"#,
            lx + 30.0,
            lx + 36.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

const NEGATIVE: (f64, f64, f64) = (33.0, 102.0, 172.0);
const POSITIVE: (f64, f64, f64) = (178.0, 24.0, 43.0);
const COLOR_LEVELS: i32 = 24;

/// Blue below zero, white at zero, red above; `t ∈ [−1, 1]`.
fn diverging(t: f64) -> String {
    let (r, g, b) = if t < 0.0 { NEGATIVE } else { POSITIVE };
    let a = t.abs().min(1.0);
    let mix = |c: f64| (255.0 + (c - 255.0) * a).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(r), mix(g), mix(b))
}

fn quantize(v: f64, limit: f64) -> i32 {
    if limit == 0.0 {
        0
    } else {
        (v / limit * COLOR_LEVELS as f64).round() as i32
    }
}

/// Heatmap with a colour scale symmetric about zero, plus a colour bar.
pub fn heatmap_svg(grid: &WignerGrid, title: &str, x_label: &str, y_label: &str) -> Result<String> {
    let spec = &grid.spec;
    if spec.nx == 0 || spec.ny == 0 {
        bail!("empty grid");
    }
    let limit = grid.min().abs().max(grid.max().abs());
    let side = 460.0;
    let width = LEFT + side + 130.0;
    let height = TOP + side + BOTTOM;
    let dx = spec.dx();
    let dy = spec.dy();
    let frame = Frame {
        x0: spec.x_min - dx / 2.0,
        x1: spec.x_max + dx / 2.0,
        y0: spec.y_min - dy / 2.0,
        y1: spec.y_max + dy / 2.0,
        left: LEFT,
        top: TOP,
        w: side,
        h: side,
    };
    let cw = side / spec.nx as f64;
    let ch = side / spec.ny as f64;

    let mut svg = header(width, height, title);
    let _ = writeln!(svg, r#"<g shape-rendering="crispEdges">"#);
    for iy in 0..spec.ny {
        let y = TOP + (spec.ny - 1 - iy) as f64 * ch;
        let mut ix = 0;
        while ix < spec.nx {
            let level = quantize(grid.at(ix, iy), limit);
            let start = ix;
            while ix < spec.nx && quantize(grid.at(ix, iy), limit) == level {
                ix += 1;
            }
            if level != 0 {
                let _ = writeln!(
                    svg,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                    LEFT + start as f64 * cw,
                    y,
                    (ix - start) as f64 * cw + 0.05,
                    ch + 0.05,
                    diverging(level as f64 / COLOR_LEVELS as f64)
                );
            }
        }
    }
    let _ = writeln!(svg, "</g>");
    frame.axes(&mut svg, x_label, y_label);

    let bx = LEFT + side + 30.0;
    let bw = 20.0;
    let levels = 2 * COLOR_LEVELS + 1;
    let bh = side / levels as f64;
    for i in 0..levels {
        let level = COLOR_LEVELS - i as i32;
        let _ = writeln!(
            svg,
            r#"<rect x="{bx}" y="{:.2}" width="{bw}" height="{:.2}" fill="{}"/>"#,
            TOP + i as f64 * bh,
            bh + 0.05,
            diverging(level as f64 / COLOR_LEVELS as f64)
        );
    }
    let _ = writeln!(svg, r#"<rect x="{bx}" y="{TOP}" width="{bw}" height="{side}" fill="none" stroke="black"/>"#);
    for (frac, v) in [(0.0, limit), (0.5, 0.0), (1.0, -limit)] {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.2}" font-size="12">{}</text>"#,
            bx + bw + 6.0,
            TOP + frac * side + 4.0,
            format!("{v:.3}").replace("-0.000", "0.000")
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

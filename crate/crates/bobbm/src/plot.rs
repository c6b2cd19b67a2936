//! Minimal SVG line plots, emitted as a pure function of run data so any
//! record can be re-plotted offline.

use std::path::Path;

use crate::{Error, Result};

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

pub struct PlotSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

fn transform(v: f64, log: bool) -> f64 {
    if log {
        v.max(f64::MIN_POSITIVE).log10()
    } else {
        v
    }
}

/// Render the plot as an SVG document string.
pub fn render(spec: &PlotSpec) -> String {
    let pts: Vec<(f64, f64)> = spec
        .series
        .iter()
        .flat_map(|s| s.points.iter())
        .map(|&(x, y)| (transform(x, spec.log_x), transform(y, spec.log_y)))
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() || x0 == x1 {
        x0 -= 0.5;
        x1 = x0 + 1.0;
    }
    if !y0.is_finite() || y0 == y1 {
        y0 -= 0.5;
        y1 = y0 + 1.0;
    }
    let sx = (W - 2.0 * MARGIN) / (x1 - x0);
    let sy = (H - 2.0 * MARGIN) / (y1 - y0);
    let px = |x: f64| MARGIN + (transform(x, spec.log_x) - x0) * sx;
    let py = |y: f64| H - MARGIN - (transform(y, spec.log_y) - y0) * sy;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">{}</text>\n",
        W / 2.0,
        escape(&spec.title)
    ));
    // axes
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n<line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        b = H - MARGIN,
        r = W - MARGIN,
        t = MARGIN
    ));
    // tick labels at the corners of the data range
    let fmt_tick = |v: f64, log: bool| {
        let raw = if log { 10f64.powf(v) } else { v };
        format!("{raw:.3}")
    };
    svg.push_str(&format!(
        "<text x=\"{m}\" y=\"{y}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
        fmt_tick(x0, spec.log_x),
        m = MARGIN,
        y = H - MARGIN + 16.0
    ));
    svg.push_str(&format!(
        "<text x=\"{x}\" y=\"{y}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
        fmt_tick(x1, spec.log_x),
        x = W - MARGIN,
        y = H - MARGIN + 16.0
    ));
    svg.push_str(&format!(
        "<text x=\"{x}\" y=\"{y}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
        fmt_tick(y1, spec.log_y),
        x = MARGIN - 6.0,
        y = MARGIN + 4.0
    ));
    svg.push_str(&format!(
        "<text x=\"{x}\" y=\"{y}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
        fmt_tick(y0, spec.log_y),
        x = MARGIN - 6.0,
        y = H - MARGIN
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
        W / 2.0,
        H - 14.0,
        escape(&spec.x_label)
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        H / 2.0,
        H / 2.0,
        escape(&spec.y_label)
    ));
    for (i, series) in spec.series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = series
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            path.join(" ")
        ));
        for &(x, y) in &series.points {
            svg.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{color}\"/>\n",
                px(x),
                py(y)
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{y}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{color}\">{}</text>\n",
            escape(&series.label),
            x = W - MARGIN - 150.0,
            y = MARGIN + 16.0 * (i + 1) as f64
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn write_svg(spec: &PlotSpec, path: &Path) -> Result<()> {
    std::fs::write(path, render(spec))
        .map_err(|e| Error::OutputWrite { path: path.display().to_string(), source: e })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

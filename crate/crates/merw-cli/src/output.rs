//! Artifact assembly: CSV and JSON with an embedded config echo, plus a
//! self-contained SVG line chart for sweeps.
//!
//! Every data artifact starts with the config echo so it can be verified
//! later; floats are rendered with Rust's shortest round-trip formatting,
//! which is platform-independent and parses back exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};

use crate::config::ConfigEcho;

/// A CSV artifact: comment preamble, header, data rows, comment trailer.
pub struct CsvArtifact {
    pub config: ConfigEcho,
    pub header: String,
    pub rows: Vec<String>,
    pub trailers: Vec<String>,
}

impl CsvArtifact {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# merw {}\n", self.config.command));
        out.push_str(&format!("# config = {}\n", self.config.to_json()));
        out.push_str(&self.header);
        out.push('\n');
        for row in &self.rows {
            out.push_str(row);
            out.push('\n');
        }
        for t in &self.trailers {
            out.push_str("# ");
            out.push_str(t);
            out.push('\n');
        }
        out
    }
}

/// A JSON artifact: the config echo plus a command-specific body.
pub fn render_json(config: &ConfigEcho, body: serde_json::Value) -> String {
    let mut doc = serde_json::Map::new();
    doc.insert(
        "config".to_string(),
        serde_json::to_value(config).expect("config serializes"),
    );
    if let serde_json::Value::Object(map) = body {
        for (k, v) in map {
            doc.insert(k, v);
        }
    }
    let mut text =
        serde_json::to_string_pretty(&serde_json::Value::Object(doc)).expect("artifact serializes");
    text.push('\n');
    text
}

/// Write to the path, or stdout when no path was given.
pub fn emit(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, content).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            std::io::stdout().write_all(content.as_bytes())?;
            Ok(())
        }
    }
}

/// One plotted series: label plus (x, y, stderr) points.
pub struct Series<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub points: Vec<(f64, f64, f64)>,
}

/// Self-contained SVG line chart with ±2·stderr error bars.
pub fn render_svg(config: &ConfigEcho, title: &str, series: &[Series<'_>]) -> String {
    const W: f64 = 900.0;
    const H: f64 = 560.0;
    const L: f64 = 75.0;
    const R: f64 = 880.0;
    const T: f64 = 50.0;
    const B: f64 = 500.0;

    let all: Vec<(f64, f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .collect();
    let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y, se) in &all {
        x_lo = x_lo.min(x);
        x_hi = x_hi.max(x);
        y_lo = y_lo.min(y - 2.0 * se);
        y_hi = y_hi.max(y + 2.0 * se);
    }
    if !x_lo.is_finite() {
        x_lo = 0.0;
        x_hi = 1.0;
        y_lo = 0.0;
        y_hi = 1.0;
    }
    y_lo = y_lo.min(0.0);
    if y_hi <= y_lo {
        y_hi = y_lo + 1.0;
    }
    if x_hi <= x_lo {
        x_hi = x_lo + 1.0;
    }
    let pad = 0.05 * (y_hi - y_lo);
    y_hi += pad;
    let sx = |x: f64| L + (x - x_lo) / (x_hi - x_lo) * (R - L);
    let sy = |y: f64| B - (y - y_lo) / (y_hi - y_lo) * (B - T);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">\n"
    ));
    svg.push_str(&format!("<!-- config = {} -->\n", config.to_json()));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"28\" font-family=\"sans-serif\" font-size=\"18\" \
         text-anchor=\"middle\">{title}</text>\n",
        (L + R) / 2.0
    ));
    svg.push_str(&format!(
        "<line x1=\"{L}\" y1=\"{B}\" x2=\"{R}\" y2=\"{B}\" stroke=\"black\"/>\n\
         <line x1=\"{L}\" y1=\"{T}\" x2=\"{L}\" y2=\"{B}\" stroke=\"black\"/>\n"
    ));
    for i in 0..=5 {
        let fx = x_lo + (x_hi - x_lo) * i as f64 / 5.0;
        let fy = y_lo + (y_hi - y_lo) * i as f64 / 5.0;
        svg.push_str(&format!(
            "<line x1=\"{x:.1}\" y1=\"{B}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n\
             <text x=\"{x:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" \
             text-anchor=\"middle\">{fx:.3}</text>\n",
            B + 6.0,
            B + 22.0,
            x = sx(fx)
        ));
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{L}\" y2=\"{y:.1}\" stroke=\"black\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" \
             text-anchor=\"end\">{fy:.4}</text>\n",
            L - 6.0,
            L - 10.0,
            sy(fy) + 4.0,
            y = sy(fy)
        ));
    }
    for (si, s) in series.iter().enumerate() {
        let path: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y, _)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            s.color,
            path.join(" ")
        ));
        for &(x, y, se) in &s.points {
            svg.push_str(&format!(
                "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"{}\"/>\n",
                sy(y - 2.0 * se),
                sy(y + 2.0 * se),
                s.color,
                x = sx(x)
            ));
            svg.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{}\"/>\n",
                sx(x),
                sy(y),
                s.color
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"13\" \
             fill=\"{}\">{} (bars: ±2·stderr)</text>\n",
            L + 12.0,
            T + 18.0 + 18.0 * si as f64,
            s.color,
            s.label
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

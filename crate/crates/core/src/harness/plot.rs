//! Log-log error plots as standalone SVG.

use std::fmt::Write as _;
use std::path::Path;

use super::study::{group_series, ConvergenceRecord};
use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 190.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] =
    ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Slopes of the dashed reference lines.
    pub guide_slopes: Vec<f64>,
}

impl Default for PlotSpec {
    fn default() -> Self {
        PlotSpec {
            title: String::new(),
            x_label: "tau".into(),
            y_label: "error".into(),
            guide_slopes: vec![1.0, 2.0],
        }
    }
}

/// A guide `error = c * tau^slope` spanning `[tau_lo, tau_hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuideLine {
    pub slope: f64,
    pub tau_lo: f64,
    pub tau_hi: f64,
    pub err_lo: f64,
    pub err_hi: f64,
}

/// Guides are anchored a factor 2 below the largest error at the largest tau.
pub fn guide_lines(records: &[ConvergenceRecord], slopes: &[f64]) -> Vec<GuideLine> {
    let tau_lo = records.iter().map(|r| r.tau).fold(f64::INFINITY, f64::min);
    let tau_hi = records.iter().map(|r| r.tau).fold(0.0, f64::max);
    let anchor = records
        .iter()
        .filter(|r| r.tau == tau_hi)
        .map(|r| r.error)
        .fold(0.0, f64::max)
        / 2.0;
    slopes
        .iter()
        .map(|&slope| GuideLine {
            slope,
            tau_lo,
            tau_hi,
            err_lo: anchor * (tau_lo / tau_hi).powf(slope),
            err_hi: anchor,
        })
        .collect()
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct LogAxis {
    lo: f64,
    hi: f64,
}

impl LogAxis {
    fn covering(values: impl Iterator<Item = f64>) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| *v > 0.0 && v.is_finite()) {
            lo = lo.min(v.log10());
            hi = hi.max(v.log10());
        }
        if !lo.is_finite() {
            (lo, hi) = (-1.0, 0.0);
        }
        let (lo, hi) = (lo.floor(), hi.ceil());
        LogAxis { lo, hi: if hi > lo { hi } else { lo + 1.0 } }
    }

    fn frac(&self, v: f64) -> f64 {
        (v.log10() - self.lo) / (self.hi - self.lo)
    }

    fn decades(&self) -> impl Iterator<Item = i32> {
        (self.lo as i32)..=(self.hi as i32)
    }
}

/// Render the records as a log-log plot of error against tau, one polyline
/// per series.
pub fn emit_plot(records: &[ConvergenceRecord], spec: &PlotSpec) -> Result<String> {
    let plotted: Vec<&ConvergenceRecord> = records.iter().filter(|r| r.error > 0.0).collect();
    if plotted.is_empty() {
        return Err(Error::invalid("nothing to plot: no records with positive error"));
    }
    let owned: Vec<ConvergenceRecord> = plotted.into_iter().cloned().collect();
    let series = group_series(&owned);
    let guides = guide_lines(&owned, &spec.guide_slopes);

    let x_axis = LogAxis::covering(owned.iter().map(|r| r.tau));
    let y_axis = LogAxis::covering(
        owned.iter().map(|r| r.error).chain(guides.iter().flat_map(|g| [g.err_lo, g.err_hi])),
    );
    let pw = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let ph = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |tau: f64| MARGIN_LEFT + pw * x_axis.frac(tau);
    let py = |err: f64| MARGIN_TOP + ph * (1.0 - y_axis.frac(err));

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    if !spec.title.is_empty() {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
            MARGIN_LEFT + pw / 2.0,
            escape(&spec.title)
        );
    }
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for d in x_axis.decades() {
        let x = px(10f64.powi(d));
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{MARGIN_TOP}" x2="{x:.2}" y2="{:.2}" stroke="#dddddd"/>"##,
            MARGIN_TOP + ph
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">1e{d}</text>"#,
            MARGIN_TOP + ph + 18.0
        );
    }
    for d in y_axis.decades() {
        let y = py(10f64.powi(d));
        let _ = writeln!(
            svg,
            r##"<line x1="{MARGIN_LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##,
            MARGIN_LEFT + pw
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{d}</text>"#,
            MARGIN_LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + pw / 2.0,
        HEIGHT - 16.0,
        escape(&spec.x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">{}</text>"#,
        MARGIN_TOP + ph / 2.0,
        MARGIN_TOP + ph / 2.0,
        escape(&spec.y_label)
    );

    for g in &guides {
        let _ = writeln!(
            svg,
            r#"<line class="guide" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="gray" stroke-dasharray="6 4"/>"#,
            px(g.tau_lo),
            py(g.err_lo),
            px(g.tau_hi),
            py(g.err_hi)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" fill="gray">slope {}</text>"#,
            px(g.tau_lo) + 4.0,
            py(g.err_lo) - 4.0,
            g.slope
        );
    }

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> =
            s.points.iter().map(|&(t, e)| format!("{:.2},{:.2}", px(t), py(e))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        for &(t, e) in &s.points {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                px(t),
                py(e)
            );
        }
        let ly = MARGIN_TOP + 10.0 + 18.0 * i as f64;
        let lx = MARGIN_LEFT + pw + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="1.5"/>"#,
            lx + 18.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 24.0,
            ly + 4.0,
            escape(&s.label())
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn write_plot(records: &[ConvergenceRecord], spec: &PlotSpec, path: &Path) -> Result<()> {
    let svg = emit_plot(records, spec)?;
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, svg)?;
    Ok(())
}

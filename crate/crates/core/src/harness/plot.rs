use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{read_aggregate, Aggregate, METRICS};
use crate::error::Result;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 45.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Mean curve with a ±1 stdev band at one episode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandPoint {
    pub x: f64,
    pub lo: f64,
    pub mid: f64,
    pub hi: f64,
}

/// A labeled curve in a chart.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<BandPoint>,
}

/// Band of `metric` over episodes; episodes without a mean are skipped and a
/// missing stdev counts as 0.
pub fn band_points(agg: &Aggregate, metric: &str) -> Vec<BandPoint> {
    let Some(i) = agg.metric_index(metric) else {
        return Vec::new();
    };
    agg.rows
        .iter()
        .filter_map(|r| {
            let mid = r.mean[i]?;
            let sd = r.std[i].unwrap_or(0.0);
            Some(BandPoint {
                x: r.episode as f64,
                lo: mid - sd,
                mid,
                hi: mid + sd,
            })
        })
        .collect()
}

fn extent(series: &[Series]) -> Option<(f64, f64, f64, f64)> {
    let pts = series.iter().flat_map(|s| s.points.iter());
    let mut it = pts.peekable();
    it.peek()?;
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in it {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.lo);
        y1 = y1.max(p.hi);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    Some((x0, x1, y0, y1))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// SVG 1.1 line chart: one band polygon and one mean polyline per series.
/// Without data the axes are drawn alone.
pub fn render_svg(title: &str, series: &[Series]) -> String {
    let (pw, ph) = (WIDTH - MARGIN_L - MARGIN_R, HEIGHT - MARGIN_T - MARGIN_B);
    let (x0, x1, y0, y1) = extent(series).unwrap_or((0.0, 1.0, 0.0, 1.0));
    let sx = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| MARGIN_T + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="18" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        MARGIN_L + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<g class="axes" stroke="black" stroke-width="1"><line x1="{l}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{l}" y1="{t}" x2="{l}" y2="{b}"/></g>"#,
        l = MARGIN_L,
        r = MARGIN_L + pw,
        t = MARGIN_T,
        b = MARGIN_T + ph
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="10" text-anchor="middle">{}</text>"#,
            sx(xv),
            MARGIN_T + ph + 15.0,
            fmt_tick(xv)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="10" text-anchor="end">{}</text>"#,
            MARGIN_L - 5.0,
            sy(yv) + 3.0,
            fmt_tick(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="middle">episode</text>"#,
        MARGIN_L + pw / 2.0,
        HEIGHT - 8.0
    );

    for (k, ser) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        if !ser.points.is_empty() {
            let upper = ser.points.iter().map(|p| format!("{:.3},{:.3}", sx(p.x), sy(p.hi)));
            let lower = ser.points.iter().rev().map(|p| format!("{:.3},{:.3}", sx(p.x), sy(p.lo)));
            let band: Vec<String> = upper.chain(lower).collect();
            let _ = writeln!(
                s,
                r#"<polygon class="band" points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
                band.join(" ")
            );
            let line: Vec<String> = ser
                .points
                .iter()
                .map(|p| format!("{:.3},{:.3}", sx(p.x), sy(p.mid)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline class="mean" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                line.join(" ")
            );
        }
        let ly = MARGIN_T + 10.0 + 16.0 * k as f64;
        let lx = MARGIN_L + pw + 10.0;
        let _ = writeln!(
            s,
            r#"<g class="legend"><line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text></g>"#,
            lx + 18.0,
            lx + 22.0,
            ly + 4.0,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        format!("{:.2}", v).trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Writes `<metric>.svg` into `out_dir` for every metric with data in any
/// input, overlaying the inputs as labeled series. Inputs are
/// `(label, aggregate CSV)` pairs.
pub fn emit_plots(inputs: &[(String, PathBuf)], out_dir: &Path) -> Result<Vec<PathBuf>> {
    let aggs = inputs
        .iter()
        .map(|(label, p)| Ok((label.clone(), read_aggregate(p)?)))
        .collect::<Result<Vec<_>>>()?;
    fs::create_dir_all(out_dir)?;

    let mut metrics: Vec<String> = Vec::new();
    for (_, a) in &aggs {
        for m in &a.metrics {
            if !metrics.contains(m) {
                metrics.push(m.clone());
            }
        }
    }
    let with_data: Vec<String> = metrics
        .iter()
        .filter(|m| aggs.iter().any(|(_, a)| !band_points(a, m).is_empty()))
        .cloned()
        .collect();
    let metrics = if with_data.is_empty() {
        vec![metrics.first().cloned().unwrap_or_else(|| METRICS[0].to_string())]
    } else {
        with_data
    };

    let mut out = Vec::new();
    for m in &metrics {
        let series: Vec<Series> = aggs
            .iter()
            .map(|(label, a)| Series {
                label: label.clone(),
                points: band_points(a, m),
            })
            .collect();
        let path = out_dir.join(format!("{m}.svg"));
        fs::write(&path, render_svg(m, &series))?;
        out.push(path);
    }
    Ok(out)
}

//! Minimal standalone SVG figures.

use std::fmt::Write;

use waytime_core::evalkit::{Histogram, Method};
use waytime_core::seqmodel::AttentionMap;
use waytime_core::Point2;

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 40.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn open(w: f64, h: f64) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    )
}

fn color(m: Method) -> &'static str {
    match m {
        Method::Transformer => "#1f77b4",
        Method::Mlp => "#2ca02c",
        Method::Tvp => "#d62728",
    }
}

/// Trajectory polyline with the waypoints marked, equal axis scale, y up.
pub fn path(waypoints: &[Point2], trajectory: &[Point2]) -> String {
    let all = waypoints.iter().chain(trajectory);
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in all {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let span = (x1 - x0).max(y1 - y0).max(1e-12);
    let k = (W.min(H) - 2.0 * MARGIN) / span;
    let map = |p: &Point2| (MARGIN + (p.x - x0) * k, H - MARGIN - (p.y - y0) * k);
    let mut s = open(W, H);
    if !trajectory.is_empty() {
        s.push_str("<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"");
        for p in trajectory {
            let (x, y) = map(p);
            let _ = write!(s, "{x:.3},{y:.3} ");
        }
        s.push_str("\"/>\n");
    }
    for (i, p) in waypoints.iter().enumerate() {
        let (x, y) = map(p);
        let _ = writeln!(s, "<circle cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"4\" fill=\"#d62728\"><title>waypoint {i}</title></circle>");
    }
    s.push_str("</svg>\n");
    s
}

/// Grouped bars, one group per bin, one colour per method.
pub fn histogram(hists: &[(Method, Histogram)]) -> String {
    let mut s = open(W, H);
    let bins = hists.iter().map(|(_, h)| h.counts.len()).max().unwrap_or(0);
    let top = hists.iter().flat_map(|(_, h)| h.counts.iter().copied()).max().unwrap_or(0).max(1) as f64;
    let plot_w = W - 2.0 * MARGIN;
    let plot_h = H - 2.0 * MARGIN;
    if bins > 0 && !hists.is_empty() {
        let group = plot_w / bins as f64;
        let bar = group / hists.len() as f64;
        for (k, (m, h)) in hists.iter().enumerate() {
            for (i, &c) in h.counts.iter().enumerate() {
                let bh = plot_h * c as f64 / top;
                let x = MARGIN + i as f64 * group + k as f64 * bar;
                let y = H - MARGIN - bh;
                let _ = writeln!(
                    s,
                    "<rect x=\"{x:.3}\" y=\"{y:.3}\" width=\"{bar:.3}\" height=\"{bh:.3}\" fill=\"{}\"><title>{} bin {i}: {c}</title></rect>",
                    color(*m),
                    escape(m.name())
                );
            }
        }
        if let Some((_, h)) = hists.first() {
            let _ = writeln!(
                s,
                "<text x=\"{MARGIN}\" y=\"{:.1}\" font-size=\"12\">{:.3}</text>\n<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"end\">{:.3}</text>",
                H - MARGIN / 3.0,
                h.lo,
                W - MARGIN,
                H - MARGIN / 3.0,
                h.hi
            );
        }
    }
    for (k, (m, _)) in hists.iter().enumerate() {
        let y = MARGIN / 2.0 + 14.0 * k as f64;
        let _ = writeln!(
            s,
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{}\"/><text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\">E_{}</text>",
            W - 120.0,
            y - 9.0,
            color(*m),
            W - 104.0,
            y,
            escape(m.name())
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Grayscale heat map, darker = more weight; rows are decoder steps.
pub fn heatmap(map: &AttentionMap, title: &str) -> String {
    let cell = (400.0 / map.rows.max(map.cols).max(1) as f64).min(40.0);
    let w = 2.0 * MARGIN + cell * map.cols as f64;
    let h = 2.0 * MARGIN + cell * map.rows as f64;
    let mut s = open(w, h);
    let _ = writeln!(s, "<text x=\"{MARGIN}\" y=\"{:.1}\" font-size=\"12\">{}</text>", MARGIN / 2.0, escape(title));
    for i in 0..map.rows {
        for j in 0..map.cols {
            let v = map.get(i, j).clamp(0.0, 1.0);
            let g = (255.0 * (1.0 - v)).round() as u8;
            let _ = writeln!(
                s,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{cell:.2}\" height=\"{cell:.2}\" fill=\"rgb({g},{g},{g})\"><title>{i},{j}: {v:.4}</title></rect>",
                MARGIN + j as f64 * cell,
                MARGIN + i as f64 * cell
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

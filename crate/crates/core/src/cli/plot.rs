//! Static SVG figures: decision regions, success probability against shot
//! count, and cost traces.

use std::fmt::Write as _;

use crate::classifier::LabelRule;

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;

const CLASS_COLORS: [&str; 2] = ["#1f77b4", "#d62728"];
const SERIES_COLORS: [&str; 8] = [
    "#000000", "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2",
];

/// Maps data coordinates onto the plot rectangle.
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open(svg: &mut String, provenance: &str, title: &str) {
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, "<!-- {} -->", escape(provenance).replace("--", "- -"));
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<defs><clipPath id="plot"><rect x="{LEFT}" y="{TOP}" width="{}" height="{}"/></clipPath></defs>"#,
        WIDTH - LEFT - RIGHT,
        HEIGHT - TOP - BOTTOM
    );
}

fn close(svg: &mut String) {
    svg.push_str("</svg>\n");
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

/// Box, y ticks and axis labels. X ticks are drawn by the caller.
fn axes(svg: &mut String, frame: &Frame, y_ticks: &[f64], x_label: &str, y_label: &str) {
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - LEFT - RIGHT,
        HEIGHT - TOP - BOTTOM
    );
    for &t in y_ticks {
        let y = frame.py(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        HEIGHT - 14.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{0:.2}" text-anchor="middle" transform="rotate(-90 16 {0:.2})">{1}</text>"#,
        (TOP + HEIGHT - BOTTOM) / 2.0,
        escape(y_label)
    );
}

fn x_tick(svg: &mut String, x: f64, label: &str) {
    let y = HEIGHT - BOTTOM;
    let _ = writeln!(
        svg,
        r#"<line x1="{x:.2}" y1="{y}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
        y + 5.0,
        y + 18.0,
        escape(label)
    );
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// A classified test point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionPoint {
    pub x: [f64; 2],
    pub predicted: u8,
}

/// Test points on `[-1, 1]^2` coloured by predicted class, with the true
/// boundary dashed and `P` in the upper right corner.
pub fn regions_svg(points: &[RegionPoint], rule: Option<&LabelRule>, p: f64, title: &str, provenance: &str) -> String {
    let frame = Frame {
        x: (-1.0, 1.0),
        y: (-1.0, 1.0),
    };
    let mut svg = String::new();
    open(&mut svg, provenance, title);
    axes(&mut svg, &frame, &linspace(-1.0, 1.0, 5), "x1", "x2");
    for t in linspace(-1.0, 1.0, 5) {
        x_tick(&mut svg, frame.px(t), &fmt_tick(t));
    }
    svg.push_str("<g class=\"points\">\n");
    for pt in points {
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}"/>"#,
            frame.px(pt.x[0]),
            frame.py(pt.x[1]),
            CLASS_COLORS[usize::from(pt.predicted.min(1))]
        );
    }
    svg.push_str("</g>\n");
    let boundary = r#"fill="none" stroke="black" stroke-width="1.5" stroke-dasharray="6 4" clip-path="url(#plot)""#;
    match rule {
        Some(LabelRule::Circle { center, radius }) => {
            let _ = writeln!(
                svg,
                r#"<ellipse class="boundary" cx="{:.2}" cy="{:.2}" rx="{:.2}" ry="{:.2}" {boundary}/>"#,
                frame.px(center[0]),
                frame.py(center[1]),
                frame.px(center[0] + radius) - frame.px(center[0]),
                frame.py(center[1]) - frame.py(center[1] + radius)
            );
        }
        Some(LabelRule::HalfPlane { normal, offset }) => {
            // normal . x + offset = 0, extended past the frame and clipped.
            let (a, b) = (normal[0], normal[1]);
            let ends = if b.abs() >= a.abs() {
                [-2.0, 2.0].map(|x| (x, -(offset + a * x) / b))
            } else {
                [-2.0, 2.0].map(|y| (-(offset + b * y) / a, y))
            };
            if ends.iter().all(|(x, y)| x.is_finite() && y.is_finite()) {
                let _ = writeln!(
                    svg,
                    r#"<line class="boundary" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" {boundary}/>"#,
                    frame.px(ends[0].0),
                    frame.py(ends[0].1),
                    frame.px(ends[1].0),
                    frame.py(ends[1].1)
                );
            }
        }
        None => {}
    }
    let _ = writeln!(
        svg,
        r#"<text class="annotation" x="{}" y="{}" text-anchor="end" font-size="14">P = {p:.3}</text>"#,
        WIDTH - RIGHT - 8.0,
        TOP + 20.0
    );
    close(&mut svg);
    svg
}

/// Mean and spread of `P` for one shot setting.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub label: String,
    pub mean: f64,
    pub std: f64,
}

/// Mean `P` per shot setting with standard deviation bars, one evenly
/// spaced category per point in the given order.
pub fn curve_svg(points: &[CurvePoint], title: &str, provenance: &str) -> String {
    let lowest = points
        .iter()
        .map(|c| c.mean - c.std)
        .fold(1.0f64, f64::min)
        .clamp(0.0, 1.0);
    let y_lo = ((lowest - 0.05) * 10.0).floor().max(0.0) / 10.0;
    let y_lo = if y_lo >= 1.0 { 0.9 } else { y_lo };
    let frame = Frame {
        x: (-0.5, points.len() as f64 - 0.5),
        y: (y_lo, 1.0),
    };
    let ticks: Vec<f64> = linspace(y_lo, 1.0, ((1.0 - y_lo) * 10.0).round() as usize + 1);
    let mut svg = String::new();
    open(&mut svg, provenance, title);
    axes(&mut svg, &frame, &ticks, "N_all", "mean P");
    for (i, c) in points.iter().enumerate() {
        x_tick(&mut svg, frame.px(i as f64), &c.label);
    }
    let coords: Vec<String> = points
        .iter()
        .enumerate()
        .map(|(i, c)| format!("{:.2},{:.2}", frame.px(i as f64), frame.py(c.mean)))
        .collect();
    let _ = writeln!(
        svg,
        r#"<polyline class="mean" points="{}" fill="none" stroke="black" stroke-width="1.5"/>"#,
        coords.join(" ")
    );
    for (i, c) in points.iter().enumerate() {
        let x = frame.px(i as f64);
        let (top, bottom) = (frame.py(c.mean + c.std), frame.py(c.mean - c.std));
        let _ = writeln!(
            svg,
            r#"<line class="errorbar" x1="{x:.2}" y1="{top:.2}" x2="{x:.2}" y2="{bottom:.2}" stroke="black" clip-path="url(#plot)"/><line x1="{:.2}" y1="{top:.2}" x2="{:.2}" y2="{top:.2}" stroke="black" clip-path="url(#plot)"/><line x1="{:.2}" y1="{bottom:.2}" x2="{:.2}" y2="{bottom:.2}" stroke="black" clip-path="url(#plot)"/>"#,
            x - 4.0,
            x + 4.0,
            x - 4.0,
            x + 4.0
        );
        let _ = writeln!(
            svg,
            r#"<circle cx="{x:.2}" cy="{:.2}" r="3.5" fill="black"/>"#,
            frame.py(c.mean)
        );
    }
    close(&mut svg);
    svg
}

/// Exact cost after each coordinate update, one line per series.
pub fn trace_svg(series: &[(String, Vec<f64>)], title: &str, provenance: &str) -> String {
    let longest = series.iter().map(|(_, v)| v.len()).max().unwrap_or(0).max(2);
    let (lo, hi) = series
        .iter()
        .flat_map(|(_, v)| v.iter().copied())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let (lo, hi) = if lo.is_finite() && hi > lo {
        (lo.max(0.0) * 0.95, hi * 1.05)
    } else if lo.is_finite() {
        (lo - 0.05, lo + 0.05)
    } else {
        (0.0, 1.0)
    };
    let frame = Frame {
        x: (0.0, (longest - 1) as f64),
        y: (lo, hi),
    };
    let mut svg = String::new();
    open(&mut svg, provenance, title);
    axes(&mut svg, &frame, &linspace(lo, hi, 5), "update", "exact cost");
    for t in linspace(0.0, (longest - 1) as f64, 5) {
        x_tick(&mut svg, frame.px(t), &format!("{}", t.round()));
    }
    for (k, (name, values)) in series.iter().enumerate() {
        let color = SERIES_COLORS[k % SERIES_COLORS.len()];
        let coords: Vec<String> = values
            .iter()
            .enumerate()
            .map(|(i, v)| format!("{:.2},{:.2}", frame.px(i as f64), frame.py(*v)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.2"/>"#,
            coords.join(" ")
        );
        let ly = TOP + 16.0 + 15.0 * k as f64;
        let lx = WIDTH - RIGHT - 90.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 18.0,
            lx + 24.0,
            ly + 4.0,
            escape(name)
        );
    }
    close(&mut svg);
    svg
}

//! Minimal SVG rendering of the data, the fitted mean and the band.

use std::fmt::Write;

use scband::{BandResult, ObservationSet};

use crate::ingest::DomainMap;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Roughly `count` round tick positions covering `[lo, hi]`.
pub fn nice_ticks(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let span = hi - lo;
    if !(span > 0.0) || !span.is_finite() {
        return vec![lo];
    }
    let raw = span / count.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn label(v: f64) -> String {
    let r = (v * 1e6).round() / 1e6;
    if r == 0.0 {
        "0".into()
    } else {
        format!("{r}")
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

/// Runs of consecutive grid indices where the band is defined.
fn defined_runs(band: &BandResult) -> Vec<Vec<usize>> {
    let mut runs: Vec<Vec<usize>> = Vec::new();
    let mut current = Vec::new();
    for m in 0..band.grid.len() {
        if band.scale[m].is_finite() {
            current.push(m);
        } else if !current.is_empty() {
            runs.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        runs.push(current);
    }
    runs
}

fn path(points: impl Iterator<Item = (f64, f64)>) -> String {
    let mut d = String::new();
    for (k, (x, y)) in points.enumerate() {
        let _ = write!(d, "{}{:.2},{:.2}", if k == 0 { "M" } else { " L" }, x, y);
    }
    d
}

/// Renders the band on the raw design scale. `metadata` is embedded
/// verbatim (escaped) in the document's `<metadata>` element.
pub fn band_svg(
    band: &BandResult,
    data: &ObservationSet,
    domain: &DomainMap,
    labels: [&str; 3],
    metadata: &str,
) -> String {
    let [title, xlab, ylab] = labels;
    let finite = |v: &f64| v.is_finite();
    let ys = data
        .y()
        .iter()
        .chain(band.lower.iter())
        .chain(band.upper.iter())
        .copied()
        .filter(finite);
    let (mut y0, mut y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !(y1 > y0) {
        y0 -= 1.0;
        y1 += 1.0;
    }
    let pad = 0.05 * (y1 - y0);
    let f = Frame {
        x0: domain.raw_min,
        x1: domain.raw_max,
        y0: y0 - pad,
        y1: y1 + pad,
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, "<metadata>{}</metadata>", escape(metadata));
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );

    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        HEIGHT - 10.0,
        escape(xlab)
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(16,{:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (TOP + HEIGHT - BOTTOM) / 2.0,
        escape(ylab)
    );

    // axes and ticks
    let (bx, by) = (HEIGHT - BOTTOM, LEFT);
    let _ = writeln!(
        s,
        r#"<g stroke="black" fill="none"><path d="M{by},{TOP} L{by},{bx} L{:.1},{bx}"/></g>"#,
        WIDTH - RIGHT
    );
    for t in nice_ticks(f.x0, f.x1, 8) {
        let x = f.px(t);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{bx}" x2="{x:.2}" y2="{:.1}" stroke="black"/><text x="{x:.2}" y="{:.1}" text-anchor="middle">{}</text>"#,
            bx + 5.0,
            bx + 19.0,
            label(t)
        );
    }
    for t in nice_ticks(f.y0, f.y1, 6) {
        let y = f.py(t);
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{y:.2}" x2="{by}" y2="{y:.2}" stroke="black"/><text x="{:.1}" y="{:.2}" text-anchor="end">{}</text>"#,
            by - 5.0,
            by - 8.0,
            y + 4.0,
            label(t)
        );
    }

    // observations
    let _ = writeln!(s, r##"<g fill="#9a9a9a" fill-opacity="0.5">"##);
    for (&u, &y) in data.x().iter().zip(data.y()) {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="1.6"/>"#, f.px(domain.to_raw(u)), f.py(y));
    }
    let _ = writeln!(s, "</g>");

    // band and mean
    for run in defined_runs(band) {
        let upper = run.iter().map(|&m| (f.px(domain.to_raw(band.grid[m])), f.py(band.upper[m])));
        let lower = run.iter().rev().map(|&m| (f.px(domain.to_raw(band.grid[m])), f.py(band.lower[m])));
        let _ = writeln!(
            s,
            r##"<path d="{} Z" fill="#3b75af" fill-opacity="0.25" stroke="#3b75af" stroke-width="1"/>"##,
            path(upper.chain(lower))
        );
        let mean = run.iter().map(|&m| (f.px(domain.to_raw(band.grid[m])), f.py(band.mhat[m])));
        let _ = writeln!(s, r##"<path d="{}" fill="none" stroke="#c0392b" stroke-width="2"/>"##, path(mean));
    }
    s.push_str("</svg>\n");
    s
}

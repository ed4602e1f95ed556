//! Self-contained SVG line charts.
//!
//! Output depends only on the telemetry, so identical CSV input yields
//! identical bytes. Long traces are thinned to a fixed stride.

use std::fmt::Write;

use gvf_fleet::sim::Telemetry;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 130.0, 40.0, 50.0);
const MAX_POINTS: usize = 2000;
const PALETTE: [&str; 10] =
    ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN.0 + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - MARGIN.0 - MARGIN.1)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN.3 - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - MARGIN.2 - MARGIN.3)
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    let span = hi - lo;
    if span <= 1e-12 * (1.0 + lo.abs()) {
        return (lo - 0.5, hi + 0.5);
    }
    (lo - 0.05 * span, hi + 0.05 * span)
}

fn extent(series: &[Series], pick: impl Fn(&(f64, f64)) -> f64) -> (f64, f64) {
    series
        .iter()
        .flat_map(|s| s.points.iter().map(&pick))
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn thin(points: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    if points.len() <= MAX_POINTS {
        return points;
    }
    let stride = points.len().div_ceil(MAX_POINTS);
    let last = *points.last().expect("non-empty");
    let mut out: Vec<(f64, f64)> = points.into_iter().step_by(stride).collect();
    if out.last() != Some(&last) {
        out.push(last);
    }
    out
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".to_string() } else { s.to_string() }
}

/// Round tick positions: steps of 1, 2 or 5 times a power of ten.
fn ticks(range: (f64, f64)) -> Vec<f64> {
    let raw = (range.1 - range.0) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (range.0 / step).ceil() as i64;
    let last = (range.1 / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

/// Line chart of several series; `equal` keeps one unit the same length on both axes.
pub fn chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series], equal: bool) -> String {
    let (mut xr, mut yr) = (padded_pair(extent(series, |p| p.0)), padded_pair(extent(series, |p| p.1)));
    if equal {
        let (w, h) = (WIDTH - MARGIN.0 - MARGIN.1, HEIGHT - MARGIN.2 - MARGIN.3);
        let scale = ((xr.1 - xr.0) / w).max((yr.1 - yr.0) / h);
        let (cx, cy) = (0.5 * (xr.0 + xr.1), 0.5 * (yr.0 + yr.1));
        xr = (cx - 0.5 * scale * w, cx + 0.5 * scale * w);
        yr = (cy - 0.5 * scale * h, cy + 0.5 * scale * h);
    }
    let f = Frame { x: xr, y: yr };
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(title));
    let (left, right, top, bottom) = (MARGIN.0, WIDTH - MARGIN.1, MARGIN.2, HEIGHT - MARGIN.3);
    let _ = writeln!(s, r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#, right - left, bottom - top);
    for x in ticks(xr) {
        let px = f.px(x);
        let _ = writeln!(s, r##"<line x1="{px:.2}" y1="{top}" x2="{px:.2}" y2="{bottom}" stroke="#ddd"/>"##);
        let _ = writeln!(s, r#"<text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#, bottom + 16.0, tick(x));
    }
    for y in ticks(yr) {
        let py = f.py(y);
        let _ = writeln!(s, r##"<line x1="{left}" y1="{py:.2}" x2="{right}" y2="{py:.2}" stroke="#ddd"/>"##);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, left - 6.0, py + 4.0, tick(y));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (left + right) / 2.0, HEIGHT - 12.0, escape(xlabel));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        (top + bottom) / 2.0,
        escape(ylabel)
    );
    for (i, ser) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|p| format!("{:.2},{:.2}", f.px(p.0), f.py(p.1)))
            .collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{colour}" stroke-width="1.3" points="{}"/>"#, pts.join(" "));
        let ly = top + 14.0 + 18.0 * i as f64;
        let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="2"/>"#, right + 10.0, right + 30.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, right + 36.0, ly + 4.0, escape(&ser.label));
    }
    s.push_str("</svg>\n");
    s
}

fn padded_pair(r: (f64, f64)) -> (f64, f64) {
    padded(r.0, r.1)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn per_vehicle(tel: &Telemetry, value: impl Fn(usize, usize) -> Option<(f64, f64)>) -> Vec<Series> {
    let first = &tel.records[0];
    first
        .vehicles
        .iter()
        .enumerate()
        .map(|(i, v)| Series {
            label: format!("{} {}", v.kind.as_str(), v.id),
            points: thin((0..tel.records.len()).filter_map(|k| value(k, i)).collect()),
        })
        .collect()
}

/// Every chart as `(file name, SVG text)`.
pub fn render_all(tel: &Telemetry) -> Vec<(&'static str, String)> {
    let recs = &tel.records;
    let top = per_vehicle(tel, |k, i| {
        let q = &recs[k].vehicles[i].q;
        Some((q[0], q[1]))
    });
    let errors = per_vehicle(tel, |k, i| Some((recs[k].t, recs[k].vehicles[i].phi_norm())));
    let residuals = per_vehicle(tel, |k, i| {
        let r = &recs[k].vehicles[i].residuals;
        Some((recs[k].t, r.iter().fold(0.0f64, |m, x| m.max(x.abs()))))
    });
    let rates = per_vehicle(tel, |k, i| {
        let next = recs.get(k + 1)?;
        let dt = next.t - recs[k].t;
        Some((recs[k].t, (next.vehicles[i].omega - recs[k].vehicles[i].omega) / dt))
    });
    vec![
        ("trajectories.svg", chart("Top view", "x (m)", "y (m)", &top, true)),
        ("path_errors.svg", chart("Path-following error", "t (s)", "|Phi| (m)", &errors, false)),
        ("residuals.svg", chart("Coordination residual", "t (s)", "max |omega_i - omega_k - Delta|", &residuals, false)),
        ("omega_rate.svg", chart("Virtual coordinate rate", "t (s)", "d omega / dt", &rates, false)),
    ]
}

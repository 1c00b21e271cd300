//! Minimal SVG scatter plots: axes, points and reference slope lines.

use std::fmt::Write;

use crate::CliError;

#[derive(Clone, Debug)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Default)]
pub struct PlotSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
    /// Slopes of reference lines through the first point of the first series
    /// (in log-log coordinates when both axes are logarithmic).
    pub slopes: Vec<f64>,
}

const W: f64 = 640.0;
const H: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Axis {
    log: bool,
    lo: f64,
    hi: f64,
    p0: f64,
    p1: f64,
}

impl Axis {
    fn new(log: bool, values: impl Iterator<Item = f64>, p0: f64, p1: f64) -> Option<Self> {
        let t: Vec<f64> = values.map(|v| if log { v.log10() } else { v }).collect();
        let mut lo = t.iter().copied().fold(f64::INFINITY, f64::min);
        let mut hi = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() || !hi.is_finite() {
            return None;
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.05 * (hi - lo);
        Some(Axis {
            log,
            lo: lo - pad,
            hi: hi + pad,
            p0,
            p1,
        })
    }

    fn t(&self, v: f64) -> f64 {
        if self.log {
            v.log10()
        } else {
            v
        }
    }

    fn px(&self, v: f64) -> f64 {
        self.p0 + (self.t(v) - self.lo) / (self.hi - self.lo) * (self.p1 - self.p0)
    }

    fn ticks(&self) -> Vec<f64> {
        (0..=4)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / 4.0)
            .map(|t| if self.log { 10f64.powf(t) } else { t })
            .collect()
    }
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e4).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render(spec: &PlotSpec) -> Result<String, CliError> {
    let keep = |&(x, y): &(f64, f64)| x.is_finite() && y.is_finite() && (!spec.log_x || x > 0.0) && (!spec.log_y || y > 0.0);
    let series: Vec<Series> = spec
        .series
        .iter()
        .map(|s| Series {
            name: s.name.clone(),
            points: s.points.iter().copied().filter(keep).collect(),
        })
        .collect();
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    if all.is_empty() {
        return Err(CliError::Config("nothing to plot: no finite points on the chosen axes".into()));
    }
    let xa = Axis::new(spec.log_x, all.iter().map(|p| p.0), LEFT, W - RIGHT).unwrap();
    let ya = Axis::new(spec.log_y, all.iter().map(|p| p.1), H - BOTTOM, TOP).unwrap();
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<rect class="frame" x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - LEFT - RIGHT,
        H - TOP - BOTTOM
    );
    for v in xa.ticks() {
        let x = xa.px(v);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            H - BOTTOM,
            H - BOTTOM + 5.0,
            H - BOTTOM + 20.0,
            tick_label(v)
        );
    }
    for v in ya.ticks() {
        let y = ya.px(v);
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0,
            tick_label(v)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        H - 15.0,
        escape(&spec.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text transform="translate(18 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (TOP + H - BOTTOM) / 2.0,
        escape(&spec.y_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        escape(&spec.title)
    );
    let _ = writeln!(out, r#"<clipPath id="plot"><rect x="{LEFT}" y="{TOP}" width="{}" height="{}"/></clipPath>"#, W - LEFT - RIGHT, H - TOP - BOTTOM);
    if let Some(&(x0, y0)) = series.iter().find_map(|s| s.points.first()) {
        let loglog = spec.log_x && spec.log_y;
        for &s in &spec.slopes {
            let (xl, xr) = (all.iter().map(|p| p.0).fold(f64::INFINITY, f64::min), all.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max));
            let f = |x: f64| {
                if loglog {
                    y0 * (x / x0).powf(s)
                } else {
                    y0 + s * (x - x0)
                }
            };
            let _ = writeln!(
                out,
                r#"<line class="ref" data-slope="{s}" x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="gray" stroke-dasharray="6 4" clip-path="url(#plot)"/>"#,
                xa.px(xl),
                ya.px(f(xl)),
                xa.px(xr),
                ya.px(f(xr))
            );
        }
    }
    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        for &(x, y) in &s.points {
            let _ = writeln!(out, r#"<circle cx="{:.3}" cy="{:.3}" r="3" fill="{color}"/>"#, xa.px(x), ya.px(y));
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" fill="{color}">{}</text>"#,
            LEFT + 10.0,
            TOP + 16.0 * (k + 1) as f64,
            escape(&s.name)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

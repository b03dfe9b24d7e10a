//! Minimal SVG plots: line and dot series, shaded intervals, tick marks and
//! a grid of panels.

use std::fmt::Write;

pub const BLUE: &str = "#1f5fbf";
pub const RED: &str = "#c8322d";
pub const GREY: &str = "#777777";

#[derive(Debug, Clone)]
pub enum Mark {
    Line { points: Vec<(f64, f64)>, color: &'static str },
    Dots { points: Vec<(f64, f64)>, color: &'static str },
    /// Shaded vertical strip `x ∈ [lo, hi]`.
    XBand { lo: f64, hi: f64, color: &'static str },
    /// Shaded horizontal strip `y ∈ [lo, hi]`.
    YBand { lo: f64, hi: f64, color: &'static str },
    /// Dashed horizontal reference line.
    HLine { y: f64, color: &'static str },
}

#[derive(Debug, Clone, Default)]
pub struct Panel {
    pub title: String,
    pub xlabel: String,
    pub ylabel: String,
    pub marks: Vec<Mark>,
    /// Fixed ranges; computed from the data when absent.
    pub x_range: Option<(f64, f64)>,
    pub y_range: Option<(f64, f64)>,
}

impl Panel {
    pub fn new(title: &str, xlabel: &str, ylabel: &str) -> Self {
        Self {
            title: title.into(),
            xlabel: xlabel.into(),
            ylabel: ylabel.into(),
            ..Default::default()
        }
    }

    pub fn mark(mut self, m: Mark) -> Self {
        self.marks.push(m);
        self
    }

    fn ranges(&self) -> ((f64, f64), (f64, f64)) {
        let mut xs = (f64::INFINITY, f64::NEG_INFINITY);
        let mut ys = (f64::INFINITY, f64::NEG_INFINITY);
        let take = |r: &mut (f64, f64), v: f64| {
            if v.is_finite() {
                r.0 = r.0.min(v);
                r.1 = r.1.max(v);
            }
        };
        for m in &self.marks {
            match m {
                Mark::Line { points, .. } | Mark::Dots { points, .. } => {
                    for &(x, y) in points {
                        take(&mut xs, x);
                        take(&mut ys, y);
                    }
                }
                Mark::HLine { y, .. } => take(&mut ys, *y),
                _ => {}
            }
        }
        let pad = |r: (f64, f64)| {
            if !r.0.is_finite() {
                (0.0, 1.0)
            } else if r.1 - r.0 <= f64::EPSILON * r.1.abs().max(1e-300) {
                let h = if r.0 == 0.0 { 1.0 } else { 0.1 * r.0.abs() };
                (r.0 - h, r.1 + h)
            } else {
                let h = 0.04 * (r.1 - r.0);
                (r.0 - h, r.1 + h)
            }
        };
        (self.x_range.unwrap_or_else(|| pad(xs)), self.y_range.unwrap_or_else(|| pad(ys)))
    }
}

/// Ticks at 1, 2, 5 × 10^k spacing.
fn ticks(lo: f64, hi: f64) -> (Vec<f64>, usize) {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let mut v = Vec::new();
    let mut t = (lo / step).ceil() * step;
    while t <= hi + 1e-9 * step {
        v.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    (v, decimals)
}

fn label(v: f64, decimals: usize) -> String {
    if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e5) {
        format!("{v:.1e}")
    } else {
        format!("{v:.decimals$}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 15.0;
const MARGIN_T: f64 = 28.0;
const MARGIN_B: f64 = 45.0;

fn render_panel(out: &mut String, p: &Panel, ox: f64, oy: f64, w: f64, h: f64) {
    let ((x0, x1), (y0, y1)) = p.ranges();
    let pw = w - MARGIN_L - MARGIN_R;
    let ph = h - MARGIN_T - MARGIN_B;
    let left = ox + MARGIN_L;
    let top = oy + MARGIN_T;
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + ph - (y - y0) / (y1 - y0) * ph;
    let clamp_x = |x: f64| sx(x.clamp(x0, x1));
    let clamp_y = |y: f64| sy(y.clamp(y0, y1));

    let _ = writeln!(
        out,
        r#"<rect x="{left:.2}" y="{top:.2}" width="{pw:.2}" height="{ph:.2}" fill="white" stroke="black"/>"#
    );
    for m in &p.marks {
        match m {
            Mark::XBand { lo, hi, color } => {
                let (a, b) = (clamp_x(*lo), clamp_x(*hi));
                let _ = writeln!(
                    out,
                    r#"<rect x="{a:.2}" y="{top:.2}" width="{:.2}" height="{ph:.2}" fill="{color}" fill-opacity="0.18"/>"#,
                    (b - a).max(0.5)
                );
            }
            Mark::YBand { lo, hi, color } => {
                let (a, b) = (clamp_y(*hi), clamp_y(*lo));
                let _ = writeln!(
                    out,
                    r#"<rect x="{left:.2}" y="{a:.2}" width="{pw:.2}" height="{:.2}" fill="{color}" fill-opacity="0.18"/>"#,
                    (b - a).max(0.5)
                );
            }
            _ => {}
        }
    }
    for m in &p.marks {
        match m {
            Mark::Line { points, color } => {
                let mut d = String::new();
                let mut pen_up = true;
                for &(x, y) in points {
                    if !(x.is_finite() && y.is_finite()) {
                        pen_up = true;
                        continue;
                    }
                    let _ = write!(d, "{}{:.2},{:.2} ", if pen_up { "M" } else { "L" }, sx(x), sy(y));
                    pen_up = false;
                }
                let _ = writeln!(out, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.3"/>"#, d.trim_end());
            }
            Mark::Dots { points, color } => {
                for &(x, y) in points {
                    if x.is_finite() && y.is_finite() && x >= x0 && x <= x1 && y >= y0 && y <= y1 {
                        let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="1.8" fill="{color}"/>"#, sx(x), sy(y));
                    }
                }
            }
            Mark::HLine { y, color } => {
                let yy = clamp_y(*y);
                let _ = writeln!(
                    out,
                    r#"<line x1="{left:.2}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="{color}" stroke-dasharray="5,4"/>"#,
                    left + pw
                );
            }
            _ => {}
        }
    }

    let (xt, xd) = ticks(x0, x1);
    for t in xt {
        let x = sx(t);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
            top + ph,
            top + ph + 5.0,
            top + ph + 18.0,
            label(t, xd)
        );
    }
    let (yt, yd) = ticks(y0, y1);
    for t in yt {
        let y = sy(t);
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{left:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#,
            left - 5.0,
            left - 8.0,
            y + 4.0,
            label(t, yd)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">{}</text>"#,
        left + pw / 2.0,
        oy + 18.0,
        escape(&p.title)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"#,
        left + pw / 2.0,
        oy + h - 8.0,
        escape(&p.xlabel)
    );
    let (lx, ly) = (ox + 16.0, top + ph / 2.0);
    let _ = writeln!(
        out,
        r#"<text x="{lx:.2}" y="{ly:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 {lx:.2} {ly:.2})">{}</text>"#,
        escape(&p.ylabel)
    );
}

/// Lays `panels` out row by row, `columns` per row.
pub fn render(panels: &[Panel], columns: usize, panel_w: f64, panel_h: f64) -> String {
    let columns = columns.max(1);
    let rows = panels.len().div_ceil(columns).max(1);
    let (w, h) = (panel_w * columns as f64, panel_h * rows as f64);
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    for (k, p) in panels.iter().enumerate() {
        let ox = (k % columns) as f64 * panel_w;
        let oy = (k / columns) as f64 * panel_h;
        render_panel(&mut out, p, ox, oy, panel_w, panel_h);
    }
    out.push_str("</svg>\n");
    out
}

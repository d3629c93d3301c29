//! Minimal self-contained SVG charts with deterministic output.

use std::fmt::Write;

const PANEL_W: f64 = 640.0;
const PANEL_H: f64 = 360.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 50.0;
const TICKS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub color: &'static str,
    pub dashed: bool,
    pub markers: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Lines(Vec<Series>),
    /// `(lo, hi, height)` bars.
    Bars(Vec<(f64, f64, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub layer: Layer,
}

struct Scale {
    lo: f64,
    hi: f64,
    log: bool,
    a: f64,
    b: f64,
}

impl Scale {
    fn new(values: impl Iterator<Item = f64>, log: bool, a: f64, b: f64) -> Self {
        let t = |v: f64| if log { v.ln() } else { v };
        let (mut lo, mut hi) = values
            .filter(|v| v.is_finite() && (!log || *v > 0.0))
            .map(t)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            let pad = if lo.abs() > 0.0 { 0.05 * lo.abs() } else { 0.5 };
            (lo, hi) = (lo - pad, hi + pad);
        }
        Self { lo, hi, log, a, b }
    }

    fn map(&self, v: f64) -> f64 {
        let v = if self.log { v.ln() } else { v };
        self.a + (v - self.lo) / (self.hi - self.lo) * (self.b - self.a)
    }

    fn ticks(&self) -> Vec<f64> {
        (0..TICKS)
            .map(|i| {
                let t = self.lo + (self.hi - self.lo) * i as f64 / (TICKS - 1) as f64;
                if self.log {
                    t.exp()
                } else {
                    t
                }
            })
            .collect()
    }
}

fn fmt_num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e4).contains(&a) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders `panels` stacked vertically into one SVG document.
pub fn render(panels: &[Panel]) -> String {
    let height = PANEL_H * panels.len().max(1) as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PANEL_W}" height="{height}" viewBox="0 0 {PANEL_W} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, panel) in panels.iter().enumerate() {
        draw_panel(&mut s, panel, i as f64 * PANEL_H);
    }
    s.push_str("</svg>\n");
    s
}

fn draw_panel(s: &mut String, panel: &Panel, y0: f64) {
    let (x_vals, y_vals): (Vec<f64>, Vec<f64>) = match &panel.layer {
        Layer::Lines(series) => series.iter().flat_map(|se| se.points.iter().copied()).unzip(),
        Layer::Bars(bars) => {
            let xs = bars.iter().flat_map(|b| [b.0, b.1]).collect();
            let mut ys: Vec<f64> = bars.iter().map(|b| b.2).collect();
            ys.push(0.0);
            (xs, ys)
        }
    };
    let xs = Scale::new(x_vals.into_iter(), panel.log_x, LEFT, PANEL_W - RIGHT);
    let ys = Scale::new(y_vals.into_iter(), panel.log_y, y0 + PANEL_H - BOTTOM, y0 + TOP);
    let (bx, by) = (LEFT, y0 + TOP);
    let (bw, bh) = (PANEL_W - LEFT - RIGHT, PANEL_H - TOP - BOTTOM);

    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="13">{}</text>"#, PANEL_W / 2.0, y0 + 20.0, escape(&panel.title));
    let _ = writeln!(s, r##"<rect x="{bx:.1}" y="{by:.1}" width="{bw:.1}" height="{bh:.1}" fill="none" stroke="#444"/>"##);
    for t in xs.ticks() {
        let x = xs.map(t);
        let yb = by + bh;
        let _ = writeln!(s, r##"<line x1="{x:.1}" y1="{yb:.1}" x2="{x:.1}" y2="{:.1}" stroke="#444"/>"##, yb + 4.0);
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, yb + 16.0, fmt_num(t));
    }
    for t in ys.ticks() {
        let y = ys.map(t);
        let _ = writeln!(s, r##"<line x1="{:.1}" y1="{y:.1}" x2="{bx:.1}" y2="{y:.1}" stroke="#444"/>"##, bx - 4.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, bx - 6.0, y + 4.0, fmt_num(t));
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, bx + bw / 2.0, y0 + PANEL_H - 12.0, escape(&panel.x_label));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        by + bh / 2.0,
        by + bh / 2.0,
        escape(&panel.y_label)
    );

    match &panel.layer {
        Layer::Bars(bars) => {
            let base = ys.map(0.0_f64.max(ys.lo));
            for &(lo, hi, h) in bars {
                let (x1, x2, yt) = (xs.map(lo), xs.map(hi), ys.map(h));
                let _ = writeln!(
                    s,
                    r##"<rect x="{x1:.2}" y="{yt:.2}" width="{:.2}" height="{:.2}" fill="#7a9cc6" stroke="#2f4f7f" stroke-width="0.5"/>"##,
                    (x2 - x1).max(0.0),
                    (base - yt).max(0.0)
                );
            }
        }
        Layer::Lines(series) => {
            for (k, se) in series.iter().enumerate() {
                let pts: Vec<String> = se
                    .points
                    .iter()
                    .filter(|(x, y)| (!panel.log_x || *x > 0.0) && (!panel.log_y || *y > 0.0))
                    .map(|&(x, y)| format!("{:.2},{:.2}", xs.map(x), ys.map(y)))
                    .collect();
                let dash = if se.dashed { r#" stroke-dasharray="6 4""# } else { "" };
                let _ = writeln!(
                    s,
                    r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"#,
                    pts.join(" "),
                    se.color
                );
                if se.markers {
                    for p in &pts {
                        let (cx, cy) = p.split_once(',').unwrap_or(("0", "0"));
                        let _ = writeln!(s, r#"<circle cx="{cx}" cy="{cy}" r="2.5" fill="{}"/>"#, se.color);
                    }
                }
                let ly = by + 14.0 + 14.0 * k as f64;
                let lx = bx + bw - 150.0;
                let _ = writeln!(s, r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{}" stroke-width="1.5"{dash}/>"#, lx + 20.0, se.color);
                let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&se.name));
            }
        }
    }
}

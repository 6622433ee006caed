//! Minimal deterministic SVG charts: fixed canvas, fixed number formatting,
//! no timestamps, so identical inputs give identical bytes.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

pub struct LineChart<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<(&'a str, Vec<(f64, f64)>)>,
    /// Draw y = x across the plotted range.
    pub diagonal: bool,
}

pub struct BarChart<'a> {
    pub title: &'a str,
    pub y_label: &'a str,
    pub bars: Vec<(String, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
}

fn axes(out: &mut String, x_label: &str, y_label: &str) {
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, H - BOTTOM, TOP);
    let _ = writeln!(out, r#"<path d="M{x0:.1},{y1:.1} L{x0:.1},{y0:.1} L{x1:.1},{y0:.1}" stroke="black" fill="none"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        H - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.1e}")
    } else {
        format!("{v:.3}")
    }
}

struct Scale {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Scale {
    fn new(values: impl Iterator<Item = f64>, log: bool) -> Scale {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let v = if log { v.log10() } else { v };
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            (lo, hi) = (lo - 0.5, hi + 0.5);
        }
        Scale { lo, hi, log }
    }

    fn unit(&self, v: f64) -> Option<f64> {
        let v = if self.log { v.log10() } else { v };
        v.is_finite().then(|| (v - self.lo) / (self.hi - self.lo))
    }

    fn value_at(&self, u: f64) -> f64 {
        let v = self.lo + u * (self.hi - self.lo);
        if self.log {
            10f64.powf(v)
        } else {
            v
        }
    }
}

fn ticks(out: &mut String, sx: &Scale, sy: &Scale) {
    for k in 0..=4 {
        let u = k as f64 / 4.0;
        let x = LEFT + u * (W - RIGHT - LEFT);
        let y = H - BOTTOM - u * (H - BOTTOM - TOP);
        let _ = writeln!(out, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, H - BOTTOM + 16.0, fmt_tick(sx.value_at(u)));
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, fmt_tick(sy.value_at(u)));
    }
}

fn legend(out: &mut String, i: usize, label: &str) {
    let y = TOP + 10.0 + 18.0 * i as f64;
    let x = W - RIGHT + 12.0;
    let _ = writeln!(out, r#"<rect x="{x:.1}" y="{:.1}" width="12" height="4" fill="{}"/>"#, y - 4.0, COLORS[i % COLORS.len()]);
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, x + 18.0, y + 1.0, escape(label));
}

impl LineChart<'_> {
    pub fn render(&self) -> String {
        let pts = || self.series.iter().flat_map(|(_, p)| p.iter());
        let sx = Scale::new(pts().map(|p| p.0), self.log_x);
        let sy = Scale::new(pts().map(|p| p.1), self.log_y);
        let (pw, ph) = (W - RIGHT - LEFT, H - BOTTOM - TOP);
        let mut out = String::new();
        header(&mut out, self.title);
        axes(&mut out, self.x_label, self.y_label);
        ticks(&mut out, &sx, &sy);
        let to_xy = |x: f64, y: f64| Some((LEFT + sx.unit(x)? * pw, H - BOTTOM - sy.unit(y)? * ph));
        if self.diagonal {
            let lo = sx.value_at(0.0).max(sy.value_at(0.0));
            let hi = sx.value_at(1.0).min(sy.value_at(1.0));
            if let (Some(a), Some(b)) = (to_xy(lo, lo), to_xy(hi, hi)) {
                let _ = writeln!(
                    out,
                    r#"<path d="M{:.2},{:.2} L{:.2},{:.2}" stroke="gray" stroke-dasharray="4 3" fill="none"/>"#,
                    a.0, a.1, b.0, b.1
                );
            }
        }
        for (i, (label, points)) in self.series.iter().enumerate() {
            let mut d = String::new();
            for &(x, y) in points {
                if let Some((px, py)) = to_xy(x, y) {
                    let _ = write!(d, "{}{px:.2},{py:.2}", if d.is_empty() { "M" } else { " L" });
                }
            }
            let _ = writeln!(out, r#"<path d="{d}" stroke="{}" stroke-width="1.5" fill="none"/>"#, COLORS[i % COLORS.len()]);
            legend(&mut out, i, label);
        }
        out.push_str("</svg>\n");
        out
    }
}

impl BarChart<'_> {
    pub fn render(&self) -> String {
        let sy = Scale::new(self.bars.iter().map(|b| b.1).chain([0.0]), false);
        let (pw, ph) = (W - RIGHT - LEFT, H - BOTTOM - TOP);
        let mut out = String::new();
        header(&mut out, self.title);
        axes(&mut out, "", self.y_label);
        for k in 0..=4 {
            let u = k as f64 / 4.0;
            let y = H - BOTTOM - u * ph;
            let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, fmt_tick(sy.value_at(u)));
        }
        let n = self.bars.len().max(1) as f64;
        let slot = pw / n;
        let base = H - BOTTOM - sy.unit(0.0).unwrap_or(0.0) * ph;
        for (i, (label, v)) in self.bars.iter().enumerate() {
            let top = H - BOTTOM - sy.unit(*v).unwrap_or(0.0) * ph;
            let x = LEFT + slot * (i as f64 + 0.2);
            let _ = writeln!(
                out,
                r#"<rect x="{x:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                top.min(base),
                slot * 0.6,
                (base - top).abs(),
                COLORS[i % COLORS.len()]
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.1}" text-anchor="middle">{}</text>"#,
                x + slot * 0.3,
                H - BOTTOM + 16.0,
                escape(label)
            );
            let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, x + slot * 0.3, top.min(base) - 4.0, fmt_tick(*v));
        }
        out.push_str("</svg>\n");
        out
    }
}

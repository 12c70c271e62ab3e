//! Minimal static SVG charts.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

#[derive(Clone, Copy)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub log: bool,
}

impl Axis {
    pub fn linear(min: f64, max: f64) -> Self {
        let (min, max) = if max > min {
            (min, max)
        } else {
            (min - 0.5, min + 0.5)
        };
        Self {
            min,
            max,
            log: false,
        }
    }

    pub fn log(min: f64, max: f64) -> Self {
        let min = min.max(f64::MIN_POSITIVE);
        let max = if max > min { max } else { min * 10.0 };
        Self {
            min,
            max,
            log: true,
        }
    }

    fn frac(&self, v: f64) -> f64 {
        if self.log {
            (v.ln() - self.min.ln()) / (self.max.ln() - self.min.ln())
        } else {
            (v - self.min) / (self.max - self.min)
        }
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let lo = self.min.log10().floor() as i32;
            let hi = self.max.log10().ceil() as i32;
            (lo..=hi)
                .map(|e| 10f64.powi(e))
                .filter(|&v| v >= self.min * 0.999 && v <= self.max * 1.001)
                .collect()
        } else {
            let span = self.max - self.min;
            let raw = span / 6.0;
            let mag = 10f64.powf(raw.log10().floor());
            let step = [1.0, 2.0, 5.0, 10.0]
                .iter()
                .map(|m| m * mag)
                .find(|&s| s >= raw)
                .unwrap_or(10.0 * mag);
            let first = (self.min / step).ceil() as i64;
            let last = (self.max / step).floor() as i64;
            (first..=last).map(|k| k as f64 * step).collect()
        }
    }
}

fn label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-3) {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub struct Chart {
    x: Axis,
    y: Axis,
    body: String,
    legend: Vec<(String, String)>,
}

impl Chart {
    pub fn new(title: &str, xlabel: &str, ylabel: &str, x: Axis, y: Axis) -> Self {
        let mut body = String::new();
        let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
        let _ = write!(
            body,
            r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##
        );
        let _ = write!(
            body,
            r#"<text x="{}" y="20" text-anchor="middle" font-size="15">{}</text>"#,
            W / 2.0,
            escape(title)
        );
        let _ = write!(
            body,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"#,
            LEFT + pw / 2.0,
            H - 10.0,
            escape(xlabel)
        );
        let _ = write!(
            body,
            r#"<text x="16" y="{}" text-anchor="middle" font-size="13" transform="rotate(-90 16 {})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(ylabel)
        );
        let mut chart = Self {
            x,
            y,
            body,
            legend: Vec::new(),
        };
        for t in x.ticks() {
            let px = chart.px(t);
            let _ = write!(
                chart.body,
                r##"<line x1="{px:.1}" y1="{}" x2="{px:.1}" y2="{}" stroke="#333"/><text x="{px:.1}" y="{}" text-anchor="middle" font-size="11">{}</text>"##,
                H - BOTTOM,
                H - BOTTOM + 5.0,
                H - BOTTOM + 18.0,
                label(t)
            );
        }
        for t in y.ticks() {
            let py = chart.py(t);
            let _ = write!(
                chart.body,
                r##"<line x1="{}" y1="{py:.1}" x2="{LEFT}" y2="{py:.1}" stroke="#333"/><text x="{}" y="{:.1}" text-anchor="end" font-size="11">{}</text>"##,
                LEFT - 5.0,
                LEFT - 8.0,
                py + 4.0,
                label(t)
            );
        }
        chart
    }

    fn px(&self, v: f64) -> f64 {
        LEFT + self.x.frac(v).clamp(0.0, 1.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, v: f64) -> f64 {
        H - BOTTOM - self.y.frac(v).clamp(0.0, 1.0) * (H - TOP - BOTTOM)
    }

    pub fn points(&mut self, xs: &[f64], ys: &[f64], color: &str, name: &str) {
        for (&x, &y) in xs.iter().zip(ys) {
            let _ = write!(
                self.body,
                r#"<circle cx="{:.1}" cy="{:.1}" r="3.5" fill="{color}"/>"#,
                self.px(x),
                self.py(y)
            );
        }
        self.legend.push((name.into(), color.into()));
    }

    pub fn line(&mut self, xs: &[f64], ys: &[f64], color: &str, name: &str) {
        let pts: Vec<String> = xs
            .iter()
            .zip(ys)
            .map(|(&x, &y)| format!("{:.1},{:.1}", self.px(x), self.py(y)))
            .collect();
        let _ = write!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            pts.join(" ")
        );
        self.legend.push((name.into(), color.into()));
    }

    /// Step histogram outline from bin edges and counts.
    pub fn histogram(&mut self, edges: &[f64], counts: &[f64], color: &str, name: &str) {
        let mut pts = vec![format!(
            "{:.1},{:.1}",
            self.px(edges[0]),
            self.py(self.y.min)
        )];
        for (i, &c) in counts.iter().enumerate() {
            let y = if self.y.log && c <= 0.0 {
                self.y.min
            } else {
                c
            };
            pts.push(format!("{:.1},{:.1}", self.px(edges[i]), self.py(y)));
            pts.push(format!("{:.1},{:.1}", self.px(edges[i + 1]), self.py(y)));
        }
        pts.push(format!(
            "{:.1},{:.1}",
            self.px(edges[counts.len()]),
            self.py(self.y.min)
        ));
        let _ = write!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            pts.join(" ")
        );
        self.legend.push((name.into(), color.into()));
    }

    /// Vertical error bars from `lo` to `hi` with a marker at `mid`.
    pub fn error_bars(
        &mut self,
        xs: &[f64],
        mid: &[f64],
        lo: &[f64],
        hi: &[f64],
        color: &str,
        name: &str,
    ) {
        for i in 0..xs.len() {
            let x = self.px(xs[i]);
            let _ = write!(
                self.body,
                r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="{color}"/><circle cx="{x:.1}" cy="{:.1}" r="2" fill="{color}"/>"#,
                self.py(lo[i]),
                self.py(hi[i]),
                self.py(mid[i])
            );
        }
        self.legend.push((name.into(), color.into()));
    }

    pub fn vline(&mut self, x: f64, color: &str, name: &str) {
        let px = self.px(x);
        let _ = write!(
            self.body,
            r#"<line x1="{px:.1}" y1="{TOP}" x2="{px:.1}" y2="{}" stroke="{color}" stroke-dasharray="5,4"/>"#,
            H - BOTTOM
        );
        self.legend.push((name.into(), color.into()));
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif">"#
        );
        out.push_str(r#"<rect width="100%" height="100%" fill="white"/>"#);
        out.push_str(&self.body);
        for (i, (name, color)) in self.legend.iter().enumerate() {
            let y = TOP + 16.0 + 16.0 * i as f64;
            let x = W - RIGHT - 190.0;
            let _ = write!(
                out,
                r#"<rect x="{x}" y="{}" width="12" height="4" fill="{color}"/><text x="{}" y="{y}" font-size="11">{}</text>"#,
                y - 5.0,
                x + 18.0,
                escape(name)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

/// Equal-width bin edges covering `[lo, hi]`.
pub fn edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    (0..=bins)
        .map(|i| lo + (hi - lo) * i as f64 / bins as f64)
        .collect()
}

/// Counts of `values` per bin; values outside the range go to the edge bins.
pub fn counts(values: &[f64], edges: &[f64]) -> Vec<f64> {
    let bins = edges.len() - 1;
    let (lo, hi) = (edges[0], edges[bins]);
    let mut c = vec![0.0; bins];
    for &v in values.iter().filter(|v| v.is_finite()) {
        let i = (((v - lo) / (hi - lo)) * bins as f64).floor();
        c[(i.max(0.0) as usize).min(bins - 1)] += 1.0;
    }
    c
}

//! Minimal hand-written SVG: stacked panels of polylines and point clouds
//! with labelled axes.

use std::fmt::Write as _;

const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 150.0;
const TICKS: usize = 5;

pub enum Style {
    Line,
    Points,
}

pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub color: &'static str,
    pub style: Style,
}

impl Series {
    pub fn line(label: &str, x: &[f64], y: &[f64], color: &'static str) -> Self {
        Self::new(label, x, y, color, Style::Line)
    }

    pub fn points(label: &str, x: &[f64], y: &[f64], color: &'static str) -> Self {
        Self::new(label, x, y, color, Style::Points)
    }

    fn new(label: &str, x: &[f64], y: &[f64], color: &'static str, style: Style) -> Self {
        let (x, y) = x
            .iter()
            .zip(y)
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|(a, b)| (*a, *b))
            .unzip();
        Self {
            label: label.to_string(),
            x,
            y,
            color,
            style,
        }
    }
}

pub struct Panel<'a> {
    pub y0: f64,
    pub height: f64,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub series: Vec<Series>,
}

pub struct Svg {
    width: f64,
    height: f64,
    body: String,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| {
        (l.min(v), h.max(v))
    });
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

impl Svg {
    pub fn new(width: f64, height: f64) -> Self {
        Self {
            width,
            height,
            body: String::new(),
        }
    }

    pub fn title(&mut self, text: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{:.1}" y="22" font-size="15" text-anchor="middle">{}</text>"#,
            self.width / 2.0,
            escape(text)
        );
    }

    pub fn panel(&mut self, p: &Panel) {
        let x_left = MARGIN_LEFT;
        let plot_w = self.width - MARGIN_LEFT - MARGIN_RIGHT;
        let (x_lo, x_hi) = range(p.series.iter().flat_map(|s| s.x.iter().copied()));
        let (y_lo, y_hi) = range(p.series.iter().flat_map(|s| s.y.iter().copied()));
        let sx = |x: f64| x_left + (x - x_lo) / (x_hi - x_lo) * plot_w;
        let sy = |y: f64| p.y0 + p.height - (y - y_lo) / (y_hi - y_lo) * p.height;
        let b = &mut self.body;

        let _ = writeln!(
            b,
            r##"<rect x="{x_left:.1}" y="{:.1}" width="{plot_w:.1}" height="{:.1}" fill="none" stroke="#000000"/>"##,
            p.y0, p.height
        );
        for i in 0..=TICKS {
            let f = i as f64 / TICKS as f64;
            let (xv, yv) = (x_lo + f * (x_hi - x_lo), y_lo + f * (y_hi - y_lo));
            let _ = writeln!(
                b,
                r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="middle">{xv:.3}</text>"#,
                sx(xv),
                p.y0 + p.height + 14.0
            );
            let _ = writeln!(
                b,
                r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{yv:.3}</text>"#,
                x_left - 4.0,
                sy(yv) + 3.0
            );
        }
        let _ = writeln!(
            b,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"#,
            x_left + plot_w / 2.0,
            p.y0 + p.height + 32.0,
            escape(p.x_label)
        );
        let _ = writeln!(
            b,
            r#"<text x="16" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
            p.y0 + p.height / 2.0,
            p.y0 + p.height / 2.0,
            escape(p.y_label)
        );

        for (k, s) in p.series.iter().enumerate() {
            match s.style {
                Style::Line => {
                    let pts: Vec<String> =
                        s.x.iter()
                            .zip(&s.y)
                            .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                            .collect();
                    let _ = writeln!(
                        b,
                        r#"<polyline fill="none" stroke="{}" stroke-width="1.2" points="{}"/>"#,
                        s.color,
                        pts.join(" ")
                    );
                }
                Style::Points => {
                    for (&x, &y) in s.x.iter().zip(&s.y) {
                        let _ = writeln!(
                            b,
                            r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}" fill-opacity="0.7"/>"#,
                            sx(x),
                            sy(y),
                            s.color
                        );
                    }
                }
            }
            let ly = p.y0 + 12.0 + 16.0 * k as f64;
            let lx = x_left + plot_w + 12.0;
            let _ = writeln!(
                b,
                r#"<rect x="{lx:.1}" y="{:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{ly:.1}" font-size="11">{}</text>"#,
                ly - 9.0,
                s.color,
                lx + 14.0,
                escape(&s.label)
            );
        }
    }

    pub fn finish(self) -> String {
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

//! Minimal SVG line and scatter charts.

use std::fmt::Write;

const PANEL_W: f64 = 360.0;
const PANEL_H: f64 = 260.0;
const MARGIN: f64 = 44.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Style {
    Line,
    Dots,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub series: Vec<Series>,
    pub log_x: bool,
    pub log_y: bool,
    /// Horizontal reference lines.
    pub hlines: Vec<f64>,
}

impl Panel {
    pub fn new(title: &str, x_label: &str) -> Self {
        Self { title: title.into(), x_label: x_label.into(), ..Default::default() }
    }

    pub fn with(mut self, name: &str, points: Vec<(f64, f64)>, style: Style) -> Self {
        self.series.push(Series { name: name.into(), points, style });
        self
    }
}

fn tx(v: f64, log: bool) -> Option<f64> {
    let v = if log { if v > 0.0 { v.log10() } else { return None } } else { v };
    v.is_finite().then_some(v)
}

fn extent(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in vals {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-300 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

fn fmt_tick(v: f64, log: bool) -> String {
    if log {
        format!("1e{v:.0}")
    } else if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn render_panel(out: &mut String, p: &Panel, ox: f64) {
    let pts: Vec<Vec<(f64, f64)>> = p
        .series
        .iter()
        .map(|s| s.points.iter().filter_map(|&(x, y)| Some((tx(x, p.log_x)?, tx(y, p.log_y)?))).collect())
        .collect();
    let (x0, x1) = extent(pts.iter().flatten().map(|q| q.0));
    let hl: Vec<f64> = p.hlines.iter().filter_map(|&h| tx(h, p.log_y)).collect();
    let (y0, y1) = extent(pts.iter().flatten().map(|q| q.1).chain(hl.iter().copied()));
    let (w, h) = (PANEL_W - 2.0 * MARGIN, PANEL_H - 2.0 * MARGIN);
    let sx = |x: f64| ox + MARGIN + (x - x0) / (x1 - x0) * w;
    let sy = |y: f64| MARGIN + (1.0 - (y - y0) / (y1 - y0)) * h;

    let _ = writeln!(
        out,
        r##"<rect x="{:.1}" y="{MARGIN:.1}" width="{w:.1}" height="{h:.1}" fill="none" stroke="#444"/>"##,
        ox + MARGIN
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="13">{}</text>"#,
        ox + PANEL_W / 2.0,
        MARGIN - 14.0,
        escape(&p.title)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11">{}</text>"#,
        ox + PANEL_W / 2.0,
        PANEL_H - 8.0,
        escape(&p.x_label)
    );
    for (v, anchor, x, y) in [
        (y0, "end", ox + MARGIN - 4.0, sy(y0)),
        (y1, "end", ox + MARGIN - 4.0, sy(y1) + 8.0),
    ] {
        let _ = writeln!(
            out,
            r#"<text x="{x:.1}" y="{y:.1}" text-anchor="{anchor}" font-size="9">{}</text>"#,
            fmt_tick(v, p.log_y)
        );
    }
    for (v, anchor) in [(x0, "start"), (x1, "end")] {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="{anchor}" font-size="9">{}</text>"#,
            sx(v),
            MARGIN + h + 12.0,
            fmt_tick(v, p.log_x)
        );
    }
    for y in hl {
        let _ = writeln!(
            out,
            r##"<line x1="{:.1}" y1="{:.2}" x2="{:.1}" y2="{:.2}" stroke="#999" stroke-dasharray="4 3"/>"##,
            sx(x0),
            sy(y),
            sx(x1),
            sy(y)
        );
    }
    for (i, (s, q)) in p.series.iter().zip(&pts).enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        match s.style {
            Style::Line => {
                let mut d = String::new();
                for (j, &(x, y)) in q.iter().enumerate() {
                    let _ = write!(d, "{}{:.2},{:.2}", if j == 0 { "M" } else { " L" }, sx(x), sy(y));
                }
                if !d.is_empty() {
                    let _ = writeln!(out, r#"<path d="{d}" fill="none" stroke="{colour}" stroke-width="1.2"/>"#);
                }
            }
            Style::Dots => {
                for &(x, y) in q {
                    let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{colour}"/>"#, sx(x), sy(y));
                }
            }
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" fill="{colour}">{}</text>"#,
            ox + MARGIN + 6.0,
            MARGIN + 14.0 + 12.0 * i as f64,
            escape(&s.name)
        );
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Panels side by side. `comments` go into the file as `<!-- ... -->` lines.
pub fn render(panels: &[Panel], comments: &[String]) -> String {
    let width = PANEL_W * panels.len().max(1) as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{PANEL_H:.0}" viewBox="0 0 {width:.0} {PANEL_H:.0}">"#
    );
    for c in comments {
        let _ = writeln!(out, "<!-- {} -->", c.replace("--", "- -"));
    }
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, p) in panels.iter().enumerate() {
        render_panel(&mut out, p, PANEL_W * i as f64);
    }
    out.push_str("</svg>\n");
    out
}

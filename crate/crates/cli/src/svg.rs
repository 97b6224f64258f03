//! Self-contained SVG phase portraits. Coordinates are written with two
//! decimals, so equal scenes give identical bytes.

use std::fmt::Write;

pub const PANEL: f64 = 360.0;
const MARGIN: f64 = 36.0;
const TITLE: f64 = 28.0;

pub const BACKGROUND: &str = "#1b2230";
pub const STREAM: &str = "#5b6b85";
pub const TRAJECTORY: &str = "#e0483e";
pub const FLOW: &str = "#f2b134";
pub const AVERAGE: &str = "#3e8ee0";
pub const ICT: &str = "#ffffff";

#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    pub points: Vec<[f64; 2]>,
    pub color: &'static str,
    pub width: f64,
    pub dashed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarkerKind {
    Stable,
    Unstable,
    Center,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Marker {
    pub at: [f64; 2],
    pub kind: MarkerKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circle {
    pub center: [f64; 2],
    pub radius: f64,
    pub color: &'static str,
    pub dashed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    /// `[[x_min, x_max], [y_min, y_max]]`.
    pub bounds: [[f64; 2]; 2],
    /// Short arrows of the direction field, one polyline each.
    pub streamlines: Vec<Vec<[f64; 2]>>,
    pub curves: Vec<Polyline>,
    pub circles: Vec<Circle>,
    pub markers: Vec<Marker>,
}

impl Panel {
    pub fn new(title: impl Into<String>, bounds: [[f64; 2]; 2]) -> Self {
        Self {
            title: title.into(),
            bounds,
            streamlines: Vec::new(),
            curves: Vec::new(),
            circles: Vec::new(),
            markers: Vec::new(),
        }
    }
}

struct Frame {
    x0: f64,
    y0: f64,
    bounds: [[f64; 2]; 2],
}

impl Frame {
    fn px(&self, p: [f64; 2]) -> (f64, f64) {
        let [[xa, xb], [ya, yb]] = self.bounds;
        let u = (p[0] - xa) / (xb - xa);
        let v = (p[1] - ya) / (yb - ya);
        (self.x0 + u * PANEL, self.y0 + (1.0 - v) * PANEL)
    }

    fn scale(&self) -> f64 {
        PANEL / (self.bounds[0][1] - self.bounds[0][0])
    }

    fn inside(&self, p: [f64; 2]) -> bool {
        let [[xa, xb], [ya, yb]] = self.bounds;
        p[0] >= xa && p[0] <= xb && p[1] >= ya && p[1] <= yb
    }
}

/// Splits a polyline into the runs that stay inside the panel.
fn visible_runs(frame: &Frame, pts: &[[f64; 2]]) -> Vec<Vec<(f64, f64)>> {
    let mut runs = Vec::new();
    let mut cur = Vec::new();
    for &p in pts {
        if p[0].is_finite() && p[1].is_finite() && frame.inside(p) {
            cur.push(frame.px(p));
        } else if !cur.is_empty() {
            runs.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        runs.push(cur);
    }
    runs
}

fn path_data(run: &[(f64, f64)]) -> String {
    let mut d = String::with_capacity(run.len() * 14);
    for (i, (x, y)) in run.iter().enumerate() {
        let cmd = if i == 0 { 'M' } else { 'L' };
        let _ = write!(d, "{cmd}{x:.2} {y:.2}");
    }
    d
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn draw_panel(out: &mut String, panel: &Panel, x0: f64, y0: f64, clip: usize) {
    let frame = Frame { x0, y0, bounds: panel.bounds };
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="14">{}</text>"#,
        x0 + PANEL / 2.0,
        y0 - 10.0,
        escape(&panel.title)
    );
    let _ = writeln!(
        out,
        r#"<rect x="{x0:.2}" y="{y0:.2}" width="{PANEL:.2}" height="{PANEL:.2}" fill="{BACKGROUND}"/>"#
    );
    let _ = writeln!(out, r#"<g clip-path="url(#clip{clip})">"#);

    let _ = writeln!(out, r#"<g stroke="{STREAM}" stroke-width="0.8" fill="none">"#);
    for s in &panel.streamlines {
        for run in visible_runs(&frame, s) {
            if run.len() >= 2 {
                let _ = writeln!(out, r#"<path d="{}"/>"#, path_data(&run));
                // arrow head at the end of the segment
                let (xa, ya) = run[run.len() - 2];
                let (xb, yb) = run[run.len() - 1];
                let len = (xb - xa).hypot(yb - ya);
                if len > 0.0 {
                    let (ux, uy) = ((xb - xa) / len, (yb - ya) / len);
                    let (l, w) = (4.0, 2.2);
                    let _ = writeln!(
                        out,
                        r#"<path d="M{:.2} {:.2}L{xb:.2} {yb:.2}L{:.2} {:.2}"/>"#,
                        xb - l * ux + w * uy,
                        yb - l * uy - w * ux,
                        xb - l * ux - w * uy,
                        yb - l * uy + w * ux,
                    );
                }
            }
        }
    }
    let _ = writeln!(out, "</g>");

    for c in &panel.circles {
        let (cx, cy) = frame.px(c.center);
        let dash = if c.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            out,
            r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="{:.2}" fill="none" stroke="{}" stroke-width="1.6"{dash}/>"#,
            c.radius * frame.scale(),
            c.color
        );
    }

    for c in &panel.curves {
        let dash = if c.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        for run in visible_runs(&frame, &c.points) {
            let _ = writeln!(
                out,
                r#"<path d="{}" fill="none" stroke="{}" stroke-width="{:.2}" stroke-linejoin="round"{dash}/>"#,
                path_data(&run),
                c.color,
                c.width
            );
        }
    }

    for m in &panel.markers {
        if !frame.inside(m.at) {
            continue;
        }
        let (x, y) = frame.px(m.at);
        let (fill, stroke) = match m.kind {
            MarkerKind::Stable => ("#2fbf71", "#ffffff"),
            MarkerKind::Unstable => (BACKGROUND, "#ffffff"),
            MarkerKind::Center => ("#ffffff", "#ffffff"),
        };
        let _ = writeln!(
            out,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="4.00" fill="{fill}" stroke="{stroke}" stroke-width="1.5"/>"#
        );
    }
    let _ = writeln!(out, "</g>");

    // axes ticks at the bounds
    let [[xa, xb], [ya, yb]] = panel.bounds;
    let _ = writeln!(
        out,
        r##"<rect x="{x0:.2}" y="{y0:.2}" width="{PANEL:.2}" height="{PANEL:.2}" fill="none" stroke="#333333"/>"##
    );
    let _ = writeln!(
        out,
        r#"<text x="{x0:.2}" y="{:.2}" font-size="10">{xa}</text><text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{xb}</text>"#,
        y0 + PANEL + 14.0,
        x0 + PANEL,
        y0 + PANEL + 14.0
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{ya}</text><text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{yb}</text>"#,
        x0 - 4.0,
        y0 + PANEL,
        x0 - 4.0,
        y0 + 10.0
    );
}

/// Panels side by side under a common title.
pub fn render(title: &str, panels: &[Panel]) -> String {
    let n = panels.len().max(1) as f64;
    let width = MARGIN + n * (PANEL + MARGIN);
    let height = TITLE + 2.0 * MARGIN + PANEL;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="16">{}</text>"#,
        width / 2.0,
        escape(title)
    );
    let _ = writeln!(out, "<defs>");
    for i in 0..panels.len() {
        let x0 = MARGIN + i as f64 * (PANEL + MARGIN);
        let _ = writeln!(
            out,
            r#"<clipPath id="clip{i}"><rect x="{x0:.2}" y="{:.2}" width="{PANEL:.2}" height="{PANEL:.2}"/></clipPath>"#,
            TITLE + MARGIN
        );
    }
    let _ = writeln!(out, "</defs>");
    for (i, p) in panels.iter().enumerate() {
        draw_panel(&mut out, p, MARGIN + i as f64 * (PANEL + MARGIN), TITLE + MARGIN, i);
    }
    out.push_str("</svg>\n");
    out
}

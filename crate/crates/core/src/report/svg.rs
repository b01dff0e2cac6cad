//! Direct SVG rendering.
//!
//! Coordinates are printed with two decimals and every element is emitted
//! in data order, so output is byte-stable for a given input. The only
//! run-dependent text is the generator comment carrying the tool version.

use std::fmt::Write;

use crate::compare::{Claim, ComparisonMatrix};
use crate::report::manifest::{TOOL_NAME, TOOL_VERSION};

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 600.0;

const FONT: &str = "sans-serif";
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_BOTTOM: f64 = 60.0;

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

struct Canvas {
    body: String,
}

impl Canvas {
    fn new() -> Self {
        Canvas {
            body: String::new(),
        }
    }

    fn raw(&mut self, s: &str) {
        self.body.push_str(s);
        self.body.push('\n');
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, style: &str) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" {style}/>"#
        );
    }

    fn text(&mut self, x: f64, y: f64, size: u32, anchor: &str, s: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" font-family="{FONT}" font-size="{size}" text-anchor="{anchor}">{}</text>"#,
            esc(s)
        );
    }

    fn finish(self, title: &str) -> String {
        let mut out = String::new();
        out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        let _ = writeln!(out, "<!-- generator: {TOOL_NAME} {TOOL_VERSION} -->");
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
        );
        let _ = writeln!(out, "<title>{}</title>", esc(title));
        let _ = writeln!(
            out,
            r##"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##
        );
        out.push_str(&self.body);
        out.push_str("</svg>\n");
        out
    }
}

/// Tick positions covering `[lo, hi]` at a 1/2/5 step.
fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let span = (hi - lo).max(f64::EPSILON);
    let raw = span / target.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    let r = (v * 1e6).round() / 1e6;
    if r == 0.0 {
        "0".into()
    } else {
        format!("{r}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalPoint {
    pub label: String,
    pub center: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalPanel {
    pub title: String,
    pub points: Vec<IntervalPoint>,
    /// Complete-pooling estimate, drawn as a dashed horizontal line.
    pub pooled: Option<f64>,
}

/// Side-by-side interval panels on a shared vertical scale, with a solid line
/// at zero. Each group is one `<g class="group">`.
pub fn interval_figure(title: &str, y_label: &str, panels: &[IntervalPanel]) -> String {
    let mut c = Canvas::new();
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    for p in panels.iter().flat_map(|p| &p.points) {
        lo = lo.min(p.lower);
        hi = hi.max(p.upper);
    }
    let pad = 0.05 * (hi - lo).max(1e-9);
    let (lo, hi) = (lo - pad, hi + pad);

    let plot_top = MARGIN_TOP;
    let plot_bottom = HEIGHT - MARGIN_BOTTOM;
    let y_of = |v: f64| plot_bottom - (v - lo) / (hi - lo) * (plot_bottom - plot_top);
    let n_panels = panels.len().max(1) as f64;
    let gap = 20.0;
    let panel_w = (WIDTH - MARGIN_LEFT - MARGIN_RIGHT - gap * (n_panels - 1.0)) / n_panels;

    c.text(WIDTH / 2.0, 24.0, 16, "middle", title);
    c.raw(&format!(
        r#"<text x="16" y="{:.2}" font-family="{FONT}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        (plot_top + plot_bottom) / 2.0,
        (plot_top + plot_bottom) / 2.0,
        esc(y_label)
    ));
    for t in ticks(lo, hi, 6) {
        let y = y_of(t);
        c.line(
            MARGIN_LEFT - 4.0,
            y,
            MARGIN_LEFT,
            y,
            r##"stroke="#000000""##,
        );
        c.text(MARGIN_LEFT - 6.0, y + 4.0, 10, "end", &fmt_tick(t));
    }

    for (pi, panel) in panels.iter().enumerate() {
        let x0 = MARGIN_LEFT + pi as f64 * (panel_w + gap);
        let x1 = x0 + panel_w;
        c.raw(&format!(
            r#"<g class="panel" data-title="{}">"#,
            esc(&panel.title)
        ));
        c.raw(&format!(
            r##"<rect x="{x0:.2}" y="{plot_top:.2}" width="{panel_w:.2}" height="{:.2}" fill="none" stroke="#000000"/>"##,
            plot_bottom - plot_top
        ));
        c.text((x0 + x1) / 2.0, plot_top - 8.0, 12, "middle", &panel.title);
        if lo <= 0.0 && hi >= 0.0 {
            c.line(
                x0,
                y_of(0.0),
                x1,
                y_of(0.0),
                r##"class="zero" stroke="#000000""##,
            );
        }
        if let Some(pooled) = panel.pooled {
            c.line(
                x0,
                y_of(pooled),
                x1,
                y_of(pooled),
                r##"class="pooled" stroke="#555555" stroke-dasharray="6 4""##,
            );
        }
        let n = panel.points.len().max(1) as f64;
        for (i, p) in panel.points.iter().enumerate() {
            let x = x0 + (i as f64 + 0.5) * panel_w / n;
            c.raw(&format!(r#"<g class="group" data-id="{}">"#, esc(&p.label)));
            c.line(
                x,
                y_of(p.lower),
                x,
                y_of(p.upper),
                r##"stroke="#1f4e79" stroke-width="2""##,
            );
            c.raw(&format!(
                r##"<circle cx="{x:.2}" cy="{:.2}" r="3.5" fill="#1f4e79"/>"##,
                y_of(p.center)
            ));
            c.text(x, plot_bottom + 16.0, 10, "middle", &p.label);
            c.raw("</g>");
        }
        c.raw("</g>");
    }
    c.finish(title)
}

fn claim_fill(claim: Claim) -> (&'static str, &'static str) {
    match claim {
        Claim::Higher => ("higher", "#1f4e79"),
        Claim::Lower => ("lower", "#9ecae1"),
        Claim::Indeterminate => ("indeterminate", "#f0f0f0"),
    }
}

/// Square claim grid: row group versus column group, three shades plus a
/// legend. One `<rect class="cell ...">` per ordered pair.
pub fn matrix_figure(title: &str, matrix: &ComparisonMatrix) -> String {
    let mut c = Canvas::new();
    let n = matrix.len();
    let label_space = 70.0;
    let legend_w = 150.0;
    let avail_w = WIDTH - label_space - legend_w - 20.0;
    let avail_h = HEIGHT - MARGIN_TOP - label_space - 10.0;
    let cell = (avail_w.min(avail_h) / n.max(1) as f64).min(40.0);
    let x0 = label_space;
    let y0 = MARGIN_TOP + label_space;
    let font = (cell * 0.6).clamp(5.0, 12.0) as u32;

    c.text(WIDTH / 2.0, 24.0, 16, "middle", title);
    for (i, id) in matrix.group_ids.iter().enumerate() {
        let mid = (i as f64 + 0.5) * cell;
        c.text(x0 - 4.0, y0 + mid + font as f64 / 3.0, font, "end", id);
        let (tx, ty) = (x0 + mid + font as f64 / 3.0, y0 - 4.0);
        c.raw(&format!(
            r#"<text x="{tx:.2}" y="{ty:.2}" font-family="{FONT}" font-size="{font}" text-anchor="start" transform="rotate(-90 {tx:.2} {ty:.2})">{}</text>"#,
            esc(id)
        ));
    }
    for j in 0..n {
        for k in 0..n {
            let Some(claim) = matrix.claim(j, k) else {
                continue;
            };
            let (class, fill) = claim_fill(claim);
            c.raw(&format!(
                r##"<rect class="cell {class}" data-row="{}" data-col="{}" x="{:.2}" y="{:.2}" width="{cell:.2}" height="{cell:.2}" fill="{fill}" stroke="#ffffff" stroke-width="0.5"/>"##,
                esc(&matrix.group_ids[j]),
                esc(&matrix.group_ids[k]),
                x0 + k as f64 * cell,
                y0 + j as f64 * cell,
            ));
        }
    }

    let lx = x0 + n as f64 * cell + 20.0;
    let mut ly = y0;
    c.raw(r#"<g class="legend">"#);
    for (claim, text) in [
        (Claim::Higher, "row higher than column"),
        (Claim::Lower, "row lower than column"),
        (Claim::Indeterminate, "no confident claim"),
    ] {
        let (_, fill) = claim_fill(claim);
        c.raw(&format!(
            r##"<rect x="{lx:.2}" y="{ly:.2}" width="12" height="12" fill="{fill}" stroke="#000000" stroke-width="0.5"/>"##
        ));
        c.text(lx + 18.0, ly + 10.0, 10, "start", text);
        ly += 20.0;
    }
    c.text(
        lx,
        ly + 10.0,
        10,
        "start",
        &format!("method: {}", matrix.method),
    );
    c.text(
        lx,
        ly + 26.0,
        10,
        "start",
        &format!("level: {}", matrix.level),
    );
    c.raw("</g>");
    c.finish(title)
}

/// Curve over a log-scaled x axis, one `<circle class="point">` per sample.
pub fn log_curve_figure(
    title: &str,
    x_label: &str,
    y_label: &str,
    xs: &[f64],
    ys: &[f64],
) -> String {
    let mut c = Canvas::new();
    let lx: Vec<f64> = xs.iter().map(|x| x.log10()).collect();
    let (x_lo, x_hi) = lx
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(*v), b.max(*v))
        });
    let (y_lo, y_hi) = (0.0, 1.0);
    let left = MARGIN_LEFT;
    let right = WIDTH - MARGIN_RIGHT;
    let top = MARGIN_TOP;
    let bottom = HEIGHT - MARGIN_BOTTOM;
    let px = |v: f64| left + (v - x_lo) / (x_hi - x_lo).max(f64::EPSILON) * (right - left);
    let py = |v: f64| bottom - (v - y_lo) / (y_hi - y_lo) * (bottom - top);

    c.text(WIDTH / 2.0, 24.0, 16, "middle", title);
    c.raw(&format!(
        r##"<rect x="{left:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#000000"/>"##,
        right - left,
        bottom - top
    ));
    for d in (x_lo.ceil() as i64)..=(x_hi.floor() as i64) {
        let x = px(d as f64);
        c.line(x, bottom, x, bottom + 4.0, r##"stroke="#000000""##);
        c.text(x, bottom + 16.0, 10, "middle", &format!("1e{d}"));
    }
    for t in ticks(y_lo, y_hi, 5) {
        let y = py(t);
        c.line(left - 4.0, y, left, y, r##"stroke="#000000""##);
        c.text(left - 6.0, y + 4.0, 10, "end", &fmt_tick(t));
    }
    c.text((left + right) / 2.0, HEIGHT - 16.0, 12, "middle", x_label);
    c.raw(&format!(
        r#"<text x="16" y="{:.2}" font-family="{FONT}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        (top + bottom) / 2.0,
        (top + bottom) / 2.0,
        esc(y_label)
    ));

    let mut path = String::new();
    for (x, y) in lx.iter().zip(ys) {
        let _ = write!(path, "{:.2},{:.2} ", px(*x), py(*y));
    }
    c.raw(&format!(
        r##"<polyline class="curve" points="{}" fill="none" stroke="#1f4e79" stroke-width="2"/>"##,
        path.trim_end()
    ));
    for (x, y) in lx.iter().zip(ys) {
        c.raw(&format!(
            r##"<circle class="point" cx="{:.2}" cy="{:.2}" r="1.5" fill="#1f4e79"/>"##,
            px(*x),
            py(*y)
        ));
    }
    c.finish(title)
}

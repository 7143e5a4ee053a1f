//! Plain SVG 1.1 renderings: phase diagram, angle-coloured flow lines,
//! log–log exponent fits and martingale drift.
//!
//! Every renderer is a pure function of its inputs, so identical data gives
//! byte-identical files.

use std::fmt::Write;

use crate::estimation::ExponentFit;
use crate::flowlines::{FlowLine, PointCloud};
use crate::formulas::{classify_phase, Phase};
use crate::martingales::CheckpointRow;
use crate::{Error, Result};

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 56.0;

/// Linear map from a data box onto the plot area, y pointing up.
#[derive(Debug, Clone, Copy)]
struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        if !(x1 > x0 && y1 > y0) || ![x0, x1, y0, y1].iter().all(|v| v.is_finite()) {
            return Err(Error::Domain(format!("degenerate plot box [{x0},{x1}]x[{y0},{y1}]")));
        }
        Ok(Frame { x0, x1, y0, y1 })
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        H - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * MARGIN)
    }

    /// Frame with equal units on both axes containing the given box.
    fn isotropic(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        Frame::new(x0, x1, y0, y1)?;
        let sx = (x1 - x0) / (W - 2.0 * MARGIN);
        let sy = (y1 - y0) / (H - 2.0 * MARGIN);
        let s = sx.max(sy);
        let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
        let (hw, hh) = (s * (W - 2.0 * MARGIN) / 2.0, s * (H - 2.0 * MARGIN) / 2.0);
        Frame::new(cx - hw, cx + hw, cy - hh, cy + hh)
    }
}

struct Doc {
    body: String,
}

impl Doc {
    fn new(title: &str) -> Self {
        let mut body = String::new();
        let _ = writeln!(body, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(
            body,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(body, "<title>{}</title>", escape(title));
        let _ = writeln!(body, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(body, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
        Doc { body }
    }

    fn raw(&mut self, s: &str) {
        self.body.push_str(s);
        self.body.push('\n');
    }

    fn line(&mut self, a: (f64, f64), b: (f64, f64), stroke: &str, extra: &str) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{stroke}" {extra}/>"#,
            a.0, a.1, b.0, b.1
        );
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, s: &str) {
        let _ = writeln!(self.body, r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}">{}</text>"#, escape(s));
    }

    fn polyline(&mut self, pts: impl Iterator<Item = (f64, f64)>, stroke: &str, width: f64) {
        let mut d = String::new();
        for (x, y) in pts {
            let _ = write!(d, "{x:.2},{y:.2} ");
        }
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="{width}" stroke-linejoin="round"/>"#,
            d.trim_end()
        );
    }

    fn axes(&mut self, f: &Frame, xlabel: &str, ylabel: &str, ticks: usize) {
        let (l, r, b, t) = (MARGIN, W - MARGIN, H - MARGIN, MARGIN);
        self.raw(&format!(r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#, r - l, b - t));
        for i in 0..=ticks {
            let u = i as f64 / ticks as f64;
            let xv = f.x0 + u * (f.x1 - f.x0);
            let yv = f.y0 + u * (f.y1 - f.y0);
            let (px, py) = (f.px(xv), f.py(yv));
            self.line((px, b), (px, b + 4.0), "black", "");
            self.text(px, b + 16.0, "middle", &tick(xv));
            self.line((l - 4.0, py), (l, py), "black", "");
            self.text(l - 6.0, py + 4.0, "end", &tick(yv));
        }
        self.text(W / 2.0, H - 12.0, "middle", xlabel);
        self.raw(&format!(
            r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">{}</text>"#,
            H / 2.0,
            H / 2.0,
            escape(ylabel)
        ));
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn phase_color(p: Phase) -> &'static str {
    match p {
        Phase::NotDefined => "#d9d9d9",
        Phase::TrunkPlusLoops => "#6baed6",
        Phase::LightCone => "#ffd92f",
        Phase::BoundaryTracing => "#000000",
        Phase::BoundaryHitting => "#a1d99b",
        Phase::BoundaryAvoiding => "#fdae6b",
    }
}

/// Angle in `[−π, π]` mapped to a hue wheel, so ±θ get distinct colours.
pub fn angle_color(angle: f64) -> String {
    let u = (angle / std::f64::consts::TAU).rem_euclid(1.0);
    hsl_hex(u * 360.0, 0.75, 0.45)
}

fn hsl_hex(h: f64, s: f64, l: f64) -> String {
    let c = (1.0 - (2.0 * l - 1.0).abs()) * s;
    let hp = h / 60.0;
    let x = c * (1.0 - (hp.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = l - c / 2.0;
    let to = |v: f64| ((v + m).clamp(0.0, 1.0) * 255.0).round() as u8;
    format!("#{:02x}{:02x}{:02x}", to(r), to(g), to(b))
}

/// SLE_κ(ρ) phase regions over `κ ∈ (0,4)`, `ρ ∈ [rho_min, rho_max]`, with the
/// `ρ = −2` line drawn on top.
pub fn phase_diagram(kappa_steps: usize, rho_steps: usize, rho_min: f64, rho_max: f64) -> Result<String> {
    if kappa_steps == 0 || rho_steps == 0 {
        return Err(Error::Domain("phase diagram needs at least one cell per axis".into()));
    }
    let f = Frame::new(0.0, 4.0, rho_min, rho_max)?;
    let mut doc = Doc::new("SLE_kappa(rho) phases");
    let dk = 4.0 / kappa_steps as f64;
    let dr = (rho_max - rho_min) / rho_steps as f64;
    for i in 0..kappa_steps {
        let kappa = (i as f64 + 0.5) * dk;
        // Consecutive cells of one phase are merged into a single rect.
        let mut j = 0;
        while j < rho_steps {
            let phase = classify_phase(kappa, rho_min + (j as f64 + 0.5) * dr)?.phase;
            let mut end = j + 1;
            while end < rho_steps && classify_phase(kappa, rho_min + (end as f64 + 0.5) * dr)?.phase == phase {
                end += 1;
            }
            let (x0, x1) = (f.px(i as f64 * dk), f.px((i + 1) as f64 * dk));
            let (ya, yb) = (f.py(rho_min + end as f64 * dr), f.py(rho_min + j as f64 * dr));
            doc.raw(&format!(
                r#"<rect x="{x0:.2}" y="{ya:.2}" width="{:.2}" height="{:.2}" fill="{}" class="{}"/>"#,
                x1 - x0,
                yb - ya,
                phase_color(phase),
                phase.name()
            ));
            j = end;
        }
    }
    if rho_min < -2.0 && rho_max > -2.0 {
        doc.line((f.px(0.0), f.py(-2.0)), (f.px(4.0), f.py(-2.0)), "black", r#"stroke-width="2" class="boundary-tracing""#);
    }
    doc.axes(&f, "kappa", "rho", 4);
    let legend = [
        Phase::LightCone,
        Phase::TrunkPlusLoops,
        Phase::BoundaryHitting,
        Phase::BoundaryAvoiding,
        Phase::NotDefined,
    ];
    for (k, p) in legend.iter().enumerate() {
        let y = MARGIN + 8.0 + 16.0 * k as f64;
        let x = W - MARGIN - 150.0;
        doc.raw(&format!(r#"<rect x="{x}" y="{y}" width="12" height="12" fill="{}" stroke="black"/>"#, phase_color(*p)));
        doc.text(x + 18.0, y + 10.0, "start", p.name());
    }
    Ok(doc.finish())
}

fn bounds<'a>(paths: impl Iterator<Item = &'a [[f64; 2]]>) -> Option<(f64, f64, f64, f64)> {
    let mut b: Option<(f64, f64, f64, f64)> = None;
    for p in paths.flatten() {
        b = Some(match b {
            None => (p[0], p[0], p[1], p[1]),
            Some((a, c, d, e)) => (a.min(p[0]), c.max(p[0]), d.min(p[1]), e.max(p[1])),
        });
    }
    b
}

/// Polylines in data coordinates with equal axis units. Paths with an angle
/// are coloured by it, others drawn in grey. `window` defaults to the
/// bounding box of the data.
pub fn curves(title: &str, paths: &[(&[[f64; 2]], Option<f64>)], window: Option<(f64, f64, f64, f64)>) -> Result<String> {
    let (x0, x1, y0, y1) = match window.or_else(|| bounds(paths.iter().map(|p| p.0))) {
        Some(b) => b,
        None => return Err(Error::Domain("nothing to draw".into())),
    };
    let pad = 1e-9_f64.max(0.02 * (x1 - x0).max(y1 - y0));
    let f = Frame::isotropic(x0 - pad, x1 + pad, y0 - pad, y1 + pad)?;
    let mut doc = Doc::new(title);
    doc.line((MARGIN, f.py(0.0)), (W - MARGIN, f.py(0.0)), "#999999", r#"stroke-dasharray="4 3""#);
    for (pts, angle) in paths {
        if pts.len() < 2 {
            continue;
        }
        let color = angle.map(angle_color).unwrap_or_else(|| "#333333".into());
        doc.polyline(pts.iter().map(|p| (f.px(p[0]), f.py(p[1]))), &color, 0.8);
    }
    doc.axes(&f, "x", "y", 4);
    Ok(doc.finish())
}

/// Flow lines, each coloured by its angle.
pub fn flow_lines(title: &str, lines: &[(FlowLine, f64)]) -> Result<String> {
    let v: Vec<(&[[f64; 2]], Option<f64>)> = lines.iter().map(|(l, a)| (l.points.as_slice(), Some(*a))).collect();
    curves(title, &v, None)
}

/// One layer per path of a cloud; angle-varying paths are drawn in grey.
pub fn point_cloud(title: &str, cloud: &PointCloud, window: Option<(f64, f64, f64, f64)>) -> Result<String> {
    let v: Vec<(&[[f64; 2]], Option<f64>)> =
        (0..cloud.paths.len()).map(|k| (cloud.path_points(k), cloud.paths[k].angle)).collect();
    curves(title, &v, window)
}

/// Log–log scatter of `(scale, value ± stderr)` with the fitted line and,
/// when given, a line of the predicted slope through the data centroid.
pub fn loglog_plot(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    points: &[(f64, f64, f64)],
    fit: &ExponentFit,
    predicted_slope: Option<f64>,
) -> Result<String> {
    let logs: Vec<(f64, f64, f64, f64)> = points
        .iter()
        .filter(|p| p.0 > 0.0 && p.1 > 0.0)
        .map(|&(x, y, e)| {
            let lo = if y - e > 0.0 { (y - e).ln() } else { y.ln() - 1.0 };
            (x.ln(), y.ln(), lo, (y + e).ln())
        })
        .collect();
    if logs.is_empty() {
        return Err(Error::Domain("no positive points for a log-log plot".into()));
    }
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, _, lo, hi) in &logs {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(lo);
        y1 = y1.max(hi);
    }
    let px = 0.1 * (x1 - x0).max(1e-3);
    let py = 0.1 * (y1 - y0).max(1e-3);
    let f = Frame::new(x0 - px, x1 + px, y0 - py, y1 + py)?;
    let mut doc = Doc::new(title);
    let (ea, eb) = (f.x0, f.x1);
    let clip = r#"clip-path="url(#plot)""#;
    doc.raw(&format!(
        r#"<defs><clipPath id="plot"><rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}"/></clipPath></defs>"#,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    ));
    let fitted = |x: f64| fit.intercept + fit.slope * x;
    doc.line((f.px(ea), f.py(fitted(ea))), (f.px(eb), f.py(fitted(eb))), "#1f77b4", &format!(r#"stroke-width="1.5" {clip}"#));
    if let Some(s) = predicted_slope {
        let n = logs.len() as f64;
        let (mx, my) = (logs.iter().map(|p| p.0).sum::<f64>() / n, logs.iter().map(|p| p.1).sum::<f64>() / n);
        let pl = |x: f64| my + s * (x - mx);
        doc.line((f.px(ea), f.py(pl(ea))), (f.px(eb), f.py(pl(eb))), "#d62728", &format!(r#"stroke-dasharray="6 4" {clip}"#));
    }
    for &(x, y, lo, hi) in &logs {
        doc.line((f.px(x), f.py(lo)), (f.px(x), f.py(hi)), "black", "");
        doc.raw(&format!(r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="black"/>"#, f.px(x), f.py(y)));
    }
    doc.axes(&f, &format!("log {xlabel}"), &format!("log {ylabel}"), 4);
    let mut legend = format!("fit slope {:.4} ± {:.4}", fit.slope, fit.stderr);
    if let Some(s) = predicted_slope {
        legend.push_str(&format!(", predicted {s:.4}"));
    }
    doc.text(MARGIN + 8.0, MARGIN + 16.0, "start", &legend);
    Ok(doc.finish())
}

/// Checkpoint means with ±stderr bars against the initial value `m0`.
pub fn drift_plot(title: &str, m0: f64, rows: &[CheckpointRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Domain("no checkpoints to plot".into()));
    }
    let t1 = rows.iter().map(|r| r.t).fold(0.0_f64, f64::max).max(1e-12);
    let mut y0 = m0;
    let mut y1 = m0;
    for r in rows {
        y0 = y0.min(r.mean - r.stderr);
        y1 = y1.max(r.mean + r.stderr);
    }
    let pad = 0.15 * (y1 - y0).max(1e-6 * m0.abs().max(1.0));
    let f = Frame::new(0.0, t1 * 1.05, y0 - pad, y1 + pad)?;
    let mut doc = Doc::new(title);
    doc.line((f.px(0.0), f.py(m0)), (f.px(f.x1), f.py(m0)), "#d62728", r#"stroke-dasharray="6 4""#);
    for r in rows {
        let x = f.px(r.t);
        doc.line((x, f.py(r.mean - r.stderr)), (x, f.py(r.mean + r.stderr)), "black", "");
        doc.raw(&format!(r##"<circle cx="{x:.2}" cy="{:.2}" r="3" fill="#1f77b4"/>"##, f.py(r.mean)));
    }
    doc.axes(&f, "t", "mean M_t", 4);
    Ok(doc.finish())
}

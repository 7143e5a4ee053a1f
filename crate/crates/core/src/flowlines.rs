//! Flow lines of `e^{i(h/χ+θ)}` on a sampled field, angle-varying flow lines,
//! light cones and fans.
//!
//! A zero field points north: the direction at `p` is `h(p)/χ + θ + π/2`, so
//! the zero-angle flow line from the origin with `−λ` on ℝ₋ and `λ` on ℝ₊
//! leaves vertically.

use crate::error::{Error, Result};
use crate::gff::GffField;
use crate::loewner::{Polyline, TracePoint};
use crate::rng::replica_rng;
use rand::Rng as _;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Why a trace ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceStop {
    /// Reached the rectangle; the last point lies on it.
    Boundary,
    /// Left the exit disk; the last point lies on its circle.
    Exit,
    Budget,
    /// Re-entered one cell too often, or circled inside one (a lattice vortex).
    SelfTrap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowLine {
    pub points: Vec<[f64; 2]>,
    pub stop: TraceStop,
}

impl FlowLine {
    /// Arc-length parametrized polyline.
    pub fn to_polyline(&self) -> Polyline {
        let mut t = 0.0;
        let mut prev = self.points[0];
        let points = self
            .points
            .iter()
            .map(|&p| {
                t += ((p[0] - prev[0]).powi(2) + (p[1] - prev[1]).powi(2)).sqrt();
                prev = p;
                TracePoint { t, x: p[0], y: p[1] }
            })
            .collect();
        Polyline { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Piecewise-constant angle schedule; durations are arc lengths. The last
/// piece may have infinite duration, meaning "until the trace stops".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleSchedule {
    pub pieces: Vec<(f64, f64)>,
}

impl AngleSchedule {
    pub fn constant(angle: f64) -> Self {
        AngleSchedule { pieces: vec![(angle, f64::INFINITY)] }
    }

    /// Angles must lie in `[−θ/2, θ/2]` and durations be positive.
    pub fn validate(&self, theta: f64) -> Result<()> {
        if self.pieces.is_empty() {
            return Err(Error::Domain("empty angle schedule".into()));
        }
        for &(a, d) in &self.pieces {
            if !(d > 0.0) {
                return Err(Error::Domain(format!("schedule duration must be positive, got {d}")));
            }
            if !a.is_finite() || a.abs() > theta / 2.0 + 1e-12 {
                return Err(Error::Domain(format!("schedule angle {a} outside [-{0}, {0}]", theta / 2.0)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    LightCone,
    Fan,
    Trace,
}

/// One constituent path of a cloud: `points[start..start+len]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSummary {
    pub start: usize,
    pub len: usize,
    /// Fixed angle for fans and traces; `None` for angle-varying paths.
    pub angle: Option<f64>,
    pub stop: TraceStop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<[f64; 2]>,
    pub provenance: Provenance,
    pub meta: serde_json::Value,
    pub paths: Vec<PathSummary>,
}

impl PointCloud {
    fn from_lines(lines: Vec<(Option<f64>, FlowLine)>, provenance: Provenance, meta: serde_json::Value) -> Self {
        let mut points = Vec::with_capacity(lines.iter().map(|(_, l)| l.len()).sum());
        let mut paths = Vec::with_capacity(lines.len());
        for (angle, l) in lines {
            paths.push(PathSummary { start: points.len(), len: l.len(), angle, stop: l.stop });
            points.extend(l.points);
        }
        PointCloud { points, provenance, meta, paths }
    }

    pub fn path_points(&self, k: usize) -> &[[f64; 2]] {
        let p = &self.paths[k];
        &self.points[p.start..p.start + p.len]
    }
}

/// Euler tracer for flow lines of one field.
#[derive(Debug, Clone)]
pub struct FlowTracer<'a> {
    field: &'a GffField,
    chi: f64,
    pub step: f64,
    pub max_steps: usize,
    /// A cell entered more often than this stops the trace as self-trapped.
    pub max_cell_visits: u32,
    /// Optional exit disk `(cx, cy, radius)`.
    pub exit: Option<(f64, f64, f64)>,
    /// Mirror steps that cross the bottom edge back into the domain instead
    /// of stopping there.
    pub reflect_bottom: bool,
}

impl<'a> FlowTracer<'a> {
    /// Step `0.1 ×` grid spacing, 20 visits per cell and a budget of
    /// `40 × (nx + ny)` steps.
    pub fn new(field: &'a GffField, chi: f64) -> Result<Self> {
        if chi == 0.0 || !chi.is_finite() {
            return Err(Error::Domain(format!("chi must be finite and nonzero, got {chi}")));
        }
        let g = &field.grid;
        Ok(FlowTracer {
            field,
            chi,
            step: 0.1 * g.spacing,
            max_steps: 40 * (g.nx + g.ny),
            max_cell_visits: 20,
            exit: None,
            reflect_bottom: false,
        })
    }

    pub fn field(&self) -> &GffField {
        self.field
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    fn check_start(&self, p: [f64; 2]) -> Result<()> {
        let g = &self.field.grid;
        let inside = p[0] >= g.x0 && p[0] <= g.x1() && p[1] >= g.y0 && p[1] <= g.y1();
        if !inside || !p[0].is_finite() || !p[1].is_finite() {
            return Err(Error::Domain(format!("start ({}, {}) outside the field domain", p[0], p[1])));
        }
        Ok(())
    }

    /// Direction angle at `p` for flow-line angle `theta`.
    pub fn direction(&self, p: [f64; 2], theta: f64) -> f64 {
        self.field.evaluate_closed(p[0], p[1]) / self.chi + theta + FRAC_PI_2
    }

    pub fn trace(&self, start: [f64; 2], theta: f64) -> Result<FlowLine> {
        self.angle_varying(start, &AngleSchedule::constant(theta))
    }

    /// Concatenated Euler segments, one per schedule piece.
    pub fn angle_varying(&self, start: [f64; 2], schedule: &AngleSchedule) -> Result<FlowLine> {
        self.check_start(start)?;
        if schedule.pieces.is_empty() {
            return Err(Error::Domain("empty angle schedule".into()));
        }
        let mut walk = Walk::new(self, start);
        for &(angle, duration) in &schedule.pieces {
            let n = if duration.is_finite() { (duration / self.step).ceil().max(1.0) as usize } else { usize::MAX };
            if let Some(stop) = walk.run(angle, n) {
                return Ok(walk.finish(stop));
            }
        }
        // The schedule ran out before any stop condition.
        Ok(walk.finish(TraceStop::Budget))
    }

    /// Flow lines at `n_angles` equally spaced angles in `[−θ/2, θ/2]`.
    pub fn fan(&self, start: [f64; 2], theta: f64, n_angles: usize) -> Result<PointCloud> {
        check_theta(theta)?;
        if n_angles == 0 {
            return Err(Error::Domain("fan needs at least one angle".into()));
        }
        let angles = fan_angles(theta, n_angles);
        let lines = collect_results(map_indices(angles.len(), |k| self.trace(start, angles[k]).map(|l| (Some(angles[k]), l))))?;
        let meta = serde_json::json!({
            "start": start, "theta": theta, "n_angles": n_angles, "step": self.step, "chi": self.chi,
        });
        Ok(PointCloud::from_lines(lines, Provenance::Fan, meta))
    }

    /// Inner approximation of the light cone by `n_paths` angle-varying
    /// flow lines with at most `max_changes` angle changes each.
    ///
    /// Path 0 is the angle-0 flow line. Other even-indexed paths draw uniform
    /// angles with exponential durations; odd-indexed paths alternate between
    /// `±θ/2`. The mean duration of path `k` is log-spaced between the step
    /// and the domain width, so switches happen at every scale. Path `k` uses stream `k` of `seed`.
    pub fn light_cone(&self, start: [f64; 2], theta: f64, n_paths: usize, max_changes: usize, seed: u64) -> Result<PointCloud> {
        check_theta(theta)?;
        if self.field.values.iter().any(|v| !(v / self.chi).is_finite()) {
            return Err(Error::Domain("field values overflow after division by chi".into()));
        }
        let g = &self.field.grid;
        let width = (g.x1() - g.x0).max(g.y1() - g.y0);
        let (lo, hi) = (self.step.ln(), width.ln());
        let schedule_for = |k: usize| -> AngleSchedule {
            if theta == 0.0 || k == 0 {
                return AngleSchedule::constant(0.0);
            }
            let mut r = replica_rng(seed, k as u64);
            let frac = if n_paths > 1 { (k / 2) as f64 / ((n_paths - 1) / 2).max(1) as f64 } else { 0.5 };
            let mean = (lo + (hi - lo) * frac).exp();
            let exp = Exp::new(1.0 / mean).unwrap();
            let half = theta / 2.0;
            let mut sign = if r.random::<bool>() { 1.0 } else { -1.0 };
            let mut pieces = Vec::with_capacity(max_changes + 1);
            for _ in 0..max_changes {
                let angle = if k % 2 == 0 { r.random_range(-half..=half) } else { sign * half };
                sign = -sign;
                pieces.push((angle, exp.sample(&mut r).max(self.step)));
            }
            let last = if k % 2 == 0 { r.random_range(-half..=half) } else { sign * half };
            pieces.push((last, f64::INFINITY));
            AngleSchedule { pieces }
        };
        let lines = collect_results(map_indices(n_paths, |k| self.angle_varying(start, &schedule_for(k)).map(|l| (None, l))))?;
        let meta = serde_json::json!({
            "start": start, "theta": theta, "n_paths": n_paths, "max_changes": max_changes,
            "seed": seed, "step": self.step, "chi": self.chi,
        });
        Ok(PointCloud::from_lines(lines, Provenance::LightCone, meta))
    }
}

/// `−θ/2 + kθ/(n−1)`, or the single angle 0.
pub fn fan_angles(theta: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n).map(|k| -theta / 2.0 + k as f64 * theta / (n - 1) as f64).collect()
}

fn check_theta(theta: f64) -> Result<()> {
    if !(0.0..=std::f64::consts::PI).contains(&theta) {
        return Err(Error::Domain(format!("theta must lie in [0, pi], got {theta}")));
    }
    Ok(())
}

#[cfg(feature = "parallel")]
fn map_indices<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_indices<T>(n: usize, f: impl Fn(usize) -> T) -> Vec<T> {
    (0..n).map(f).collect()
}

fn collect_results<T>(v: Vec<Result<T>>) -> Result<Vec<T>> {
    v.into_iter().collect()
}

/// Mutable state of one trace across schedule pieces.
struct Walk<'t, 'a> {
    tracer: &'t FlowTracer<'a>,
    points: Vec<[f64; 2]>,
    cell: (i64, i64),
    visits: HashMap<(i64, i64), u32>,
    steps: usize,
    in_cell: usize,
}

impl<'t, 'a> Walk<'t, 'a> {
    fn new(tracer: &'t FlowTracer<'a>, start: [f64; 2]) -> Self {
        let mut w = Walk { tracer, points: vec![start], cell: (i64::MIN, i64::MIN), visits: HashMap::new(), steps: 0, in_cell: 0 };
        w.cell = w.cell_of(start);
        w.visits.insert(w.cell, 1);
        w
    }

    fn cell_of(&self, p: [f64; 2]) -> (i64, i64) {
        let g = &self.tracer.field.grid;
        (((p[0] - g.x0) / g.spacing).floor() as i64, ((p[1] - g.y0) / g.spacing).floor() as i64)
    }

    /// Up to `n` Euler steps at `angle`; `Some` when the trace must end.
    fn run(&mut self, angle: f64, n: usize) -> Option<TraceStop> {
        let t = self.tracer;
        let g = &t.field.grid;
        // Euler can cycle between two points of one cell, which the visit
        // count never sees: travelling four cell widths without leaving the
        // cell counts as self-trapped.
        let stall = (4.0 * g.spacing / t.step).ceil() as usize;
        for _ in 0..n {
            if self.steps >= t.max_steps {
                return Some(TraceStop::Budget);
            }
            let p = *self.points.last().unwrap();
            let phi = t.direction(p, angle);
            let mut q = [p[0] + t.step * phi.cos(), p[1] + t.step * phi.sin()];
            if t.reflect_bottom && q[1] <= g.y0 {
                q[1] = 2.0 * g.y0 - q[1];
                if q[1] <= g.y0 {
                    q[1] = g.y0 + 1e-3 * t.step;
                }
            }
            self.steps += 1;
            if let Some((cx, cy, r)) = t.exit {
                let d = ((q[0] - cx).powi(2) + (q[1] - cy).powi(2)).sqrt();
                if d >= r {
                    self.points.push(circle_crossing(p, q, [cx, cy], r));
                    return Some(TraceStop::Exit);
                }
            }
            if !g.strictly_inside(q[0], q[1]) {
                self.points.push(rectangle_crossing(p, q, g.x0, g.x1(), g.y0, g.y1()));
                return Some(TraceStop::Boundary);
            }
            self.points.push(q);
            let c = self.cell_of(q);
            if c == self.cell {
                self.in_cell += 1;
                if self.in_cell > stall {
                    return Some(TraceStop::SelfTrap);
                }
            } else {
                self.cell = c;
                self.in_cell = 0;
                let v = self.visits.entry(c).or_insert(0);
                *v += 1;
                if *v > t.max_cell_visits {
                    return Some(TraceStop::SelfTrap);
                }
            }
        }
        None
    }

    fn finish(self, stop: TraceStop) -> FlowLine {
        FlowLine { points: self.points, stop }
    }
}

/// Point where the segment `p → q` (with `p` inside) first meets the
/// rectangle boundary.
fn rectangle_crossing(p: [f64; 2], q: [f64; 2], x0: f64, x1: f64, y0: f64, y1: f64) -> [f64; 2] {
    let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
    let mut s: f64 = 1.0;
    if dx < 0.0 {
        s = s.min((x0 - p[0]) / dx);
    } else if dx > 0.0 {
        s = s.min((x1 - p[0]) / dx);
    }
    if dy < 0.0 {
        s = s.min((y0 - p[1]) / dy);
    } else if dy > 0.0 {
        s = s.min((y1 - p[1]) / dy);
    }
    let s = s.clamp(0.0, 1.0);
    [(p[0] + s * dx).clamp(x0, x1), (p[1] + s * dy).clamp(y0, y1)]
}

/// Point where `p → q` leaves the disk of radius `r` about `c`.
fn circle_crossing(p: [f64; 2], q: [f64; 2], c: [f64; 2], r: f64) -> [f64; 2] {
    let (px, py) = (p[0] - c[0], p[1] - c[1]);
    let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
    let a = dx * dx + dy * dy;
    let b = 2.0 * (px * dx + py * dy);
    let cc = px * px + py * py - r * r;
    let disc = (b * b - 4.0 * a * cc).max(0.0);
    let s = ((-b + disc.sqrt()) / (2.0 * a)).clamp(0.0, 1.0);
    [p[0] + s * dx, p[1] + s * dy]
}

/// Minimum distance between two polylines, 0 if they cross. Segments are
/// bucketed on a grid of side `cell`, so pairs farther apart than `cell`
/// are skipped; the result is `f64::INFINITY` when no pair is that close.
pub fn polyline_min_distance(a: &[[f64; 2]], b: &[[f64; 2]], cell: f64) -> f64 {
    use crate::loewner::segment_distance;
    use num_complex::Complex64 as C;
    let key = |p: [f64; 2]| ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64);
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for i in 0..a.len().saturating_sub(1) {
        let (k0, k1) = (key(a[i]), key(a[i + 1]));
        for x in k0.0.min(k1.0)..=k0.0.max(k1.0) {
            for y in k0.1.min(k1.1)..=k0.1.max(k1.1) {
                buckets.entry((x, y)).or_default().push(i);
            }
        }
    }
    let c = |p: [f64; 2]| C::new(p[0], p[1]);
    let seg_seg = |p0: [f64; 2], p1: [f64; 2], q0: [f64; 2], q1: [f64; 2]| -> f64 {
        if segments_cross(p0, p1, q0, q1) {
            return 0.0;
        }
        segment_distance(c(p0), c(p1), c(q0))
            .min(segment_distance(c(p0), c(p1), c(q1)))
            .min(segment_distance(c(q0), c(q1), c(p0)))
            .min(segment_distance(c(q0), c(q1), c(p1)))
    };
    let mut best = f64::INFINITY;
    if a.len() < 2 || b.len() < 2 {
        return best;
    }
    for j in 0..b.len() - 1 {
        let (k0, k1) = (key(b[j]), key(b[j + 1]));
        for x in k0.0.min(k1.0) - 1..=k0.0.max(k1.0) + 1 {
            for y in k0.1.min(k1.1) - 1..=k0.1.max(k1.1) + 1 {
                if let Some(ids) = buckets.get(&(x, y)) {
                    for &i in ids {
                        best = best.min(seg_seg(a[i], a[i + 1], b[j], b[j + 1]));
                        if best == 0.0 {
                            return 0.0;
                        }
                    }
                }
            }
        }
    }
    best
}

fn segments_cross(p0: [f64; 2], p1: [f64; 2], q0: [f64; 2], q1: [f64; 2]) -> bool {
    let orient = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let d1 = orient(q0, q1, p0);
    let d2 = orient(q0, q1, p1);
    let d3 = orient(p0, p1, q0);
    let d4 = orient(p0, p1, q1);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

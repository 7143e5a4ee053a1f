//! Chordal Loewner chains with piecewise-constant driving.
//!
//! Step `k` first moves the driving value by `dw_k`, then holds it at
//! `a_k = w0 + Σ_{j≤k} dw_j` for capacity time `dt_k`. Over that interval the
//! flow is the exact vertical-slit map `z ↦ a + √((z−a)² + 4dt)`, so
//! compositions are exact for the discretized driving.

use crate::error::{Error, Result};
use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

/// Points whose imaginary part drops below this are treated as swallowed.
pub const SWALLOW_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoewnerStep {
    pub dw: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ChainRepr", try_from = "ChainRepr")]
pub struct LoewnerChain {
    w0: f64,
    steps: Vec<LoewnerStep>,
    drive: Vec<f64>,
    times: Vec<f64>,
}

/// Wire format: `{"w0": .., "steps": [[dt, dw], ...]}`.
#[derive(Serialize, Deserialize)]
struct ChainRepr {
    w0: f64,
    steps: Vec<(f64, f64)>,
}

impl From<LoewnerChain> for ChainRepr {
    fn from(c: LoewnerChain) -> Self {
        ChainRepr {
            w0: c.w0,
            steps: c.steps.iter().map(|s| (s.dt, s.dw)).collect(),
        }
    }
}

impl TryFrom<ChainRepr> for LoewnerChain {
    type Error = Error;
    fn try_from(r: ChainRepr) -> Result<Self> {
        LoewnerChain::new(r.w0, r.steps.into_iter().map(|(dt, dw)| LoewnerStep { dw, dt }).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `g_t(z) − W_t`.
    pub z: C,
    /// `|g_t′(z)|`.
    pub delta: f64,
    /// Conformal-radius proxy `Y/Δ`.
    pub upsilon: f64,
    pub theta: f64,
    pub s: f64,
}

impl Diagnostics {
    pub fn new(z: C, delta: f64) -> Self {
        let theta = z.im.atan2(z.re);
        // sin(atan2(y, x)) loses relative precision as θ → π.
        Diagnostics { z, delta, upsilon: z.im / delta, theta, s: z.im / z.norm() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

impl TracePoint {
    pub fn z(&self) -> C {
        C::new(self.x, self.y)
    }
}

/// A traced curve, parameterized by capacity.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub points: Vec<TracePoint>,
}

impl Polyline {
    pub fn xy(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.x, p.y)).collect()
    }
}

fn upper_sqrt(w: C, orient: f64) -> C {
    let mut s = w.sqrt();
    if s.im < 0.0 || (s.im == 0.0 && s.re * orient < 0.0) {
        s = -s;
    }
    s
}

/// Forward slit map and its derivative `u/s` at `z`.
#[inline]
pub fn slit_forward(z: C, a: f64, dt: f64) -> (C, C) {
    let u = z - a;
    let s = upper_sqrt(u * u + 4.0 * dt, u.re);
    let sum = s + u;
    let g = if sum.norm_sqr() > 0.0 { u + 4.0 * dt / sum } else { s };
    (g + a, u / s)
}

/// Inverse slit map: the preimage under `z ↦ a + √((z−a)² + 4dt)`.
#[inline]
pub fn slit_inverse(w: C, a: f64, dt: f64) -> C {
    let u = w - a;
    let s = upper_sqrt(u * u - 4.0 * dt, u.re);
    let sum = s + u;
    let z = if sum.norm_sqr() > 16.0 * dt { u - 4.0 * dt / sum } else { s };
    z + a
}

/// Real-line image `a ± √((x−a)² + 4dt)` of a boundary point on the side
/// `sign(x − a)`; `side` decides for points sitting on the driving value.
#[inline]
pub fn slit_forward_real(x: f64, a: f64, dt: f64, side: f64) -> f64 {
    let u = x - a;
    a + side * (u * u + 4.0 * dt).sqrt()
}

impl LoewnerChain {
    pub fn new(w0: f64, steps: Vec<LoewnerStep>) -> Result<Self> {
        if !w0.is_finite() {
            return Err(Error::Domain("w0 must be finite".into()));
        }
        let mut drive = Vec::with_capacity(steps.len());
        let mut times = Vec::with_capacity(steps.len() + 1);
        let mut w = w0;
        let mut t = 0.0;
        times.push(0.0);
        for (k, s) in steps.iter().enumerate() {
            if !(s.dt > 0.0) || !s.dt.is_finite() || !s.dw.is_finite() {
                return Err(Error::Domain(format!("step {k} has invalid dt={} dw={}", s.dt, s.dw)));
            }
            w += s.dw;
            t += s.dt;
            drive.push(w);
            times.push(t);
        }
        Ok(LoewnerChain { w0, steps, drive, times })
    }

    /// Chain from driving samples `(t_i, W_i)`: step `k` holds `W_k` on
    /// `[t_k, t_{k+1})`.
    pub fn from_samples(t: &[f64], w: &[f64]) -> Result<Self> {
        if t.len() != w.len() || t.len() < 2 {
            return Err(Error::Domain("need at least two matching samples".into()));
        }
        let steps = (0..t.len() - 1)
            .map(|k| LoewnerStep {
                dw: if k == 0 { 0.0 } else { w[k] - w[k - 1] },
                dt: t[k + 1] - t[k],
            })
            .collect();
        Self::new(w[0], steps)
    }

    /// Chain with constant step `dt` holding the given driving values.
    pub fn from_values(dt: f64, values: &[f64]) -> Result<Self> {
        let w0 = values.first().copied().unwrap_or(0.0);
        let steps = values
            .iter()
            .enumerate()
            .map(|(k, &w)| LoewnerStep {
                dw: if k == 0 { 0.0 } else { w - values[k - 1] },
                dt,
            })
            .collect();
        Self::new(w0, steps)
    }

    pub fn w0(&self) -> f64 {
        self.w0
    }

    pub fn steps(&self) -> &[LoewnerStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn total_capacity(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Capacity time at the start of each step plus the final time.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Driving value held during step `k`.
    pub fn drive(&self, k: usize) -> f64 {
        self.drive[k]
    }

    /// Driving value in effect at time `t` (left limit at step ends).
    pub fn driving_at(&self, t: f64) -> f64 {
        if t <= 0.0 || self.steps.is_empty() {
            return self.w0;
        }
        let k = self.step_containing(t);
        self.drive[k.min(self.steps.len() - 1)]
    }

    /// Index `k` with `t_k < t ≤ t_{k+1}`.
    fn step_containing(&self, t: f64) -> usize {
        let idx = self.times.partition_point(|&s| s < t);
        idx.saturating_sub(1)
    }

    /// Sub-chain of steps `from..to`, starting from the driving value in
    /// effect just before step `from`.
    pub fn slice(&self, from: usize, to: usize) -> Result<Self> {
        let w0 = if from == 0 { self.w0 } else { self.drive[from - 1] };
        Self::new(w0, self.steps[from..to].to_vec())
    }

    /// Chain with driving scaled by `s` and time by `s²`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(
            self.w0 * s,
            self.steps.iter().map(|st| LoewnerStep { dw: st.dw * s, dt: st.dt * s * s }).collect(),
        )
    }

    /// Runs `(step index, a, dt)` covering `[0, t]`, the last one possibly
    /// truncated.
    fn segments(&self, t: f64) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        let t = t.min(self.total_capacity());
        let n = if t <= 0.0 { 0 } else { self.step_containing(t) + 1 };
        (0..n.min(self.steps.len())).filter_map(move |k| {
            let dt = if self.times[k + 1] <= t { self.steps[k].dt } else { t - self.times[k] };
            (dt > 0.0).then_some((k, self.drive[k], dt))
        })
    }

    /// `g_t(z)` and `|g_t′(z)|`.
    pub fn map_with_derivative(&self, z: C, t: f64) -> Result<(C, f64)> {
        if z.im < 0.0 {
            return Err(Error::Domain("z must lie in the closed upper half plane".into()));
        }
        if t > self.total_capacity() * (1.0 + 1e-12) {
            return Err(Error::Domain(format!("t={t} exceeds the chain capacity")));
        }
        if z.im == 0.0 {
            return self.map_real(z.re, t).map(|(x, d)| (C::new(x, 0.0), d));
        }
        let mut w = z;
        let mut log_d = 0.0;
        for (k, a, dt) in self.segments(t) {
            let (g, d) = slit_forward(w, a, dt);
            if !(g.im >= SWALLOW_GUARD) {
                return Err(Error::Swallowed { step: k });
            }
            log_d += d.norm().ln();
            w = g;
        }
        Ok((w, log_d.exp()))
    }

    fn map_real(&self, x: f64, t: f64) -> Result<(f64, f64)> {
        let side = (x - self.w0).signum();
        if x == self.w0 {
            return Err(Error::Swallowed { step: 0 });
        }
        let mut v = x;
        let mut log_d = 0.0;
        for (k, a, dt) in self.segments(t) {
            let u = v - a;
            if u * side <= 0.0 {
                return Err(Error::Swallowed { step: k });
            }
            let s = side * (u * u + 4.0 * dt).sqrt();
            log_d += (u / s).abs().ln();
            v = a + s;
        }
        Ok((v, log_d.exp()))
    }

    /// `g_t(z) − z` accumulated from per-step increments, which keeps full
    /// relative precision for large `|z|`.
    pub fn displacement(&self, z: C, t: f64) -> Result<C> {
        let mut w = z;
        let mut acc = C::new(0.0, 0.0);
        for (k, a, dt) in self.segments(t) {
            let u = w - a;
            let s = upper_sqrt(u * u + 4.0 * dt, u.re);
            let inc = 4.0 * dt / (s + u);
            if !inc.re.is_finite() || !inc.im.is_finite() {
                return Err(Error::Numerical { step: k, detail: "degenerate increment".into() });
            }
            acc += inc;
            w = z + acc;
            if !(w.im >= SWALLOW_GUARD) {
                return Err(Error::Swallowed { step: k });
            }
        }
        Ok(acc)
    }

    pub fn forward_map(&self, z: C, t: f64) -> Result<C> {
        self.map_with_derivative(z, t).map(|p| p.0)
    }

    pub fn derivative(&self, z: C, t: f64) -> Result<f64> {
        self.map_with_derivative(z, t).map(|p| p.1)
    }

    pub fn diagnostics(&self, z: C, t: f64) -> Result<Diagnostics> {
        let (g, d) = self.map_with_derivative(z, t)?;
        Ok(Diagnostics::new(g - self.driving_at(t), d))
    }

    /// Pulls `w` back through steps `0..k` (exclusive) of the chain.
    fn pull_back(&self, mut w: C, k: usize) -> Result<C> {
        for j in (0..k).rev() {
            w = slit_inverse(w, self.drive[j], self.steps[j].dt);
            if !(w.im > -1e-12) || !w.re.is_finite() {
                return Err(Error::Numerical { step: j, detail: format!("preimage {w} left the half plane") });
            }
        }
        Ok(C::new(w.re, w.im.max(0.0)))
    }

    /// Point of the curve at fraction `f ∈ (0,1]` through step `k`.
    fn curve_point(&self, k: usize, f: f64) -> Result<TracePoint> {
        let dt = self.steps[k].dt * f;
        let w = C::new(self.drive[k], 2.0 * dt.sqrt());
        let z = self.pull_back(w, k)?;
        Ok(TracePoint { t: self.times[k] + dt, x: z.re, y: z.im })
    }

    /// The curve `η(t_k)` at every step end, starting with `η(0) = w0`.
    pub fn trace(&self) -> Result<Polyline> {
        self.trace_refined(1)
    }

    /// Like [`trace`](Self::trace) with `substeps` points per step.
    pub fn trace_refined(&self, substeps: usize) -> Result<Polyline> {
        if self.steps.is_empty() {
            return Err(Error::Domain("empty chain".into()));
        }
        let m = substeps.max(1);
        let jobs: Vec<(usize, f64)> = (0..self.steps.len())
            .flat_map(|k| (1..=m).map(move |i| (k, i as f64 / m as f64)))
            .collect();
        let f = |&(k, frac): &(usize, f64)| self.curve_point(k, frac);
        #[cfg(feature = "parallel")]
        let pts: Result<Vec<TracePoint>> = {
            use rayon::prelude::*;
            jobs.par_iter().map(f).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let pts: Result<Vec<TracePoint>> = jobs.iter().map(f).collect();
        let mut points = Vec::with_capacity(jobs.len() + 1);
        points.push(TracePoint { t: 0.0, x: self.w0, y: 0.0 });
        points.extend(pts?);
        Ok(Polyline { points })
    }

    /// Tip `η(t_{k+1})` after step `k`.
    pub fn tip(&self, k: usize) -> Result<C> {
        self.curve_point(k, 1.0).map(|p| p.z())
    }

    pub fn hitting_time(&self, z: C, eps: f64) -> Result<f64> {
        hitting_time_on(&self.trace()?, z, eps)
    }
}

/// First time the polyline comes within `eps` of `z`, interpolating linearly
/// in time along the first segment that enters the disk.
pub fn hitting_time_on(line: &Polyline, z: C, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Domain("eps must be positive".into()));
    }
    let pts = &line.points;
    let first = pts.first().ok_or(Error::NotHit)?;
    if (first.z() - z).norm() <= eps {
        return Ok(first.t);
    }
    for w in pts.windows(2) {
        let (p, q) = (w[0].z(), w[1].z());
        let d = q - p;
        let f = p - z;
        // |f + s d|² = eps² on s ∈ [0,1]: smallest root.
        let aa = d.norm_sqr();
        let bb = 2.0 * (f.re * d.re + f.im * d.im);
        let cc = f.norm_sqr() - eps * eps;
        if aa == 0.0 {
            continue;
        }
        let disc = bb * bb - 4.0 * aa * cc;
        if disc < 0.0 {
            continue;
        }
        let s = (-bb - disc.sqrt()) / (2.0 * aa);
        if (0.0..=1.0).contains(&s) {
            return Ok(w[0].t + s * (w[1].t - w[0].t));
        }
    }
    Err(Error::NotHit)
}

/// Distance from `z` to the polyline.
pub fn distance_to_polyline(line: &Polyline, z: C) -> f64 {
    let pts = &line.points;
    let mut best = pts.first().map(|p| (p.z() - z).norm()).unwrap_or(f64::INFINITY);
    for w in pts.windows(2) {
        best = best.min(segment_distance(w[0].z(), w[1].z(), z));
    }
    best
}

pub(crate) fn segment_distance(p: C, q: C, z: C) -> f64 {
    let d = q - p;
    let l2 = d.norm_sqr();
    let s = if l2 > 0.0 {
        (((z - p).re * d.re + (z - p).im * d.im) / l2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p + d * s - z).norm()
}

/// Driving function of a curve given as points in the closed upper half
/// plane, starting on ℝ. Each point is mapped to the tip of a vertical slit
/// of the current image; points already absorbed (image on ℝ) are skipped.
pub fn unzip(points: &[C]) -> Result<LoewnerChain> {
    let Some(start) = points.first() else {
        return Err(Error::Domain("empty curve".into()));
    };
    let w0 = start.re;
    let mut images: Vec<C> = points[1..].to_vec();
    let mut steps = Vec::with_capacity(images.len());
    let mut w = w0;
    for k in 0..images.len() {
        let p = images[k];
        if !(p.im > SWALLOW_GUARD) {
            continue;
        }
        let a = p.re;
        let dt = p.im * p.im / 4.0;
        steps.push(LoewnerStep { dw: a - w, dt });
        w = a;
        for q in images[k + 1..].iter_mut() {
            if q.im > 0.0 {
                *q = slit_forward(*q, a, dt).0;
            } else {
                q.im = 0.0;
            }
        }
    }
    LoewnerChain::new(w0, steps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_chain(n: usize, dt: f64) -> LoewnerChain {
        LoewnerChain::new(0.0, vec![LoewnerStep { dw: 0.0, dt }; n]).unwrap()
    }

    #[test]
    fn zero_driving_closed_form() {
        let c = zero_chain(10_000, 1e-4);
        let z = C::new(1.0, 1.0);
        let g = c.forward_map(z, 1.0).unwrap();
        let exact = (z * z + 4.0).sqrt();
        assert!((g - exact).norm() < 1e-12);
        assert_eq!(c.forward_map(z, 0.0).unwrap(), z);
        let d = c.derivative(z, 1.0).unwrap();
        assert!((d - (z / exact).norm()).abs() < 1e-12);
    }

    #[test]
    fn i_is_swallowed_at_one_quarter() {
        let c = zero_chain(10_000, 1e-4);
        let z = C::new(0.0, 1.0);
        assert!(c.forward_map(z, 0.2).is_ok());
        for t in [0.25, 0.2501, 0.5, 1.0] {
            assert!(matches!(c.diagnostics(z, t), Err(Error::Swallowed { .. })), "t={t}");
        }
        // Before swallowing, |g′| follows |z/√(z²+4t)|.
        let d = c.derivative(z, 0.2).unwrap();
        assert!((d - 1.0 / 0.2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn diagnostics_at_time_zero() {
        let c = zero_chain(10, 1e-3);
        let d = c.diagnostics(C::new(0.0, 1.0), 0.0).unwrap();
        assert!((d.theta - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert_eq!((d.s, d.delta, d.upsilon), (1.0, 1.0, 1.0));
    }

    #[test]
    fn hydrodynamic_normalization() {
        let c = LoewnerChain::from_values(1e-3, &(0..1000).map(|k| (k as f64 * 0.01).sin()).collect::<Vec<_>>()).unwrap();
        let z = C::new(3e5, 4e5);
        let g = c.forward_map(z, 1.0).unwrap();
        assert!((g - (z + 2.0 / z)).norm() / z.norm() < 1e-9);
        // The 1/z term itself, to the size of the next-order term |∫W|/|z|.
        let rel = (c.displacement(z, 1.0).unwrap() * z / 2.0 - 1.0).norm();
        assert!(rel < 1e-5, "{rel}");
        let zero = zero_chain(1000, 1e-3);
        let z = C::new(6e5, 8e5);
        let d = zero.displacement(z, 1.0).unwrap();
        assert!((d * z / 2.0 - 1.0).norm() < 1e-9);
    }

    #[test]
    fn slit_maps_invert() {
        let z = C::new(0.3, 0.7);
        let (w, _) = slit_forward(z, 0.1, 0.05);
        assert!((slit_inverse(w, 0.1, 0.05) - z).norm() < 1e-14);
        let tip = slit_inverse(C::new(0.1, 0.0), 0.1, 0.05);
        assert!((tip - C::new(0.1, 2.0 * 0.05f64.sqrt())).norm() < 1e-15);
    }

    #[test]
    fn unzip_recovers_vertical_slit_driving() {
        let pts: Vec<C> = (0..50).map(|k| C::new(0.2, 0.02 * k as f64)).collect();
        let chain = unzip(&pts).unwrap();
        assert!(chain.steps().iter().all(|s| s.dw.abs() < 1e-12));
        assert!((chain.total_capacity() - 0.98f64.powi(2) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn unzip_inverts_trace() {
        let vals: Vec<f64> = (0..200).map(|k| 0.3 * (k as f64 * 0.05).sin()).collect();
        let chain = LoewnerChain::from_values(1e-3, &vals).unwrap();
        let tr = chain.trace().unwrap();
        let pts: Vec<C> = tr.points.iter().map(|p| p.z()).collect();
        let back = unzip(&pts).unwrap();
        assert_eq!(back.len(), chain.len());
        for k in 0..chain.len() {
            assert!((back.drive(k) - chain.drive(k)).abs() < 1e-6, "k={k}");
            assert!((back.steps()[k].dt - chain.steps()[k].dt).abs() < 1e-9);
        }
    }

    #[test]
    fn serde_round_trip() {
        let c = LoewnerChain::from_values(0.01, &[0.0, 0.5, -0.25]).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.starts_with("{\"w0\":0.0,\"steps\":[[0.01,0.0],"));
        let back: LoewnerChain = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn hitting_time_basics() {
        let c = zero_chain(2_500, 1e-4);
        let tr = c.trace().unwrap();
        // η(t) = 2i√t passes i at t = 1/4.
        let t = hitting_time_on(&tr, C::new(0.0, 1.0), 0.1).unwrap();
        assert!(t <= 0.25 && (t - 0.2025).abs() < 1e-3);
        assert_eq!(hitting_time_on(&tr, C::new(0.05, 0.0), 0.1).unwrap(), 0.0);
        assert!(matches!(hitting_time_on(&tr, C::new(5.0, 5.0), 0.1), Err(Error::NotHit)));
    }
}

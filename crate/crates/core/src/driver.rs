//! Driving functions for SLE_κ and one-sided SLE_κ(ρ_L; ρ_R).
//!
//! Samples are taken on a uniform grid `t_i = i·dt`. The Loewner chain built
//! from them holds `W_i` on `[t_i, t_{i+1})`, and force points are pushed
//! through the exact slit map of that step, so `V_i = g_{t_i}(x)` holds to
//! rounding for the discretized chain.

use crate::error::{Error, Result};
use crate::loewner::LoewnerChain;
use crate::rng::{rng, Rng};
use rand::Rng as _;
use rand_distr::{ChiSquared, Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ForcePointConfig {
    /// Starting point of the curve on ℝ.
    #[serde(default)]
    pub start: f64,
    /// Closest first: `start ≥ x_{1,L} > x_{2,L} > …`.
    pub positions_left: Vec<f64>,
    pub weights_left: Vec<f64>,
    /// Closest first: `start ≤ x_{1,R} < x_{2,R} < …`.
    pub positions_right: Vec<f64>,
    pub weights_right: Vec<f64>,
}

impl ForcePointConfig {
    pub fn one_sided_right(x: f64, rho: f64) -> Self {
        ForcePointConfig {
            positions_right: vec![x],
            weights_right: vec![rho],
            ..Default::default()
        }
    }

    pub fn one_sided_left(x: f64, rho: f64) -> Self {
        ForcePointConfig {
            positions_left: vec![x],
            weights_left: vec![rho],
            ..Default::default()
        }
    }

    /// Every position multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let m = |v: &Vec<f64>| v.iter().map(|x| x * s).collect();
        ForcePointConfig {
            start: self.start * s,
            positions_left: m(&self.positions_left),
            weights_left: self.weights_left.clone(),
            positions_right: m(&self.positions_right),
            weights_right: self.weights_right.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Domain(format!("force points: {m}")));
        if self.positions_left.len() != self.weights_left.len()
            || self.positions_right.len() != self.weights_right.len()
        {
            return bad("positions and weights differ in length");
        }
        let all = self.positions_left.iter().chain(&self.positions_right).chain(&self.weights_left).chain(&self.weights_right);
        if !self.start.is_finite() || all.into_iter().any(|x| !x.is_finite()) {
            return bad("non-finite entry");
        }
        let mut prev = self.start;
        for (i, &x) in self.positions_left.iter().enumerate() {
            if x > prev || (i > 0 && x == prev) {
                return bad("left positions must decrease away from the start");
            }
            prev = x;
        }
        let mut prev = self.start;
        for (i, &x) in self.positions_right.iter().enumerate() {
            if x < prev || (i > 0 && x == prev) {
                return bad("right positions must increase away from the start");
            }
            prev = x;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceTrack {
    pub side: Side,
    /// 1-based index counted away from the start.
    pub index: usize,
    pub weight: f64,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    Budget,
    ContinuationThreshold,
    Swallow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrivingFunction {
    pub kappa: f64,
    pub t: Vec<f64>,
    pub w: Vec<f64>,
    pub force_tracks: Vec<ForceTrack>,
    pub stopped_reason: StopReason,
    /// Number of samples at which some force point collided with `W`.
    pub collisions: usize,
}

impl DrivingFunction {
    pub fn chain(&self) -> Result<LoewnerChain> {
        LoewnerChain::from_samples(&self.t, &self.w)
    }

    pub fn terminal(&self) -> f64 {
        *self.w.last().unwrap()
    }
}

fn normal(r: &mut Rng) -> f64 {
    r.sample(StandardNormal)
}

/// Brownian driving `W = √κ B` with `W_0 = 0`.
pub fn sample_sle(kappa: f64, n_steps: usize, dt: f64, seed: u64) -> Result<DrivingFunction> {
    let mut r = rng(seed);
    sample_sle_with(kappa, n_steps, dt, &mut r)
}

pub fn sample_sle_with(kappa: f64, n_steps: usize, dt: f64, r: &mut Rng) -> Result<DrivingFunction> {
    if !(kappa >= 0.0) || !(dt > 0.0) {
        return Err(Error::Domain(format!("need kappa >= 0 and dt > 0 (kappa={kappa}, dt={dt})")));
    }
    let sd = (kappa * dt).sqrt();
    let mut t = Vec::with_capacity(n_steps + 1);
    let mut w = Vec::with_capacity(n_steps + 1);
    let mut x = 0.0;
    t.push(0.0);
    w.push(0.0);
    for i in 1..=n_steps {
        x += sd * normal(r);
        t.push(i as f64 * dt);
        w.push(x);
    }
    Ok(DrivingFunction { kappa, t, w, force_tracks: vec![], stopped_reason: StopReason::Budget, collisions: 0 })
}

/// How the gap between `W` and the nearest force point is advanced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GapScheme {
    /// Squared-Bessel Euler step, negative values clamped to 0.
    TruncatedEuler,
    /// Exact noncentral chi-square transition of the squared-Bessel part;
    /// drift from the remaining force points is added as an Euler term.
    ExactSquaredBessel,
    /// Plain Euler for `W` with all force-point drifts explicit. Requires
    /// every force point to start away from `W`.
    DirectEuler,
}

/// What to do when a collision has weight sum `≤ −2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThresholdPolicy {
    Stop,
    /// Keep the gap process reflecting at 0; used for `ρ = −2` boundary
    /// tracing where the gap is a reflected Bessel-1 process.
    Continue,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoOptions {
    pub scheme: GapScheme,
    pub threshold: ThresholdPolicy,
}

impl Default for RhoOptions {
    fn default() -> Self {
        RhoOptions { scheme: GapScheme::TruncatedEuler, threshold: ThresholdPolicy::Stop }
    }
}

#[derive(Debug, Clone)]
struct Point {
    side: Side,
    weight: f64,
    v: f64,
}

/// Incremental SLE_κ(ρ) state; one call to [`RhoSampler::step`] advances by `dt`.
#[derive(Debug, Clone)]
pub struct RhoSampler {
    kappa: f64,
    dt: f64,
    opts: RhoOptions,
    pub w: f64,
    points: Vec<Point>,
    n_left: usize,
    collisions: usize,
}

/// Outcome of one sampler step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepEvent {
    Continue,
    Collision,
    Threshold,
    Swallow,
}

impl RhoSampler {
    pub fn new(kappa: f64, fp: &ForcePointConfig, dt: f64, opts: RhoOptions) -> Result<Self> {
        if !(kappa > 0.0) || !(dt > 0.0) {
            return Err(Error::Domain(format!("need kappa > 0 and dt > 0 (kappa={kappa}, dt={dt})")));
        }
        fp.validate()?;
        let mut points: Vec<Point> = fp
            .positions_left
            .iter()
            .zip(&fp.weights_left)
            .map(|(&v, &weight)| Point { side: Side::Left, weight, v })
            .collect();
        let n_left = points.len();
        points.extend(fp.positions_right.iter().zip(&fp.weights_right).map(|(&v, &weight)| Point {
            side: Side::Right,
            weight,
            v,
        }));
        if opts.scheme == GapScheme::DirectEuler && points.iter().any(|p| p.v == fp.start) {
            return Err(Error::Domain("direct Euler needs force points away from the start".into()));
        }
        Ok(RhoSampler { kappa, dt, opts, w: fp.start, points, n_left, collisions: 0 })
    }

    pub fn force_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.v)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Changes the step used by subsequent calls to [`step`](Self::step).
    pub fn set_dt(&mut self, dt: f64) -> Result<()> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!("dt must be positive, got {dt}")));
        }
        self.dt = dt;
        Ok(())
    }

    /// Distance from `W` to the nearest force point (infinite if none).
    pub fn nearest_gap(&self) -> f64 {
        [self.adjacent(Side::Left), self.adjacent(Side::Right)]
            .into_iter()
            .flatten()
            .map(|(_, g)| g)
            .fold(f64::INFINITY, f64::min)
    }

    fn collision_tol(&self) -> f64 {
        1e-7 * self.dt.sqrt()
    }

    /// Gap to the nearest point on `side`, with the index of that point.
    fn adjacent(&self, side: Side) -> Option<(usize, f64)> {
        match side {
            Side::Left if self.n_left > 0 => Some((0, self.w - self.points[0].v)),
            Side::Right if self.points.len() > self.n_left => {
                Some((self.n_left, self.points[self.n_left].v - self.w))
            }
            _ => None,
        }
    }

    /// Indices on `side` whose value coincides with the adjacent point.
    fn group(&self, side: Side) -> std::ops::Range<usize> {
        let tol = self.collision_tol();
        let (lo, hi) = match side {
            Side::Left => (0, self.n_left),
            Side::Right => (self.n_left, self.points.len()),
        };
        if lo == hi {
            return lo..lo;
        }
        let v0 = self.points[lo].v;
        let mut end = lo + 1;
        while end < hi && (self.points[end].v - v0).abs() <= tol {
            end += 1;
        }
        lo..end
    }

    pub fn step(&mut self, r: &mut Rng) -> Result<StepEvent> {
        let (k, dt) = (self.kappa, self.dt);
        let w = self.w;
        let db = dt.sqrt() * normal(r);

        // Active side: the nearer adjacent force point.
        let active = match (self.adjacent(Side::Left), self.adjacent(Side::Right)) {
            (Some((_, gl)), Some((_, gr))) => Some(if gl <= gr { Side::Left } else { Side::Right }),
            (Some(_), None) => Some(Side::Left),
            (None, Some(_)) => Some(Side::Right),
            (None, None) => None,
        };

        let drift_of = |p: &Point| {
            let d = w - p.v;
            if d == 0.0 { 0.0 } else { p.weight / d }
        };

        let new_w = match (self.opts.scheme, active) {
            (_, None) => w + k.sqrt() * db,
            (GapScheme::DirectEuler, Some(_)) => {
                let drift: f64 = self.points.iter().map(drift_of).sum();
                w + drift * dt + k.sqrt() * db
            }
            (scheme, Some(side)) => {
                let grp = self.group(side);
                let rho_a: f64 = self.points[grp.clone()].iter().map(|p| p.weight).sum();
                let b: f64 = self
                    .points
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !grp.contains(i))
                    .map(|(_, p)| drift_of(p))
                    .sum();
                let adj = grp.start;
                let sigma = if side == Side::Left { 1.0 } else { -1.0 };
                let gap = (w - self.points[adj].v) * sigma;
                let q = gap * gap;
                let q_new = match scheme {
                    GapScheme::ExactSquaredBessel => {
                        let delta = 1.0 + 2.0 * (rho_a + 2.0) / k;
                        let scale = k * dt;
                        let x = noncentral_chi2(delta, q / scale, r, db / dt.sqrt())?;
                        scale * x + sigma * 2.0 * q.sqrt() * b * dt
                    }
                    _ => q + (k + 2.0 * rho_a + 4.0) * dt + sigma * 2.0 * q.sqrt() * (k.sqrt() * db + b * dt),
                };
                let g = q_new.max(0.0).sqrt();
                let v_adj = crate::loewner::slit_forward_real(self.points[adj].v, w, dt, -sigma);
                v_adj + sigma * g
            }
        };

        // Push every force point through the slit of this step.
        for p in self.points.iter_mut() {
            let side = if p.side == Side::Left { -1.0 } else { 1.0 };
            p.v = crate::loewner::slit_forward_real(p.v, w, dt, side);
        }
        if !new_w.is_finite() {
            return Err(Error::Numerical {
                step: 0,
                detail: format!("W={w} -> {new_w}, force points {:?}", self.force_values().collect::<Vec<_>>()),
            });
        }
        self.w = new_w;

        // Crossing a force point is a collision on that side; clamp.
        let mut event = StepEvent::Continue;
        let tol = self.collision_tol();
        for side in [Side::Left, Side::Right] {
            let Some((adj, gap)) = self.adjacent(side) else { continue };
            if gap < 0.0 {
                if self.opts.scheme == GapScheme::DirectEuler {
                    return Ok(StepEvent::Swallow);
                }
                self.w = self.points[adj].v;
            }
            let (_, gap) = self.adjacent(side).unwrap();
            if gap <= tol {
                self.collisions += 1;
                event = StepEvent::Collision;
                let sum: f64 = self.points[self.group(side)].iter().map(|p| p.weight).sum();
                if sum <= -2.0 && self.opts.threshold == ThresholdPolicy::Stop {
                    return Ok(StepEvent::Threshold);
                }
            }
        }
        Ok(event)
    }
}

/// Draw from χ′²_δ(λ) using `z` as the Gaussian component where applicable.
fn noncentral_chi2(delta: f64, lambda: f64, r: &mut Rng, z: f64) -> Result<f64> {
    let chi2 = |df: f64, r: &mut Rng| -> Result<f64> {
        if df <= 0.0 {
            return Ok(0.0);
        }
        ChiSquared::new(df)
            .map(|d| d.sample(r))
            .map_err(|e| Error::Domain(format!("chi-square({df}): {e}")))
    };
    if delta > 1.0 {
        Ok((z + lambda.sqrt()).powi(2) + chi2(delta - 1.0, r)?)
    } else {
        let n = if lambda > 0.0 {
            Poisson::new(lambda / 2.0)
                .map(|p| p.sample(r))
                .map_err(|e| Error::Domain(format!("poisson({lambda}): {e}")))?
        } else {
            0.0
        };
        chi2(delta + 2.0 * n, r)
    }
}

/// SLE_κ(ρ) driving with the default options.
pub fn sample_sle_rho(kappa: f64, fp: &ForcePointConfig, n_steps: usize, dt: f64, seed: u64) -> Result<DrivingFunction> {
    sample_sle_rho_with(kappa, fp, n_steps, dt, &mut rng(seed), RhoOptions::default())
}

pub fn sample_sle_rho_with(
    kappa: f64,
    fp: &ForcePointConfig,
    n_steps: usize,
    dt: f64,
    r: &mut Rng,
    opts: RhoOptions,
) -> Result<DrivingFunction> {
    let mut s = RhoSampler::new(kappa, fp, dt, opts)?;
    let mut t = vec![0.0];
    let mut w = vec![s.w];
    let mut tracks: Vec<ForceTrack> = s
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| ForceTrack {
            side: p.side,
            index: if i < s.n_left { i + 1 } else { i - s.n_left + 1 },
            weight: p.weight,
            v: vec![p.v],
        })
        .collect();
    let mut reason = StopReason::Budget;
    for i in 1..=n_steps {
        let ev = s.step(r).map_err(|e| match e {
            Error::Numerical { detail, .. } => Error::Numerical { step: i, detail },
            e => e,
        })?;
        if ev == StepEvent::Swallow {
            reason = StopReason::Swallow;
            break;
        }
        t.push(i as f64 * dt);
        w.push(s.w);
        for (tr, p) in tracks.iter_mut().zip(&s.points) {
            tr.v.push(p.v);
        }
        if ev == StepEvent::Threshold {
            reason = StopReason::ContinuationThreshold;
            break;
        }
    }
    Ok(DrivingFunction { kappa, t, w, force_tracks: tracks, stopped_reason: reason, collisions: s.collisions })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnglePath {
    pub dt: f64,
    pub theta: Vec<f64>,
    pub hit_boundary: bool,
}

/// Radial angle SDE `dΘ = (κ′−4)cot Θ dt + √κ′ dB`, stopped when `Θ` leaves
/// `(guard, π−guard)`.
///
/// The step is taken on `Y = d²` with `d` the distance to the nearer end,
/// where `dY = (2(κ′−4) d cot d + κ′)dt + 2√κ′ d dB`; this keeps the Euler
/// scheme from jumping over the boundary layer.
pub fn radial_angle_process(kappa_prime: f64, theta0: f64, n_steps: usize, dt: f64, guard: f64, seed: u64) -> Result<AnglePath> {
    use std::f64::consts::PI;
    if !(kappa_prime > 4.0) {
        return Err(Error::Domain(format!("kappa' must exceed 4, got {kappa_prime}")));
    }
    if !(theta0 > 0.0 && theta0 < PI) {
        return Err(Error::Domain(format!("theta0 must lie in (0,pi), got {theta0}")));
    }
    let mut r = rng(seed);
    let mut th = theta0;
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(th);
    let sk = kappa_prime.sqrt();
    for _ in 0..n_steps {
        let db = dt.sqrt() * normal(&mut r);
        let (d, sign) = if th <= PI / 2.0 { (th, 1.0) } else { (PI - th, -1.0) };
        // d cot d → 1 as d → 0.
        let dcot = if d < 1e-8 { 1.0 } else { d / d.tan() };
        let y = d * d + (2.0 * (kappa_prime - 4.0) * dcot + kappa_prime) * dt + 2.0 * sk * d * sign * db;
        let d_new = y.max(0.0).sqrt();
        th = if sign > 0.0 { d_new } else { PI - d_new };
        out.push(th);
        if th <= guard || th >= PI - guard {
            return Ok(AnglePath { dt, theta: out, hit_boundary: true });
        }
    }
    Ok(AnglePath { dt, theta: out, hit_boundary: false })
}

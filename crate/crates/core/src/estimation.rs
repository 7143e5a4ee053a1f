//! Log–log regressions: box counting, derivative moments of the Loewner
//! map, and two-flow-line non-intersection frequencies.

use crate::error::{Error, Result};
use crate::flowlines::{polyline_min_distance, FlowTracer, TraceStop};
use crate::formulas::{ig_constants, nu_xi, TwoPathWeights};
use crate::gff::{BoundarySpec, GffField, GffSampler, GridSpec};
use crate::loewner::slit_forward;
use crate::rng::replica_rng;
use crate::stats::{ols, Moments};
use crate::Complex64 as C;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub r_squared: f64,
    /// Every scale supplied, fitted or not.
    pub scales: Vec<f64>,
    /// Smallest and largest scale inside the fit.
    pub window: (f64, f64),
}

/// R² below which the smallest scale is dropped from a box-count fit.
pub const WINDOW_R2: f64 = 0.98;

/// Occupied boxes of side `r`, anchored at the lower-left corner of the
/// cloud's bounding box.
pub fn box_counts(points: &[[f64; 2]], r: f64) -> usize {
    let (x0, y0) = points
        .iter()
        .fold((f64::INFINITY, f64::INFINITY), |(a, b), p| (a.min(p[0]), b.min(p[1])));
    let mut seen = HashSet::with_capacity(points.len() / 4 + 16);
    for p in points {
        seen.insert((((p[0] - x0) / r).floor() as i64, ((p[1] - y0) / r).floor() as i64));
    }
    seen.len()
}

/// Slope of `log N(r)` against `log(1/r)`.
///
/// Starting from all scales, the smallest scale is dropped while the fit has
/// `R² < 0.98` and more than three scales remain.
pub fn box_count(points: &[[f64; 2]], scales: &[f64]) -> Result<ExponentFit> {
    if points.is_empty() {
        return Err(Error::DegenerateFit("empty point cloud".into()));
    }
    if scales.len() < 2 || scales.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::DegenerateFit("need at least two positive scales".into()));
    }
    let mut sorted = scales.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let counts: Vec<usize> = sorted.iter().map(|&r| box_counts(points, r)).collect();
    if counts.iter().all(|&n| n == counts[0]) {
        return Err(Error::DegenerateFit(format!("every scale has {} occupied boxes", counts[0])));
    }
    let xs: Vec<f64> = sorted.iter().map(|r| -r.ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|&n| (n as f64).ln()).collect();
    let mut from = 0;
    loop {
        let fit = ols(&xs[from..], &ys[from..], None)
            .ok_or_else(|| Error::DegenerateFit("regression has no spread in scale".into()))?;
        if fit.r_squared >= WINDOW_R2 || sorted.len() - from <= 3 {
            return Ok(ExponentFit {
                slope: fit.slope,
                intercept: fit.intercept,
                stderr: fit.slope_stderr,
                r_squared: fit.r_squared,
                scales: scales.to_vec(),
                window: (sorted[from], *sorted.last().unwrap()),
            });
        }
        from += 1;
    }
}

/// `n` scales geometrically spaced from `r_max` down to `r_min`.
pub fn geometric_scales(r_max: f64, r_min: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![r_max];
    }
    (0..n).map(|k| r_max * (r_min / r_max).powf(k as f64 / (n - 1) as f64)).collect()
}

/// How "the curve reached `B(z, ε)`" is detected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HitRule {
    /// `Υ_t ≤ ε`, with `Υ = Im Z / |g′|` comparable to the distance from `z`
    /// to the hull within a factor 2.
    ConformalRadius,
}

/// Per-ε summary of a Monte Carlo moment estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub eps: f64,
    pub mean: f64,
    pub stderr: f64,
    pub hits: usize,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentScaling {
    pub fit: ExponentFit,
    pub rows: Vec<ScaleRow>,
    pub predicted_slope: f64,
    pub nu: f64,
    pub xi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentOptions {
    pub hit_rule: HitRule,
    /// Escape radius `R`; `None` means `2|z| + 2`.
    pub escape_radius: Option<f64>,
    /// Probes on the semicircle of radius `R` used to detect `σ_R`.
    pub ring_probes: usize,
    /// `dt = clamp((Υ/dt_divisor)², dt_min, dt_max)`.
    pub dt_divisor: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Capacity budget per replica.
    pub t_max: f64,
    pub min_hits: usize,
}

impl Default for MomentOptions {
    fn default() -> Self {
        MomentOptions {
            hit_rule: HitRule::ConformalRadius,
            escape_radius: None,
            ring_probes: 24,
            dt_divisor: 8.0,
            dt_min: 1e-9,
            dt_max: 1e-2,
            t_max: 50.0,
            min_hits: 30,
        }
    }
}

/// One SLE_κ run: `|g′_{τ_ε}(z)|^{ν+r}` for each `ε` hit before `σ_R`
/// (`None` when not hit).
///
/// The driving is Brownian with a step adapted to `Υ_t`; `z` and the probes
/// are pushed through the exact slit map of each step. `σ_R` is declared when
/// some probe `p` on the radius-`R` semicircle has `Υ_p` below half of
/// `min(spacing, Im p)`, or is swallowed.
pub fn moment_replica(kappa: f64, power: f64, z: C, eps: &[f64], opts: &MomentOptions, rng: &mut crate::rng::Rng) -> Vec<Option<f64>> {
    let r_esc = opts.escape_radius.unwrap_or(2.0 * z.norm() + 2.0);
    let m = opts.ring_probes;
    let spacing = std::f64::consts::PI * r_esc / (m + 1) as f64;
    let mut probes: Vec<(C, f64, f64)> = (1..=m)
        .map(|k| {
            let a = std::f64::consts::PI * k as f64 / (m + 1) as f64;
            let p = C::from_polar(r_esc, a);
            (p, 1.0, 0.5 * spacing.min(p.im))
        })
        .collect();
    let sk = kappa.sqrt();
    let mut g = z;
    let mut deriv = 1.0f64;
    let mut w = 0.0f64;
    let mut t = 0.0;
    let mut out = vec![None; eps.len()];
    let mut next = 0;
    while next < eps.len() && t < opts.t_max {
        let ups = g.im / deriv;
        while next < eps.len() && ups <= eps[next] {
            out[next] = Some(deriv.powf(power));
            next += 1;
        }
        if next == eps.len() {
            break;
        }
        let dt = (ups / opts.dt_divisor).powi(2).clamp(opts.dt_min, opts.dt_max);
        let (g1, d1) = slit_forward(g - w, 0.0, dt);
        if !(g1.im > crate::loewner::SWALLOW_GUARD) {
            break;
        }
        deriv *= d1.norm();
        g = g1 + w;
        let mut escaped = false;
        for (p, dp, thr) in probes.iter_mut() {
            let (p1, d) = slit_forward(*p - w, 0.0, dt);
            *dp *= d.norm();
            *p = p1 + w;
            if !(p.im > crate::loewner::SWALLOW_GUARD) || p.im / *dp < *thr {
                escaped = true;
            }
        }
        if escaped {
            break;
        }
        let db: f64 = rng.sample(StandardNormal);
        w += sk * dt.sqrt() * db;
        t += dt;
    }
    out
}

/// Regression of `log E[|g′_{τ_ε}(z)|^{ν+r} 1{τ_ε ≤ σ_R}]` against `log ε`.
pub fn derivative_moment_scaling(
    kappa: f64,
    r: f64,
    z: C,
    eps_list: &[f64],
    replicas: usize,
    seed: u64,
    opts: &MomentOptions,
) -> Result<MomentScaling> {
    if !(kappa > 0.0) {
        return Err(Error::Domain(format!("kappa must be positive, got {kappa}")));
    }
    let arg = z.arg();
    if !(z.im > 0.0) || arg < 0.05 || arg > std::f64::consts::PI - 0.05 {
        return Err(Error::Domain(format!("arg z must be bounded away from 0 and pi, got {arg}")));
    }
    if eps_list.len() < 2 || eps_list.windows(2).any(|w| !(w[1] < w[0])) || eps_list.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Domain("eps list must hold at least two strictly decreasing positive values".into()));
    }
    let (nu, xi) = nu_xi(kappa, r);
    let power = nu + r;
    let run = |k: usize| moment_replica(kappa, power, z, eps_list, opts, &mut replica_rng(seed, k as u64));
    #[cfg(feature = "parallel")]
    let results: Vec<Vec<Option<f64>>> = (0..replicas).into_par_iter().map(run).collect();
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Vec<Option<f64>>> = (0..replicas).map(run).collect();
    let mut rows = Vec::with_capacity(eps_list.len());
    for (i, &eps) in eps_list.iter().enumerate() {
        let mut m = Moments::default();
        let mut hits = 0;
        for res in &results {
            match res[i] {
                Some(v) => {
                    hits += 1;
                    m.push(v);
                }
                None => m.push(0.0),
            }
        }
        if hits < opts.min_hits {
            return Err(Error::InsufficientHits { eps, hits, needed: opts.min_hits });
        }
        rows.push(ScaleRow { eps, mean: m.mean, stderr: m.stderr(), hits, n: replicas });
    }
    let fit = log_fit(&rows)?;
    Ok(MomentScaling { fit, rows, predicted_slope: -xi - r, nu, xi })
}

/// Weighted fit of `log mean` on `log ε`, with delta-method weights.
fn log_fit(rows: &[ScaleRow]) -> Result<ExponentFit> {
    let x: Vec<f64> = rows.iter().map(|r| r.eps.ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.mean.ln()).collect();
    let w: Vec<f64> = rows
        .iter()
        .map(|r| {
            let rel = r.stderr / r.mean;
            if rel > 0.0 { 1.0 / (rel * rel) } else { 1e12 }
        })
        .collect();
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateFit("zero frequency at some scale".into()));
    }
    let f = ols(&x, &y, Some(&w)).ok_or_else(|| Error::DegenerateFit("no spread in eps".into()))?;
    let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let (lo, hi) = eps.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &e| (a.min(e), b.max(e)));
    Ok(ExponentFit { slope: f.slope, intercept: f.intercept, stderr: f.slope_stderr, r_squared: f.r_squared, scales: eps, window: (lo, hi) })
}

/// Settings of the two-flow-line experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPathOptions {
    /// Cells across the domain `[−L, L] × [0, L]`.
    pub grid: usize,
    pub half_width: f64,
    pub fluctuation_scale: f64,
    /// Paths are traced until they leave this disk about 0.
    pub exit_radius: f64,
    /// `δ` of the auxiliary events.
    pub delta: f64,
    pub min_survivors: usize,
    /// Traces start this many grid spacings above ℝ.
    pub start_height: f64,
    /// Mirror steps that cross ℝ. Without it paths of boundary-hitting weight
    /// stop at their first contact with ℝ and almost never reach the exit circle.
    pub reflect_bottom: bool,
    /// Euler step in grid spacings.
    pub step: f64,
    pub max_cell_visits: u32,
    /// Paths closer than this many grid spacings count as touching.
    pub touch_distance: f64,
}

impl TwoPathOptions {
    pub fn new(grid: usize, fluctuation_scale: f64) -> Self {
        TwoPathOptions {
            grid,
            half_width: 1.25,
            fluctuation_scale,
            exit_radius: 1.0,
            delta: 0.05,
            min_survivors: 30,
            start_height: 1.0,
            reflect_bottom: true,
            step: 0.1,
            max_cell_visits: 20,
            touch_distance: 1.0,
        }
    }
}

/// Outcome of one field at one ε.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPathSample {
    pub min_distance: f64,
    /// Minimum pairwise distance exceeds the touch distance.
    pub disjoint: bool,
    /// Portions outside radius 1/2 stay `δ` apart.
    pub tails_separated: bool,
    /// Neither path enters the disk of radius `δε` about 0.
    pub avoids_center: bool,
    /// Both paths reached the exit circle.
    pub both_exited: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRow {
    pub eps: f64,
    pub n: usize,
    pub disjoint: usize,
    pub tails_separated: usize,
    pub avoids_center: usize,
    /// All three events at once.
    pub e_delta: usize,
    pub both_exited: usize,
}

impl FrequencyRow {
    pub fn frequency(&self) -> f64 {
        self.disjoint as f64 / self.n as f64
    }

    pub fn stderr(&self) -> f64 {
        let p = self.frequency();
        (p * (1.0 - p) / self.n as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonIntersection {
    pub fit: ExponentFit,
    pub rows: Vec<FrequencyRow>,
    pub predicted_alpha: f64,
}

/// Real-line data of the two-path configuration on the grid's bottom edge.
pub fn two_path_boundary(grid: &GridSpec, kappa: f64, theta1: f64, theta2: f64, a: f64, b: f64, eps: f64) -> Result<BoundarySpec> {
    let c = ig_constants(kappa)?;
    let line = TwoPathWeights::line_boundary(kappa, theta1, theta2, a, b, -eps / 2.0, eps / 2.0)?;
    BoundarySpec::from_line(grid, &line, c.chi, 0.0)
}

/// Traces the two flow lines on one field and classifies the outcome.
pub fn two_path_sample(
    tracer: &FlowTracer,
    theta1: f64,
    theta2: f64,
    eps: f64,
    delta: f64,
    y: f64,
    touch: f64,
) -> Result<TwoPathSample> {
    let l1 = tracer.trace([-eps / 2.0, y], theta1)?;
    let l2 = tracer.trace([eps / 2.0, y], theta2)?;
    // Buckets of twice the threshold resolve it exactly while keeping dense
    // tangles cheap; larger distances read as infinite.
    let d = polyline_min_distance(&l1.points, &l2.points, 2.0 * touch);
    let tail = |l: &[[f64; 2]]| -> Vec<[f64; 2]> {
        l.iter().copied().skip_while(|p| p[0].hypot(p[1]) < 0.5).collect()
    };
    let (t1, t2) = (tail(&l1.points), tail(&l2.points));
    let tails_separated = t1.len() < 2 || t2.len() < 2 || polyline_min_distance(&t1, &t2, delta) > delta;
    let r0 = delta * eps;
    let avoids = |l: &[[f64; 2]]| l.iter().all(|p| p[0].hypot(p[1]) > r0);
    Ok(TwoPathSample {
        min_distance: d,
        disjoint: d > touch,
        tails_separated,
        avoids_center: avoids(&l1.points) && avoids(&l2.points),
        both_exited: l1.stop == TraceStop::Exit && l2.stop == TraceStop::Exit,
    })
}

/// Frequency that flow lines of angles `θ₁ > θ₂` started at `∓ε/2` stay
/// disjoint up to the unit circle, regressed on `log ε`.
///
/// Replica `k` uses the same zero-boundary sample (stream `k`) at every ε.
#[allow(clippy::too_many_arguments)]
pub fn nonintersection_experiment(
    kappa: f64,
    theta1: f64,
    theta2: f64,
    a: f64,
    b: f64,
    eps_list: &[f64],
    replicas: usize,
    seed: u64,
    opts: &TwoPathOptions,
) -> Result<NonIntersection> {
    let c = ig_constants(kappa)?;
    let predicted_alpha = crate::formulas::nonintersection_alpha(kappa, theta1, theta2, a, b)?;
    if eps_list.len() < 2 || eps_list.iter().any(|&e| !(e > 0.0 && e < opts.exit_radius)) {
        return Err(Error::Domain("need at least two eps values inside the exit disk".into()));
    }
    let l = opts.half_width;
    let grid = GridSpec::covering(-l, l, 0.0, l, opts.grid)?;
    if eps_list.iter().any(|&e| e < 2.0 * grid.spacing) {
        return Err(Error::Domain("every eps must span at least two grid cells".into()));
    }
    let mut sampler = GffSampler::new(grid);
    let mut setups = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let bs = two_path_boundary(&grid, kappa, theta1, theta2, a, b, eps)?;
        let h = sampler.harmonic_extension(&bs.node_values(&grid))?;
        setups.push((bs, h));
    }
    let run = |k: usize, sampler: &mut GffSampler| -> Result<Vec<TwoPathSample>> {
        let noise = sampler.sample_zero_boundary(opts.fluctuation_scale, &mut replica_rng(seed, k as u64));
        let mut out = Vec::with_capacity(eps_list.len());
        for (i, &eps) in eps_list.iter().enumerate() {
            let (bs, h) = &setups[i];
            let f = GffField {
                grid,
                boundary: bs.clone(),
                fluctuation_scale: opts.fluctuation_scale,
                seed,
                values: h.iter().zip(&noise).map(|(a, b)| a + b).collect(),
                harmonic_part: h.clone(),
            };
            let mut tr = FlowTracer::new(&f, c.chi)?;
            tr.exit = Some((0.0, 0.0, opts.exit_radius));
            tr.reflect_bottom = opts.reflect_bottom;
            tr.step = opts.step * grid.spacing;
            tr.max_cell_visits = opts.max_cell_visits;
            out.push(two_path_sample(&tr, theta1, theta2, eps, opts.delta, opts.start_height * grid.spacing, opts.touch_distance * grid.spacing)?);
        }
        Ok(out)
    };
    #[cfg(feature = "parallel")]
    let results: Vec<Result<Vec<TwoPathSample>>> = (0..replicas)
        .into_par_iter()
        .map_init(|| GffSampler::new(grid), |s, k| run(k, s))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<Vec<TwoPathSample>>> = (0..replicas).map(|k| run(k, &mut sampler)).collect();
    let results: Vec<Vec<TwoPathSample>> = results.into_iter().collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(eps_list.len());
    for (i, &eps) in eps_list.iter().enumerate() {
        let mut row = FrequencyRow { eps, n: replicas, disjoint: 0, tails_separated: 0, avoids_center: 0, e_delta: 0, both_exited: 0 };
        for r in &results {
            let s = r[i];
            row.disjoint += s.disjoint as usize;
            row.tails_separated += s.tails_separated as usize;
            row.avoids_center += s.avoids_center as usize;
            row.e_delta += (s.disjoint && s.tails_separated && s.avoids_center) as usize;
            row.both_exited += s.both_exited as usize;
        }
        rows.push(row);
    }
    let i_max = eps_list.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    if rows[i_max].disjoint < opts.min_survivors {
        return Err(Error::InsufficientHits { eps: eps_list[i_max], hits: rows[i_max].disjoint, needed: opts.min_survivors });
    }
    let srows: Vec<ScaleRow> = rows
        .iter()
        .map(|r| ScaleRow { eps: r.eps, mean: r.frequency(), stderr: r.stderr(), hits: r.disjoint, n: r.n })
        .collect();
    let fit = log_fit(&srows)?;
    Ok(NonIntersection { fit, rows, predicted_alpha })
}

//! The one-point martingale of the Loewner flow and the marked-point product
//! of the two-flow-line configuration, with Monte Carlo constancy checks.

use crate::driver::{ForcePointConfig, RhoOptions, RhoSampler, StepEvent};
use crate::error::{Error, Result};
use crate::formulas::{nu_xi, TwoPathWeights};
use crate::loewner::{slit_forward, Diagnostics, LoewnerChain, SWALLOW_GUARD};
use crate::rng::{replica_rng, Rng};
use crate::stats::Moments;
use crate::Complex64 as C;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Both algebraic forms of the one-point martingale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnePointValue {
    /// `|Z|^r Y^ξ Δ^{ν−ξ}`.
    pub product_form: f64,
    /// `S^{−r} Υ^{ξ+r} Δ^{ν+r}`.
    pub angle_form: f64,
}

/// Both forms from the diagnostics of `z`.
///
/// The product form carries `Δ^{ν−ξ}`: with `Y = ΥΔ` and `|Z| = Y/S` this is
/// what equals the angle form, and Itô's formula confirms the angle form has
/// zero drift.
pub fn one_point_forms(d: &Diagnostics, kappa: f64, r: f64) -> OnePointValue {
    let (nu, xi) = nu_xi(kappa, r);
    let y = d.z.im;
    OnePointValue {
        product_form: d.z.norm().powf(r) * y.powf(xi) * d.delta.powf(nu - xi),
        angle_form: d.s.powf(-r) * d.upsilon.powf(xi + r) * d.delta.powf(nu + r),
    }
}

/// `M_t` for the chain's driving at capacity `t`.
pub fn one_point_martingale(chain: &LoewnerChain, z: C, kappa: f64, r: f64, t: f64) -> Result<OnePointValue> {
    let d = chain.diagnostics(z, t)?;
    Ok(one_point_forms(&d, kappa, r))
}

/// Mean of a martingale at each checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRow {
    pub t: f64,
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    /// Replicas already stopped by this checkpoint.
    pub stopped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstancyReport {
    pub m0: f64,
    pub rows: Vec<CheckpointRow>,
}

impl ConstancyReport {
    /// Largest `|mean − M_0| / stderr` over the checkpoints.
    pub fn max_drift_ratio(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| if r.stderr > 0.0 { (r.mean - self.m0).abs() / r.stderr } else if r.mean == self.m0 { 0.0 } else { f64::INFINITY })
            .fold(0.0, f64::max)
    }

    pub fn passes(&self, bands: f64) -> bool {
        self.max_drift_ratio() <= bands
    }
}

/// Localization and step control for the one-point check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnePointOptions {
    /// Stop (and freeze `M`) once `Υ_t ≤ stop_upsilon · Υ_0`.
    pub stop_upsilon: f64,
    pub dt_max: f64,
    /// Step bound `(c · Im Z)²` near the real line.
    pub dt_im_factor: f64,
    pub dt_min: f64,
}

impl Default for OnePointOptions {
    fn default() -> Self {
        OnePointOptions { stop_upsilon: 0.5, dt_max: 1e-4, dt_im_factor: 0.1, dt_min: 1e-10 }
    }
}

/// `M_{t∧τ}` at each checkpoint for one SLE_κ replica, with whether `τ` (or
/// swallowing) has happened by then. After `z` is swallowed `M = 0` (valid
/// for `r < 0`, where `S^{−r} → 0`).
pub fn one_point_path(kappa: f64, r: f64, z: C, checkpoints: &[f64], opts: &OnePointOptions, rng: &mut Rng) -> (Vec<f64>, Vec<bool>) {
    let sk = kappa.sqrt();
    let ups0 = z.im;
    let mut zz = z;
    let mut delta = 1.0f64;
    let mut t = 0.0;
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut stopped = Vec::with_capacity(checkpoints.len());
    let value = |zz: C, delta: f64| one_point_forms(&Diagnostics::new(zz, delta), kappa, r).angle_form;
    let mut frozen: Option<f64> = None;
    for &tc in checkpoints {
        while frozen.is_none() && t < tc {
            let dt = (opts.dt_im_factor * zz.im).powi(2).clamp(opts.dt_min, opts.dt_max).min(tc - t);
            let (z1, d1) = slit_forward(zz, 0.0, dt);
            t += dt;
            if !(z1.im > SWALLOW_GUARD) {
                frozen = Some(0.0);
                break;
            }
            delta *= d1.norm();
            let db: f64 = rng.sample(StandardNormal);
            zz = z1 - sk * dt.sqrt() * db;
            if zz.im / delta <= opts.stop_upsilon * ups0 {
                frozen = Some(value(zz, delta));
            }
        }
        out.push(frozen.unwrap_or_else(|| value(zz, delta)));
        stopped.push(frozen.is_some());
    }
    (out, stopped)
}

fn summarize(m0: f64, checkpoints: &[f64], paths: &[(Vec<f64>, Vec<bool>)]) -> ConstancyReport {
    let rows = checkpoints
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let m = Moments::from_slice(&paths.iter().map(|p| p.0[i]).collect::<Vec<_>>());
            let stopped = paths.iter().filter(|p| p.1[i]).count();
            CheckpointRow { t, mean: m.mean, stderr: m.stderr(), n: paths.len(), stopped }
        })
        .collect();
    ConstancyReport { m0, rows }
}

fn check_checkpoints(c: &[f64]) -> Result<()> {
    if c.is_empty() || c[0] <= 0.0 || c.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("checkpoints must be positive and increasing".into()));
    }
    Ok(())
}

/// Monte Carlo means of `M_{t∧τ}` for SLE_κ from 0, `τ` the first time
/// `Υ_t ≤ stop_upsilon · Im z`. Replica `k` uses stream `k` of `seed`.
pub fn one_point_constancy(
    kappa: f64,
    r: f64,
    z: C,
    checkpoints: &[f64],
    replicas: usize,
    seed: u64,
    opts: &OnePointOptions,
) -> Result<ConstancyReport> {
    check_checkpoints(checkpoints)?;
    if !(z.im > 0.0) {
        return Err(Error::Domain("z must lie in the upper half plane".into()));
    }
    let run = |k: usize| one_point_path(kappa, r, z, checkpoints, opts, &mut replica_rng(seed, k as u64));
    #[cfg(feature = "parallel")]
    let paths: Vec<_> = (0..replicas).into_par_iter().map(run).collect();
    #[cfg(not(feature = "parallel"))]
    let paths: Vec<_> = (0..replicas).map(run).collect();
    let m0 = one_point_forms(&Diagnostics::new(z, 1.0), kappa, r).angle_form;
    Ok(summarize(m0, checkpoints, &paths))
}

/// Images of the five marked points with their weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkedPointState {
    pub v: [f64; 5],
    pub rho: [f64; 5],
    pub rho3_tilde: f64,
}

impl MarkedPointState {
    /// `Π_{j≠3} |V^j − V^3|^{(ρ̃₃−ρ₃)ρ_j/(2κ)}`.
    pub fn value(&self, kappa: f64) -> f64 {
        let k = (self.rho3_tilde - self.rho[2]) / (2.0 * kappa);
        (0..5)
            .filter(|&j| j != 2)
            .map(|j| (self.v[j] - self.v[2]).abs().powf(k * self.rho[j]))
            .product()
    }
}

/// Step control for growing flow line 1. The step is
/// `clamp((gap_factor · gap)², dt_min, dt_max)` with `gap` the distance from
/// `W` to the nearest force point; a fixed step biases `M` downward because
/// `W` starts on `x₁` and keeps returning to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthOptions {
    pub dt_max: f64,
    pub gap_factor: f64,
    pub dt_min: f64,
}

impl Default for GrowthOptions {
    fn default() -> Self {
        GrowthOptions { dt_max: 1e-4, gap_factor: 0.1, dt_min: 1e-10 }
    }
}

impl GrowthOptions {
    /// Sets the sampler step for the next move, never past `remaining`.
    fn advance(&self, smp: &mut RhoSampler, remaining: f64) -> Result<f64> {
        let g = smp.nearest_gap();
        let dt = (self.gap_factor * g).powi(2).clamp(self.dt_min, self.dt_max).min(remaining);
        smp.set_dt(dt)?;
        Ok(dt)
    }
}

/// Flow line 1 from `x₁ < 0` as SLE_κ(ρ₁; ρ₃, ρ₄+ρ₅) with force points
/// `x₁⁻`, `0`, `x₂`; flow line 2 is not grown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPathSetup {
    pub kappa: f64,
    pub weights: TwoPathWeights,
    pub x1: f64,
    pub x2: f64,
}

impl TwoPathSetup {
    pub fn new(kappa: f64, theta1: f64, theta2: f64, a: f64, b: f64, x1: f64, x2: f64) -> Result<Self> {
        if !(x1 < 0.0 && x2 > 0.0) {
            return Err(Error::Domain(format!("need x1 < 0 < x2, got {x1}, {x2}")));
        }
        let weights = TwoPathWeights::new(kappa, theta1, theta2, a, b)?;
        Ok(TwoPathSetup { kappa, weights, x1, x2 })
    }

    pub fn force_points(&self) -> ForcePointConfig {
        let r = self.weights.rho;
        ForcePointConfig {
            start: self.x1,
            positions_left: vec![self.x1],
            weights_left: vec![r[0]],
            positions_right: vec![0.0, self.x2],
            weights_right: vec![r[2], r[3] + r[4]],
        }
    }

    pub fn initial_state(&self) -> MarkedPointState {
        self.state(self.x1, [self.x1, 0.0, self.x2])
    }

    fn state(&self, w: f64, f: [f64; 3]) -> MarkedPointState {
        MarkedPointState {
            v: [f[0], w, f[1], f[2], f[2]],
            rho: self.weights.rho,
            rho3_tilde: self.weights.rho3_tilde,
        }
    }

    fn sampler(&self, opts: &GrowthOptions) -> Result<RhoSampler> {
        RhoSampler::new(self.kappa, &self.force_points(), opts.dt_max, RhoOptions::default())
    }

    /// Marked points after growing flow line 1 to capacity `s`.
    pub fn grow(&self, s: f64, opts: &GrowthOptions, rng: &mut Rng) -> Result<MarkedPointState> {
        let mut smp = self.sampler(opts)?;
        let mut t = 0.0;
        while t < s {
            t += opts.advance(&mut smp, s - t)?;
            match smp.step(rng)? {
                StepEvent::Threshold | StepEvent::Swallow => {
                    return Err(Error::Config("flow line 1 stopped before reaching capacity s".into()))
                }
                _ => {}
            }
            let f = self.forces(&smp);
            if f[2] - smp.w <= 0.0 {
                return Err(Error::Config("flow line 1 swallowed x2".into()));
            }
        }
        Ok(self.state(smp.w, self.forces(&smp)))
    }

    fn forces(&self, smp: &RhoSampler) -> [f64; 3] {
        let mut it = smp.force_values();
        [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()]
    }
}

/// `M_{s,0}` for one sample of flow line 1 grown to capacity `s`.
#[allow(clippy::too_many_arguments)]
pub fn two_path_martingale_single_growth(
    kappa: f64,
    theta1: f64,
    theta2: f64,
    a: f64,
    b: f64,
    x1: f64,
    x2: f64,
    s: f64,
    opts: &GrowthOptions,
    seed: u64,
) -> Result<f64> {
    let setup = TwoPathSetup::new(kappa, theta1, theta2, a, b, x1, x2)?;
    if s == 0.0 {
        return Ok(setup.initial_state().value(kappa));
    }
    Ok(setup.grow(s, opts, &mut replica_rng(seed, 0))?.value(kappa))
}

/// Monte Carlo means of `M_{s∧T,0}`, where `T` is the first time the gap
/// from `W` to the image of `x₂` falls below `threat · x₂`, or flow line 1
/// reaches its continuation threshold.
pub fn two_path_constancy(
    setup: &TwoPathSetup,
    checkpoints: &[f64],
    threat: f64,
    replicas: usize,
    seed: u64,
    opts: &GrowthOptions,
) -> Result<ConstancyReport> {
    check_checkpoints(checkpoints)?;
    let kappa = setup.kappa;
    let run = |k: usize| -> Result<(Vec<f64>, Vec<bool>)> {
        let mut rng = replica_rng(seed, k as u64);
        let mut smp = setup.sampler(opts)?;
        let mut vals = Vec::with_capacity(checkpoints.len());
        let mut stopped = Vec::with_capacity(checkpoints.len());
        let mut t = 0.0;
        let mut frozen: Option<f64> = None;
        for &tc in checkpoints {
            while frozen.is_none() && t < tc {
                t += opts.advance(&mut smp, tc - t)?;
                let ev = smp.step(&mut rng)?;
                let f = setup.forces(&smp);
                let m = setup.state(smp.w, f).value(kappa);
                if matches!(ev, StepEvent::Threshold | StepEvent::Swallow) || f[2] - smp.w <= threat * setup.x2 {
                    frozen = Some(m);
                }
            }
            vals.push(frozen.unwrap_or_else(|| setup.state(smp.w, setup.forces(&smp)).value(kappa)));
            stopped.push(frozen.is_some());
        }
        Ok((vals, stopped))
    };
    #[cfg(feature = "parallel")]
    let paths: Vec<Result<_>> = (0..replicas).into_par_iter().map(run).collect();
    #[cfg(not(feature = "parallel"))]
    let paths: Vec<Result<_>> = (0..replicas).map(run).collect();
    let paths: Vec<_> = paths.into_iter().collect::<Result<_>>()?;
    Ok(summarize(setup.initial_state().value(kappa), checkpoints, &paths))
}

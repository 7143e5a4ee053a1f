//! Closed-form dimensions, exponents and boundary-data rules.
//!
//! Everything here is a pure double-precision function. `κ` ranges over
//! `(0, 4)` unless a function says otherwise; `κ = 0` and `κ = 4` are rejected
//! rather than special-cased.

use crate::driver::ForcePointConfig;
use crate::error::{domain, Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa.is_finite() && kappa > 0.0 && kappa < 4.0 {
        Ok(())
    } else {
        domain(format!("kappa must lie in (0,4), got {kappa}"))
    }
}

/// `χ = 2/√κ − √κ/2` for any `κ > 0`. Vanishes at `κ = 4`.
pub fn chi(kappa: f64) -> f64 {
    2.0 / kappa.sqrt() - kappa.sqrt() / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IgConstants {
    pub kappa: f64,
    pub kappa_prime: f64,
    pub chi: f64,
    pub lambda: f64,
    pub lambda_prime: f64,
}

pub fn ig_constants(kappa: f64) -> Result<IgConstants> {
    check_kappa(kappa)?;
    let kappa_prime = 16.0 / kappa;
    Ok(IgConstants {
        kappa,
        kappa_prime,
        chi: chi(kappa),
        lambda: PI / kappa.sqrt(),
        lambda_prime: PI / kappa_prime.sqrt(),
    })
}

/// Light-cone dimension `d(κ,θ)`, uncapped. See [`capped_dimension`].
pub fn lightcone_dimension(kappa: f64, theta: f64) -> Result<f64> {
    check_kappa(kappa)?;
    if !(0.0..=PI).contains(&theta) {
        return domain(format!("theta must lie in [0,pi], got {theta}"));
    }
    let tb = theta / PI;
    Ok((kappa * (1.0 - tb) + 4.0 * tb) * (kappa + 8.0 + (kappa - 4.0) * tb) / (8.0 * kappa))
}

/// `d ∧ 2`.
pub fn capped_dimension(d: f64) -> f64 {
    d.min(2.0)
}

/// Opening angle at which the light-cone dimension reaches 2.
pub fn critical_angle(kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    Ok(PI * kappa / (4.0 - kappa))
}

/// Endpoints `(lo, hi)` of the open light-cone interval of ρ.
pub fn light_cone_rho_range(kappa: f64) -> (f64, f64) {
    ((kappa / 2.0 - 4.0).max(-2.0 - kappa / 2.0), -2.0)
}

/// Dimension of an SLE_κ(ρ) trace for ρ in the light-cone phase. For
/// `κ > 2` the lower edge `ρ = κ/2−4` is accepted as the continuous
/// endpoint, where the value `1+2/κ` agrees with the trunk row.
pub fn sle_rho_dimension(kappa: f64, rho: f64) -> Result<f64> {
    check_kappa(kappa)?;
    let (lo, hi) = light_cone_rho_range(kappa);
    let lower_ok = rho > lo || (kappa > 2.0 && rho == lo);
    if !(lower_ok && rho < hi) {
        return Err(Error::Phase { kappa, rho });
    }
    Ok(rho_dimension_unchecked(kappa, rho))
}

pub(crate) fn rho_dimension_unchecked(kappa: f64, rho: f64) -> f64 {
    (kappa - 2.0 * (2.0 + rho)) * (kappa + 2.0 * (6.0 + rho)) / (8.0 * kappa)
}

/// Light-cone angle `θ_ρ` whose cone has the range of SLE_κ(ρ).
pub fn theta_of_rho(kappa: f64, rho: f64) -> Result<f64> {
    if kappa == 4.0 {
        return Err(Error::Singular("theta_rho is singular at kappa=4".into()));
    }
    check_kappa(kappa)?;
    Ok(PI * (rho + 2.0) / (kappa / 2.0 - 2.0))
}

/// Dimension `δ` of the Bessel process driving the force-point gap.
pub fn bessel_dimension(kappa: f64, rho: f64) -> Result<f64> {
    if !(kappa > 0.0) {
        return domain(format!("kappa must be positive, got {kappa}"));
    }
    Ok(1.0 + 2.0 * (rho + 2.0) / kappa)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    NotDefined,
    TrunkPlusLoops,
    LightCone,
    BoundaryTracing,
    BoundaryHitting,
    BoundaryAvoiding,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::NotDefined => "not-defined",
            Phase::TrunkPlusLoops => "trunk-plus-loops",
            Phase::LightCone => "light-cone",
            Phase::BoundaryTracing => "boundary-tracing",
            Phase::BoundaryHitting => "boundary-hitting",
            Phase::BoundaryAvoiding => "boundary-avoiding",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub kappa: f64,
    pub rho: f64,
    pub bessel_dim: f64,
    pub phase: Phase,
    pub range_dim: Option<f64>,
    /// Unset for `NotDefined`, where the table gives no answer.
    pub simple: Option<bool>,
}

/// Phase of SLE_κ(ρ). Row edges belong to the half-open interval that
/// contains them; for `κ ≤ 2` the trunk row is empty and the light-cone row
/// spans `(−2−κ/2, −2)`.
pub fn classify_phase(kappa: f64, rho: f64) -> Result<PhaseRecord> {
    check_kappa(kappa)?;
    let bessel_dim = 1.0 + 2.0 * (rho + 2.0) / kappa;
    let lower = -2.0 - kappa / 2.0;
    let trunk_top = kappa / 2.0 - 4.0;
    let avoid = kappa / 2.0 - 2.0;
    let (phase, range_dim, simple) = if rho <= lower {
        (Phase::NotDefined, None, None)
    } else if rho <= trunk_top {
        (Phase::TrunkPlusLoops, Some(1.0 + 2.0 / kappa), Some(false))
    } else if rho < -2.0 {
        (Phase::LightCone, Some(rho_dimension_unchecked(kappa, rho)), Some(false))
    } else if rho == -2.0 {
        (Phase::BoundaryTracing, Some(1.0), Some(true))
    } else if rho < avoid {
        (Phase::BoundaryHitting, Some(1.0 + kappa / 8.0), Some(true))
    } else {
        (Phase::BoundaryAvoiding, Some(1.0 + kappa / 8.0), Some(true))
    };
    Ok(PhaseRecord {
        kappa,
        rho,
        bessel_dim,
        phase,
        range_dim: range_dim.map(capped_dimension),
        simple,
    })
}

/// `(ν(r), ξ(r))` for the one-point martingale.
pub fn nu_xi(kappa: f64, r: f64) -> (f64, f64) {
    let nu = r * r / 4.0 * kappa + r * (1.0 - kappa / 4.0);
    let xi = r * r / 8.0 * kappa;
    (nu, xi)
}

/// Weight `ρ = (θ₁−θ₂)χ/λ − 2` seen by one flow line from the other.
pub fn angle_gap_rho(kappa: f64, theta1: f64, theta2: f64) -> Result<f64> {
    let c = ig_constants(kappa)?;
    Ok((theta1 - theta2) * c.chi / c.lambda - 2.0)
}

/// Non-intersection exponent `α` of two flow lines started next to each other
/// with boundary data `a` (far left) and `b` (far right).
///
/// At the symmetric parameters `(θ/2, −θ/2, λ′, −λ′)` this equals
/// `(1/κ)(1−κ/4)(1−θ̄)(κ(1+θ̄)−4θ̄)`, which is *not* `2 − d(κ,θ)`.
pub fn nonintersection_alpha(kappa: f64, theta1: f64, theta2: f64, a: f64, b: f64) -> Result<f64> {
    let c = ig_constants(kappa)?;
    let gap = theta1 - theta2;
    let upper = no_touch_gap(kappa);
    if !(gap > -PI && gap < upper) {
        return domain(format!(
            "angle gap {gap} outside the hitting range (-pi, {upper})"
        ));
    }
    let rho = gap * c.chi / c.lambda - 2.0;
    Ok((kappa - 4.0 - 2.0 * rho) * ((b - a) / c.lambda - rho) / (2.0 * kappa))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentParams {
    pub r: f64,
    pub nu: f64,
    pub xi: f64,
    /// `ν(r) + r`.
    pub alpha: f64,
    /// `ν(r) − ξ(r)`; `2 − β = d(κ,θ)`.
    pub beta: f64,
    pub theta_bar: f64,
}

/// The choice of `r` used for the light-cone upper bound. The exponents are
/// evaluated for the dual parameter `κ′ = 16/κ`.
pub fn canonical_r_and_beta(kappa: f64, theta: f64) -> Result<ExponentParams> {
    check_kappa(kappa)?;
    if !(0.0..=PI).contains(&theta) {
        return domain(format!("theta must lie in [0,pi], got {theta}"));
    }
    let kp = 16.0 / kappa;
    let tb = theta / PI;
    let r = -(4.0 + 4.0 * tb) / kp + tb;
    let (nu, xi) = nu_xi(kp, r);
    Ok(ExponentParams {
        r,
        nu,
        xi,
        alpha: nu + r,
        beta: nu - xi,
        theta_bar: tb,
    })
}

/// One constant piece of real-line boundary data, covering `(lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryInterval {
    pub lo: f64,
    pub hi: f64,
    pub value: f64,
}

/// Piecewise-constant data on ℝ, ordered left to right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineBoundary {
    pub intervals: Vec<BoundaryInterval>,
}

impl LineBoundary {
    pub fn value_at(&self, x: f64) -> Option<f64> {
        self.intervals
            .iter()
            .find(|iv| x > iv.lo && x <= iv.hi)
            .map(|iv| iv.value)
    }
}

fn side_intervals(
    start: f64,
    positions: &[f64],
    weights: &[f64],
    base: f64,
    left: bool,
) -> Vec<BoundaryInterval> {
    let mut out = Vec::with_capacity(positions.len() + 1);
    let mut acc = 1.0;
    let mut edge = start;
    for j in 0..=positions.len() {
        let next = positions.get(j).copied().unwrap_or(if left {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        });
        let value = base * acc;
        if left {
            out.push(BoundaryInterval { lo: next, hi: edge, value });
        } else {
            out.push(BoundaryInterval { lo: edge, hi: next, value });
        }
        if let Some(w) = weights.get(j) {
            acc += w;
        }
        edge = next;
    }
    if left {
        out.reverse();
    }
    out
}

/// Real-line data making the flow line of angle `angle` from `fp.start` an
/// SLE_κ(ρ_L; ρ_R) with the force points of `fp`.
///
/// `−λ(1+Σρ_L)` left of the start, `λ(1+Σρ_R)` right of it, minus `angle·χ`.
pub fn flowline_boundary_data(fp: &ForcePointConfig, angle: f64, chi: f64, lambda: f64) -> LineBoundary {
    let shift = angle * chi;
    let mut intervals = side_intervals(fp.start, &fp.positions_left, &fp.weights_left, -lambda, true);
    intervals.extend(side_intervals(fp.start, &fp.positions_right, &fp.weights_right, lambda, false));
    for iv in &mut intervals {
        iv.value -= shift;
    }
    LineBoundary { intervals }
}

/// Real-line data for a counterflow line with weights `ρ′`.
pub fn counterflow_boundary_data(fp: &ForcePointConfig, lambda_prime: f64) -> LineBoundary {
    let mut intervals =
        side_intervals(fp.start, &fp.positions_left, &fp.weights_left, lambda_prime, true);
    intervals.extend(side_intervals(
        fp.start,
        &fp.positions_right,
        &fp.weights_right,
        -lambda_prime,
        false,
    ));
    LineBoundary { intervals }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Interaction {
    StaysLeftNoTouch,
    StaysLeftBounces,
    Merges,
    Crosses,
    /// `θ₁ − θ₂ ≤ −π`: no rule applies to the pair in this order.
    Unclassified,
}

/// Angle gap `2λ′/χ = πκ/(4−κ)` beyond which flow lines do not touch,
/// evaluated in the second form to keep `κ = 2` at exactly π.
pub fn no_touch_gap(kappa: f64) -> f64 {
    PI * kappa / (4.0 - kappa)
}

/// How the flow line of angle `θ₁` interacts with the one of angle `θ₂`
/// started to its right.
pub fn interaction_rule(theta1: f64, theta2: f64, kappa: f64) -> Result<Interaction> {
    check_kappa(kappa)?;
    let gap = theta1 - theta2;
    Ok(if gap >= no_touch_gap(kappa) {
        Interaction::StaysLeftNoTouch
    } else if gap > 0.0 {
        Interaction::StaysLeftBounces
    } else if gap == 0.0 {
        Interaction::Merges
    } else if gap > -PI {
        Interaction::Crosses
    } else {
        Interaction::Unclassified
    })
}

/// Marked-point weights of the two-path configuration: flow lines from
/// `x₁ < 0 < x₂` with angles `θ₁, θ₂`, far-left data `a`, far-right data `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPathWeights {
    pub rho: [f64; 5],
    pub rho3_tilde: f64,
}

impl TwoPathWeights {
    pub fn new(kappa: f64, theta1: f64, theta2: f64, a: f64, b: f64) -> Result<Self> {
        let c = ig_constants(kappa)?;
        let rho1 = (-theta1 * c.chi - a) / c.lambda - 1.0;
        let rho3 = (theta1 - theta2) * c.chi / c.lambda - 2.0;
        let rho5 = (b + theta2 * c.chi) / c.lambda - 1.0;
        Ok(Self {
            rho: [rho1, 2.0, rho3, 2.0, rho5],
            rho3_tilde: kappa - 4.0 - rho3,
        })
    }

    /// Exponent of `|V^j − V^3|` for `j ≠ 3` (0-based index `j`; entry 2 is 0).
    pub fn exponents(&self, kappa: f64) -> [f64; 5] {
        let k = (self.rho3_tilde - self.rho[2]) / (2.0 * kappa);
        let mut e = [0.0; 5];
        for j in 0..5 {
            if j != 2 {
                e[j] = k * self.rho[j];
            }
        }
        e
    }

    /// Real-line data on `(−∞,x₁) (x₁,0) (0,x₂) (x₂,∞)` that realizes these
    /// weights: flow line 1 from `x₁` sees `ρ₁` on its left and `ρ₃` at 0.
    pub fn line_boundary(kappa: f64, theta1: f64, theta2: f64, a: f64, b: f64, x1: f64, x2: f64) -> Result<LineBoundary> {
        let c = ig_constants(kappa)?;
        let iv = |lo, hi, value| BoundaryInterval { lo, hi, value };
        Ok(LineBoundary {
            intervals: vec![
                iv(f64::NEG_INFINITY, x1, a),
                iv(x1, 0.0, c.lambda - theta1 * c.chi),
                iv(0.0, x2, -c.lambda - theta2 * c.chi),
                iv(x2, f64::INFINITY, b),
            ],
        })
    }
}

//! Discrete Gaussian free field on a rectangle of `nx × ny` cells.
//!
//! Nodes are `(x0 + i·h, y0 + j·h)` for `0 ≤ i ≤ nx`, `0 ≤ j ≤ ny`, stored
//! row-major in `j`. A field is the discrete-harmonic extension of the
//! boundary data plus a zero-boundary Gaussian vector with covariance
//! `scale · L⁻¹`, where `L` is the 5-point graph Laplacian (degree 4, no
//! `1/h²`). With this normalization `L⁻¹(x,x) − L⁻¹(x,y) ≈ log|x−y| / 2π`, so
//! `scale = 2π` is the lattice analogue of a field with `−log` covariance.

use crate::error::{Error, Result};
use crate::formulas::LineBoundary;
use crate::rng::{replica_rng, Rng};
use rand::Rng as _;
use rand_distr::StandardNormal;
use rustfft::{num_complex::Complex, Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub spacing: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, x0: f64, y0: f64, spacing: f64) -> Result<Self> {
        if nx < 8 || ny < 8 {
            return Err(Error::Domain(format!("grid must be at least 8x8 cells, got {nx}x{ny}")));
        }
        if !(spacing > 0.0) || !x0.is_finite() || !y0.is_finite() {
            return Err(Error::Domain("grid geometry must be finite with positive spacing".into()));
        }
        Ok(GridSpec { nx, ny, x0, y0, spacing })
    }

    /// Rectangle `[x_min, x_max] × [y_min, ·]` with `n` cells across.
    pub fn covering(x_min: f64, x_max: f64, y_min: f64, y_max: f64, n_across: usize) -> Result<Self> {
        let h = (x_max - x_min) / n_across as f64;
        let ny = ((y_max - y_min) / h).round() as usize;
        Self::new(n_across, ny, x_min, y_min, h)
    }

    pub fn x1(&self) -> f64 {
        self.x0 + self.nx as f64 * self.spacing
    }

    pub fn y1(&self) -> f64 {
        self.y0 + self.ny as f64 * self.spacing
    }

    pub fn n_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn node(&self, i: usize, j: usize) -> (f64, f64) {
        (self.x0 + i as f64 * self.spacing, self.y0 + j as f64 * self.spacing)
    }

    pub fn strictly_inside(&self, x: f64, y: f64) -> bool {
        x > self.x0 && x < self.x1() && y > self.y0 && y < self.y1()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Edge {
    Bottom,
    Right,
    Top,
    Left,
}

/// Constant value on `[from, to]` of one edge, in the absolute coordinate
/// running along it (`x` for bottom/top, `y` for left/right).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundarySegment {
    pub edge: Edge,
    pub from: f64,
    pub to: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    pub segments: Vec<BoundarySegment>,
}

impl BoundarySpec {
    pub fn constant(grid: &GridSpec, c: f64) -> Self {
        let seg = |edge, from, to| BoundarySegment { edge, from, to, value: c };
        BoundarySpec {
            segments: vec![
                seg(Edge::Bottom, grid.x0, grid.x1()),
                seg(Edge::Right, grid.y0, grid.y1()),
                seg(Edge::Top, grid.x0, grid.x1()),
                seg(Edge::Left, grid.y0, grid.y1()),
            ],
        }
    }

    /// The rectangle standing in for the upper half plane: the bottom edge
    /// carries `line`, and the far data continue around the corners with the
    /// winding correction `±χπ/2` per right-angle turn. The top edge is split
    /// at `top_split`, the image of ∞.
    pub fn from_line(grid: &GridSpec, line: &LineBoundary, chi: f64, top_split: f64) -> Result<Self> {
        let first = line.intervals.first().ok_or_else(|| Error::Domain("empty line data".into()))?;
        let last = line.intervals.last().unwrap();
        let (left, right) = (first.value, last.value);
        let mut segments = Vec::new();
        for iv in &line.intervals {
            let from = iv.lo.max(grid.x0);
            let to = iv.hi.min(grid.x1());
            if to > from {
                segments.push(BoundarySegment { edge: Edge::Bottom, from, to, value: iv.value });
            }
        }
        let half = chi * PI / 2.0;
        segments.push(BoundarySegment { edge: Edge::Right, from: grid.y0, to: grid.y1(), value: right + half });
        segments.push(BoundarySegment { edge: Edge::Top, from: top_split, to: grid.x1(), value: right + 2.0 * half });
        segments.push(BoundarySegment { edge: Edge::Top, from: grid.x0, to: top_split, value: left - 2.0 * half });
        segments.push(BoundarySegment { edge: Edge::Left, from: grid.y0, to: grid.y1(), value: left - half });
        let spec = BoundarySpec { segments };
        spec.validate(grid)?;
        Ok(spec)
    }

    /// Each edge is covered by its segments without gaps or overlaps.
    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        let tol = 1e-9 * grid.spacing;
        for edge in [Edge::Bottom, Edge::Right, Edge::Top, Edge::Left] {
            let (lo, hi) = edge_range(grid, edge);
            let mut segs: Vec<_> = self.segments.iter().filter(|s| s.edge == edge).collect();
            segs.sort_by(|a, b| a.from.total_cmp(&b.from));
            let mut at = lo;
            for s in &segs {
                if (s.from - at).abs() > tol || !(s.to > s.from) || !s.value.is_finite() {
                    return Err(Error::Domain(format!("{edge:?} edge segments do not partition the edge near {at}")));
                }
                at = s.to;
            }
            if segs.is_empty() || (at - hi).abs() > tol {
                return Err(Error::Domain(format!("{edge:?} edge is not fully covered")));
            }
        }
        Ok(())
    }

    /// Value at coordinate `c` along `edge`; the mean of both sides at a jump.
    pub fn value(&self, grid: &GridSpec, edge: Edge, c: f64) -> f64 {
        let tol = 1e-9 * grid.spacing;
        let (lo, hi) = edge_range(grid, edge);
        let mut hits = self
            .segments
            .iter()
            .filter(|s| s.edge == edge && c >= s.from - tol && c <= s.to + tol);
        let first = hits.next().map(|s| (s.value, s.from, s.to));
        match (first, hits.next()) {
            (Some((v1, ..)), Some(s2)) => {
                let interior = c > lo + tol && c < hi - tol;
                if interior { 0.5 * (v1 + s2.value) } else { v1 }
            }
            (Some((v, ..)), None) => v,
            _ => 0.0,
        }
    }

    /// Boundary data at every boundary node; interior entries are 0.
    pub fn node_values(&self, grid: &GridSpec) -> Vec<f64> {
        let mut out = vec![0.0; grid.n_nodes()];
        for j in 0..=grid.ny {
            for i in 0..=grid.nx {
                if i > 0 && i < grid.nx && j > 0 && j < grid.ny {
                    continue;
                }
                let (x, y) = grid.node(i, j);
                // Bottom and top edges own the corners.
                out[grid.idx(i, j)] = if j == 0 {
                    self.value(grid, Edge::Bottom, x)
                } else if j == grid.ny {
                    self.value(grid, Edge::Top, x)
                } else if i == 0 {
                    self.value(grid, Edge::Left, y)
                } else {
                    self.value(grid, Edge::Right, y)
                };
            }
        }
        out
    }
}

fn edge_range(grid: &GridSpec, edge: Edge) -> (f64, f64) {
    match edge {
        Edge::Bottom | Edge::Top => (grid.x0, grid.x1()),
        Edge::Left | Edge::Right => (grid.y0, grid.y1()),
    }
}

/// In-place DST-I of length `n` via an FFT of length `2(n+1)`:
/// `X_k = Σ_j x_j sin(π j k/(n+1))`.
struct Dst1 {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl Dst1 {
    fn new(n: usize, planner: &mut FftPlanner<f64>) -> Self {
        let m = 2 * (n + 1);
        let fft = planner.plan_fft_forward(m);
        let scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        Dst1 { n, fft, buf: vec![Complex::new(0.0, 0.0); m], scratch }
    }

    fn apply(&mut self, x: &mut [f64]) {
        let n = self.n;
        let m = 2 * (n + 1);
        self.buf[0] = Complex::new(0.0, 0.0);
        self.buf[n + 1] = Complex::new(0.0, 0.0);
        for j in 0..n {
            self.buf[j + 1] = Complex::new(x[j], 0.0);
            self.buf[m - 1 - j] = Complex::new(-x[j], 0.0);
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        for k in 0..n {
            x[k] = -0.5 * self.buf[k + 1].im;
        }
    }
}

/// Interior-node transforms and Laplacian spectrum for one grid shape.
pub struct GffSampler {
    grid: GridSpec,
    row: Dst1,
    col: Dst1,
    /// Eigenvalues of `L` on interior nodes, `(p,q)` row-major in `q`.
    eig: Vec<f64>,
    work: Vec<f64>,
    colbuf: Vec<f64>,
}

impl GffSampler {
    pub fn new(grid: GridSpec) -> Self {
        let (mx, my) = (grid.nx - 1, grid.ny - 1);
        let mut planner = FftPlanner::new();
        let row = Dst1::new(mx, &mut planner);
        let col = Dst1::new(my, &mut planner);
        let mut eig = Vec::with_capacity(mx * my);
        for q in 1..=my {
            let sq = (PI * q as f64 / (2.0 * grid.ny as f64)).sin().powi(2);
            for p in 1..=mx {
                let sp = (PI * p as f64 / (2.0 * grid.nx as f64)).sin().powi(2);
                eig.push(4.0 * (sp + sq));
            }
        }
        GffSampler { grid, row, col, eig, work: vec![0.0; mx * my], colbuf: vec![0.0; my] }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Eigenvalue of mode `(p, q)`, both 1-based.
    pub fn eigenvalue(&self, p: usize, q: usize) -> f64 {
        self.eig[(q - 1) * (self.grid.nx - 1) + (p - 1)]
    }

    /// 2-D DST-I of `self.work` (interior layout, row-major in `q`/`j`).
    fn dst2(&mut self) {
        let (mx, my) = (self.grid.nx - 1, self.grid.ny - 1);
        for row in self.work.chunks_mut(mx) {
            self.row.apply(row);
        }
        for i in 0..mx {
            for j in 0..my {
                self.colbuf[j] = self.work[j * mx + i];
            }
            self.col.apply(&mut self.colbuf);
            for j in 0..my {
                self.work[j * mx + i] = self.colbuf[j];
            }
        }
    }

    /// Zero-boundary sample on all nodes (boundary entries are exactly 0).
    pub fn sample_zero_boundary(&mut self, scale: f64, rng: &mut Rng) -> Vec<f64> {
        let g = self.grid;
        let (mx, my) = (g.nx - 1, g.ny - 1);
        let norm = (2.0 / g.nx as f64).sqrt() * (2.0 / g.ny as f64).sqrt();
        for k in 0..mx * my {
            let z: f64 = rng.sample(StandardNormal);
            self.work[k] = z * (scale / self.eig[k]).sqrt();
        }
        self.dst2();
        let mut out = vec![0.0; g.n_nodes()];
        for j in 0..my {
            for i in 0..mx {
                out[g.idx(i + 1, j + 1)] = norm * self.work[j * mx + i];
            }
        }
        out
    }

    /// Discrete-harmonic extension of boundary node values.
    pub fn harmonic_extension(&mut self, boundary_nodes: &[f64]) -> Result<Vec<f64>> {
        let g = self.grid;
        let (mx, my) = (g.nx - 1, g.ny - 1);
        let mut out = boundary_nodes.to_vec();
        for j in 1..g.ny {
            for i in 1..g.nx {
                let mut r = 0.0;
                if i == 1 { r += boundary_nodes[g.idx(0, j)]; }
                if i == g.nx - 1 { r += boundary_nodes[g.idx(g.nx, j)]; }
                if j == 1 { r += boundary_nodes[g.idx(i, 0)]; }
                if j == g.ny - 1 { r += boundary_nodes[g.idx(i, g.ny)]; }
                self.work[(j - 1) * mx + (i - 1)] = r;
                out[g.idx(i, j)] = 0.0;
            }
        }
        self.dst2();
        for k in 0..mx * my {
            self.work[k] /= self.eig[k];
        }
        self.dst2();
        let c = 4.0 / (g.nx as f64 * g.ny as f64);
        for j in 0..my {
            for i in 0..mx {
                out[g.idx(i + 1, j + 1)] = c * self.work[j * mx + i];
            }
        }
        let bmax = boundary_nodes.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let residual = laplacian_residual(&g, &out);
        if !(residual <= 1e-10 * bmax) {
            return Err(Error::Solver { residual });
        }
        Ok(out)
    }
}

/// Largest `|4u − Σ neighbours|` over interior nodes.
pub fn laplacian_residual(g: &GridSpec, u: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for j in 1..g.ny {
        for i in 1..g.nx {
            let r = 4.0 * u[g.idx(i, j)]
                - u[g.idx(i - 1, j)]
                - u[g.idx(i + 1, j)]
                - u[g.idx(i, j - 1)]
                - u[g.idx(i, j + 1)];
            worst = worst.max(r.abs());
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GffField {
    pub grid: GridSpec,
    pub boundary: BoundarySpec,
    pub fluctuation_scale: f64,
    pub seed: u64,
    /// All node values, boundary included.
    pub values: Vec<f64>,
    pub harmonic_part: Vec<f64>,
}

/// Sample a field. Uses stream 0 of `seed`.
pub fn sample_gff(grid: GridSpec, boundary: &BoundarySpec, fluctuation_scale: f64, seed: u64) -> Result<GffField> {
    boundary.validate(&grid)?;
    let mut s = GffSampler::new(grid);
    let harmonic = s.harmonic_extension(&boundary.node_values(&grid))?;
    Ok(field_from_parts(&mut s, boundary, harmonic, fluctuation_scale, seed, &mut replica_rng(seed, 0)))
}

/// Field on `[−1,1] × [0,2]` whose flow line of angle 0 from the origin is
/// SLE_κ: `−λ` on ℝ₋, `λ` on ℝ₊, with the side edges split at the top.
pub fn flowline_field(kappa: f64, n_across: usize, fluctuation_scale: f64, seed: u64) -> Result<GffField> {
    let c = crate::formulas::ig_constants(kappa)?;
    let g = GridSpec::covering(-1.0, 1.0, 0.0, 2.0, n_across)?;
    let line = crate::formulas::flowline_boundary_data(&Default::default(), 0.0, c.chi, c.lambda);
    let boundary = BoundarySpec::from_line(&g, &line, c.chi, 0.0)?;
    sample_gff(g, &boundary, fluctuation_scale, seed)
}

/// Field with a precomputed harmonic part, drawing from `rng`.
pub fn field_from_parts(
    sampler: &mut GffSampler,
    boundary: &BoundarySpec,
    harmonic: Vec<f64>,
    fluctuation_scale: f64,
    seed: u64,
    rng: &mut Rng,
) -> GffField {
    let mut values = sampler.sample_zero_boundary(fluctuation_scale, rng);
    for (v, h) in values.iter_mut().zip(&harmonic) {
        *v += h;
    }
    GffField { grid: *sampler.grid(), boundary: boundary.clone(), fluctuation_scale, seed, values, harmonic_part: harmonic }
}

impl GffField {
    /// Piecewise-linear interpolation on cells split along the NE diagonal.
    pub fn evaluate(&self, x: f64, y: f64) -> Result<f64> {
        if !self.grid.strictly_inside(x, y) {
            return Err(Error::Domain(format!("point ({x}, {y}) is outside the field domain")));
        }
        Ok(self.evaluate_closed(x, y))
    }

    /// As [`evaluate`](Self::evaluate) on the closed rectangle; points
    /// outside are clamped to it.
    pub fn evaluate_closed(&self, x: f64, y: f64) -> f64 {
        let g = &self.grid;
        let snap = |f: f64| if (f - f.round()).abs() < 1e-9 { f.round() } else { f };
        let fx = snap((x - g.x0) / g.spacing).clamp(0.0, g.nx as f64);
        let fy = snap((y - g.y0) / g.spacing).clamp(0.0, g.ny as f64);
        let i = (fx.floor() as usize).min(g.nx - 1);
        let j = (fy.floor() as usize).min(g.ny - 1);
        let (s, t) = (fx - i as f64, fy - j as f64);
        let v = &self.values;
        let f00 = v[g.idx(i, j)];
        let f11 = v[g.idx(i + 1, j + 1)];
        if s >= t {
            let f10 = v[g.idx(i + 1, j)];
            f00 + s * (f10 - f00) + t * (f11 - f10)
        } else {
            let f01 = v[g.idx(i, j + 1)];
            f00 + t * (f01 - f00) + s * (f11 - f01)
        }
    }

    /// The zero-boundary fluctuation `values − harmonic_part`.
    pub fn fluctuation(&self) -> Vec<f64> {
        self.values.iter().zip(&self.harmonic_part).map(|(v, h)| v - h).collect()
    }
}

/// Result of [`calibrate_fluctuation_scale`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub kappa: f64,
    pub grid: usize,
    pub replicas: usize,
    pub seed: u64,
    pub scale: f64,
    /// `Σ QV / Σ capacity` at the returned scale.
    pub kappa_estimate: f64,
    pub iterations: usize,
}

/// Zero-angle flow lines from the origin of `[−1,1] × [0,2]` with data `∓λ`
/// on ℝ∓, reused across scales: replica `k` is `harmonic + √s · Z_k` with
/// `Z_k` drawn once from stream `k` of the seed.
pub struct CalibrationEnsemble {
    chi: f64,
    harmonic: Vec<f64>,
    noise: Vec<Vec<f64>>,
    boundary: BoundarySpec,
    grid: GridSpec,
    seed: u64,
}

/// Curve prefix unzipped per replica during calibration.
pub const CALIBRATION_RADIUS: f64 = 0.5;

/// Capacity increment at which the driving is sampled. It is fixed in
/// absolute units so that grids of different resolution are compared at
/// the same physical scale; below the grid spacing flow lines are smooth and
/// the quadratic variation degenerates.
pub const CALIBRATION_DT: f64 = CALIBRATION_RADIUS * CALIBRATION_RADIUS / 64.0;

impl CalibrationEnsemble {
    pub fn new(kappa: f64, grid: usize, replicas: usize, seed: u64) -> Result<Self> {
        let c = crate::formulas::ig_constants(kappa)?;
        if replicas == 0 {
            return Err(Error::Domain("calibration needs at least one replica".into()));
        }
        let g = GridSpec::covering(-1.0, 1.0, 0.0, 2.0, grid)?;
        let line = crate::formulas::flowline_boundary_data(&Default::default(), 0.0, c.chi, c.lambda);
        let boundary = BoundarySpec::from_line(&g, &line, c.chi, 0.0)?;
        let mut s = GffSampler::new(g);
        let harmonic = s.harmonic_extension(&boundary.node_values(&g))?;
        let noise = (0..replicas)
            .map(|k| s.sample_zero_boundary(1.0, &mut replica_rng(seed, k as u64)))
            .collect();
        Ok(CalibrationEnsemble { chi: c.chi, harmonic, noise, boundary, grid: g, seed })
    }

    pub fn field(&self, k: usize, scale: f64) -> GffField {
        let a = scale.sqrt();
        let values = self.harmonic.iter().zip(&self.noise[k]).map(|(h, z)| h + a * z).collect();
        GffField {
            grid: self.grid,
            boundary: self.boundary.clone(),
            fluctuation_scale: scale,
            seed: self.seed,
            values,
            harmonic_part: self.harmonic.clone(),
        }
    }

    /// Quadratic variation and capacity of the unzipped prefix of replica `k`.
    pub fn qv_and_capacity(&self, k: usize, scale: f64) -> Result<(f64, f64)> {
        let f = self.field(k, scale);
        let mut tracer = crate::flowlines::FlowTracer::new(&f, self.chi)?;
        tracer.exit = Some((0.0, 0.0, CALIBRATION_RADIUS));
        // Unzipping is quadratic in length; paths this long are wandering in
        // lattice vortices anyway.
        tracer.max_steps = (8.0 * CALIBRATION_RADIUS / tracer.step) as usize;
        let line = tracer.trace([0.0, 0.0], 0.0)?;
        let pts: Vec<crate::Complex64> = line
            .points
            .iter()
            .take_while(|p| (p[0] * p[0] + p[1] * p[1]).sqrt() <= CALIBRATION_RADIUS)
            .map(|p| crate::Complex64::new(p[0], p[1]))
            .collect();
        if pts.len() < 2 {
            return Ok((0.0, 0.0));
        }
        let chain = crate::loewner::unzip(&pts)?;
        let n = (chain.total_capacity() / CALIBRATION_DT).floor() as usize;
        let mut qv = 0.0;
        let mut prev = chain.w0();
        for k in 1..=n {
            let w = chain.driving_at(k as f64 * CALIBRATION_DT);
            qv += (w - prev) * (w - prev);
            prev = w;
        }
        Ok((qv, n as f64 * CALIBRATION_DT))
    }

    /// `Σ QV / Σ capacity` over all replicas.
    pub fn kappa_estimate(&self, scale: f64) -> Result<f64> {
        let parts: Vec<Result<(f64, f64)>> = {
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                (0..self.noise.len()).into_par_iter().map(|k| self.qv_and_capacity(k, scale)).collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                (0..self.noise.len()).map(|k| self.qv_and_capacity(k, scale)).collect()
            }
        };
        let (mut qv, mut cap) = (0.0, 0.0);
        for p in parts {
            let (q, c) = p?;
            qv += q;
            cap += c;
        }
        if !(cap > 0.0) {
            return Err(Error::Numerical { step: 0, detail: "calibration traces have zero capacity".into() });
        }
        Ok(qv / cap)
    }
}

/// Search range for the calibrated scale, in units of `2π`.
const SCALE_RANGE: (f64, f64) = (1e-2, 1e2);
const MAX_BISECTIONS: usize = 60;

/// Fluctuation scale at which flow-line driving functions have quadratic
/// variation `κ` per unit capacity on a `grid`-cell-wide field.
///
/// The estimate is not monotone at large scales, where lattice vortices trap
/// the traces, so the bracket is found by doubling upward from the bottom of
/// the range and the first crossing is bisected.
pub fn calibrate_fluctuation_scale(kappa: f64, grid: usize, replicas: usize, seed: u64) -> Result<Calibration> {
    let ens = CalibrationEnsemble::new(kappa, grid, replicas, seed)?;
    let f = |log_s: f64| ens.kappa_estimate(log_s.exp()).map(|k| k - kappa);
    let unit = 2.0 * PI;
    let mut lo = (unit * SCALE_RANGE.0).ln();
    if f(lo)? >= 0.0 {
        return Err(Error::NoConvergence { iterations: 0 });
    }
    let mut iterations = 0;
    let mut hi = lo;
    loop {
        hi += std::f64::consts::LN_2;
        iterations += 1;
        if hi > (unit * SCALE_RANGE.1).ln() {
            return Err(Error::NoConvergence { iterations });
        }
        match f(hi) {
            Ok(v) if v >= 0.0 => break,
            Ok(_) => lo = hi,
            Err(_) => return Err(Error::NoConvergence { iterations }),
        }
    }
    while hi - lo > 1e-4 {
        if iterations == MAX_BISECTIONS {
            return Err(Error::NoConvergence { iterations });
        }
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        if f(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let scale = (0.5 * (lo + hi)).exp();
    let kappa_estimate = ens.kappa_estimate(scale)?;
    // A jump across κ (trapping setting in) is not a root.
    if (kappa_estimate - kappa).abs() > 0.05 * kappa {
        return Err(Error::NoConvergence { iterations });
    }
    Ok(Calibration { kappa, grid, replicas, seed, scale, kappa_estimate, iterations })
}

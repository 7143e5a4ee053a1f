use std::f64::consts::{FRAC_PI_4, PI, TAU};
use std::path::Path;

use anyhow::{anyhow, bail, ensure, Context, Result};
use serde_json::{json, Value};

use igsim::driver::{
    sample_sle as sle_driving, sample_sle_rho_with, DrivingFunction, ForcePointConfig, GapScheme, RhoOptions, Side, ThresholdPolicy,
};
use igsim::estimation::{
    box_count, box_counts, derivative_moment_scaling, geometric_scales, nonintersection_experiment, MomentOptions,
    TwoPathOptions,
};
use igsim::flowlines::{FlowTracer, PointCloud, TraceStop};
use igsim::formulas::{
    canonical_r_and_beta, capped_dimension, classify_phase, ig_constants, lightcone_dimension, theta_of_rho,
    Phase,
};
use igsim::gff::{calibrate_fluctuation_scale, flowline_field, GffField};
use igsim::martingales::{one_point_constancy, two_path_constancy, ConstancyReport, GrowthOptions, OnePointOptions, TwoPathSetup};
use igsim::{svg, Complex64};

use crate::output::{num, seed_record, Gate, RunDir};
use crate::params::*;

/// Fluctuation scale used when `--scale` is absent. Calibrated scales
/// approach 2π as the grid is refined.
pub const DEFAULT_SCALE: f64 = TAU;
/// SVG renderings keep at most this many vertices in total.
const SVG_POINT_BUDGET: usize = 200_000;

fn need<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| anyhow!("missing required --{flag}"))
}

fn row(cells: impl IntoIterator<Item = String>) -> Vec<String> {
    cells.into_iter().collect()
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn formulas(p: &FormulasArgs, out: &Path) -> Result<Vec<Gate>> {
    let kappa = need(p.kappa, "kappa")?;
    let c = ig_constants(kappa)?;
    let (theta, rho, dim) = match (p.theta, p.rho) {
        (Some(_), Some(_)) => bail!("give either --theta or --rho"),
        (_, Some(rho)) => {
            let rec = classify_phase(kappa, rho)?;
            let theta = if rec.phase == Phase::LightCone { Some(theta_of_rho(kappa, rho)?) } else { None };
            (theta, rho, rec.range_dim)
        }
        (theta, None) => {
            let theta = theta.unwrap_or(0.0);
            let rho = theta * (kappa / 2.0 - 2.0) / PI - 2.0;
            (Some(theta), rho, Some(capped_dimension(lightcone_dimension(kappa, theta)?)))
        }
    };
    let rec = classify_phase(kappa, rho)?;
    let mut run = RunDir::begin(out)?;
    run.csv(
        "formulas.csv",
        &["kappa", "theta", "rho", "delta", "phase", "dim", "kappa_prime", "chi", "lambda", "lambda_prime", "theta_c"],
        [row([
            num(kappa),
            opt_num(theta),
            num(rho),
            num(rec.bessel_dim),
            rec.phase.name().to_string(),
            opt_num(dim),
            num(c.kappa_prime),
            num(c.chi),
            num(c.lambda),
            num(c.lambda_prime),
            num(igsim::formulas::critical_angle(kappa)?),
        ])],
    )?;
    run.commit("formulas", json!({ "kappa": kappa, "theta": theta, "rho": p.rho }), None)
}

pub fn phase_diagram(p: &PhaseDiagramArgs, out: &Path) -> Result<Vec<Gate>> {
    let nk = p.kappa_steps.unwrap_or(200);
    let nr = p.rho_steps.unwrap_or(200);
    let (lo, hi) = (p.rho_min.unwrap_or(-6.0), p.rho_max.unwrap_or(2.0));
    ensure!(nk > 0 && nr > 0 && hi > lo, "need positive step counts and rho-min < rho-max");
    let mut rows = Vec::with_capacity(nk * nr);
    for i in 0..nk {
        let kappa = 4.0 * (i as f64 + 0.5) / nk as f64;
        for j in 0..nr {
            let rho = lo + (hi - lo) * (j as f64 + 0.5) / nr as f64;
            let rec = classify_phase(kappa, rho)?;
            rows.push(row([num(kappa), num(rho), num(rec.bessel_dim), rec.phase.name().to_string(), opt_num(rec.range_dim)]));
        }
    }
    let mut run = RunDir::begin(out)?;
    run.csv("phase_diagram.csv", &["kappa", "rho", "delta", "phase", "dim"], rows)?;
    run.text("phase_diagram.svg", &svg::phase_diagram(nk, nr, lo, hi)?)?;
    run.commit("phase-diagram", json!({ "kappa_steps": nk, "rho_steps": nr, "rho_min": lo, "rho_max": hi }), None)
}

fn write_driving(run: &mut RunDir, d: &DrivingFunction) -> Result<()> {
    run.json("driving.json", d)?;
    let mut header = vec!["t".to_string(), "w".to_string()];
    for tr in &d.force_tracks {
        header.push(format!("{}{}", if tr.side == Side::Left { "L" } else { "R" }, tr.index));
    }
    let rows = (0..d.t.len()).map(|k| {
        let mut r = vec![num(d.t[k]), num(d.w[k])];
        r.extend(d.force_tracks.iter().map(|tr| num(tr.v[k])));
        r
    });
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    run.csv("driving.csv", &h, rows)
}

pub fn sample_sle_cmd(p: &SampleSleArgs) -> Result<(DrivingFunction, Value)> {
    let kappa = need(p.kappa, "kappa")?;
    let seed = need(p.seed, "seed")?;
    let dt = p.dt.unwrap_or(1e-4);
    let steps = p.steps.unwrap_or(10_000);
    let d = sle_driving(kappa, steps, dt, seed)?;
    Ok((d, json!({ "kappa": kappa, "seed": seed, "dt": dt, "steps": steps })))
}

pub fn sample_sle(p: &SampleSleArgs, out: &Path) -> Result<Vec<Gate>> {
    let (d, cfg) = sample_sle_cmd(p)?;
    let mut run = RunDir::begin(out)?;
    write_driving(&mut run, &d)?;
    run.commit("sample-sle", cfg, Some(seed_record(p.seed.unwrap_or_default(), 1)))
}

/// `L:x`, `R:x` or a bare number placed by comparison with `start`.
fn parse_force_points(start: f64, specs: &[String], rho: &[f64]) -> Result<ForcePointConfig> {
    ensure!(specs.len() == rho.len(), "{} force points but {} weights", specs.len(), rho.len());
    let mut left = Vec::new();
    let mut right = Vec::new();
    for (s, &w) in specs.iter().zip(rho) {
        let s = s.trim();
        let (side, x) = if let Some(v) = s.strip_prefix("L:") {
            (Side::Left, v.parse::<f64>())
        } else if let Some(v) = s.strip_prefix("R:") {
            (Side::Right, v.parse::<f64>())
        } else {
            let x = s.parse::<f64>();
            let side = match &x {
                Ok(x) if *x < start => Side::Left,
                _ => Side::Right,
            };
            (side, x)
        };
        let x = x.with_context(|| format!("force point {s:?}"))?;
        match side {
            Side::Left => left.push((x, w)),
            Side::Right => right.push((x, w)),
        }
    }
    left.sort_by(|a, b| b.0.total_cmp(&a.0));
    right.sort_by(|a, b| a.0.total_cmp(&b.0));
    let fp = ForcePointConfig {
        start,
        positions_left: left.iter().map(|p| p.0).collect(),
        weights_left: left.iter().map(|p| p.1).collect(),
        positions_right: right.iter().map(|p| p.0).collect(),
        weights_right: right.iter().map(|p| p.1).collect(),
    };
    fp.validate()?;
    Ok(fp)
}

pub fn sample_sle_rho_cmd(p: &SampleSleRhoArgs) -> Result<(DrivingFunction, Value)> {
    let kappa = need(p.kappa, "kappa")?;
    let seed = need(p.seed, "seed")?;
    let dt = p.dt.unwrap_or(1e-4);
    let steps = p.steps.unwrap_or(10_000);
    let start = p.start.unwrap_or(0.0);
    let rho = p.rho.clone().unwrap_or_default();
    let specs = p.force_point.clone().unwrap_or_default();
    let fp = parse_force_points(start, &specs, &rho)?;
    let scheme = p.gap_scheme.unwrap_or(GapSchemeArg::TruncatedEuler);
    let threshold = p.threshold.unwrap_or(ThresholdArg::Stop);
    let opts = RhoOptions {
        scheme: match scheme {
            GapSchemeArg::TruncatedEuler => GapScheme::TruncatedEuler,
            GapSchemeArg::Exact => GapScheme::ExactSquaredBessel,
            GapSchemeArg::DirectEuler => GapScheme::DirectEuler,
        },
        threshold: match threshold {
            ThresholdArg::Stop => ThresholdPolicy::Stop,
            ThresholdArg::Continue => ThresholdPolicy::Continue,
        },
    };
    let d = sample_sle_rho_with(kappa, &fp, steps, dt, &mut igsim::rng::rng(seed), opts)?;
    let cfg = json!({
        "kappa": kappa, "seed": seed, "dt": dt, "steps": steps, "start": start,
        "force_points": fp, "gap_scheme": scheme, "threshold": threshold,
    });
    Ok((d, cfg))
}

pub fn sample_sle_rho(p: &SampleSleRhoArgs, out: &Path) -> Result<Vec<Gate>> {
    let (d, cfg) = sample_sle_rho_cmd(p)?;
    let mut run = RunDir::begin(out)?;
    write_driving(&mut run, &d)?;
    run.commit("sample-sle-rho", cfg, Some(seed_record(p.seed.unwrap_or_default(), 1)))
}

fn driving_for(p: &SampleSleRhoArgs) -> Result<(DrivingFunction, Value)> {
    if p.rho.as_ref().is_some_and(|r| !r.is_empty()) || p.force_point.as_ref().is_some_and(|f| !f.is_empty()) {
        sample_sle_rho_cmd(p)
    } else {
        let q = SampleSleArgs { kappa: p.kappa, seed: p.seed, dt: p.dt, steps: p.steps };
        sample_sle_cmd(&q)
    }
}

/// Evenly thinned copies of each path so the total stays within `budget`.
fn thin<'a>(paths: &[&'a [[f64; 2]]], budget: usize) -> Vec<Vec<[f64; 2]>> {
    let total: usize = paths.iter().map(|p| p.len()).sum();
    let stride = total.div_ceil(budget.max(1)).max(1);
    paths
        .iter()
        .map(|p| {
            let mut v: Vec<[f64; 2]> = p.iter().step_by(stride).copied().collect();
            if let Some(last) = p.last() {
                if v.last() != Some(last) {
                    v.push(*last);
                }
            }
            v
        })
        .collect()
}

pub fn trace(p: &TraceArgs, out: &Path) -> Result<Vec<Gate>> {
    let (d, mut cfg) = driving_for(&p.driving)?;
    let refine = p.refine.unwrap_or(1);
    cfg["refine"] = json!(refine);
    let chain = d.chain()?;
    let line = chain.trace_refined(refine)?;
    let mut run = RunDir::begin(out)?;
    run.csv("trace.csv", &["t", "x", "y"], line.points.iter().map(|q| row([num(q.t), num(q.x), num(q.y)])))?;
    let steps: Vec<[f64; 2]> = chain.steps().iter().map(|s| [s.dt, s.dw]).collect();
    run.json("chain.json", &json!({ "w0": chain.w0(), "steps": steps }))?;
    let pts: Vec<[f64; 2]> = line.points.iter().map(|q| [q.x, q.y]).collect();
    let thinned = thin(&[&pts], SVG_POINT_BUDGET);
    let layers: Vec<(&[[f64; 2]], Option<f64>)> = thinned.iter().map(|v| (v.as_slice(), None)).collect();
    run.text("trace.svg", &svg::curves(&format!("SLE trace, kappa = {}", num(d.kappa)), &layers, None)?)?;
    let seed = p.driving.seed.unwrap_or_default();
    run.commit("trace", cfg, Some(seed_record(seed, 1)))
}

pub fn gff(p: &GffArgs, out: &Path) -> Result<Vec<Gate>> {
    let action = need(p.action, "action (sample or calibrate)")?;
    let kappa = need(p.kappa, "kappa")?;
    let seed = need(p.seed, "seed")?;
    let grid = p.grid.unwrap_or(128);
    let mut run = RunDir::begin(out)?;
    match action {
        GffAction::Sample => {
            let scale = p.scale.unwrap_or(DEFAULT_SCALE);
            let format = p.format.unwrap_or(Format::Csv);
            let f = flowline_field(kappa, grid, scale, seed)?;
            let g = f.grid;
            let header = json!({
                "nx": g.nx, "ny": g.ny, "spacing": g.spacing, "x0": g.x0, "y0": g.y0,
                "seed": seed, "fluctuation_scale": scale, "boundary": f.boundary,
            });
            match format {
                Format::Csv => {
                    run.json("field_header.json", &header)?;
                    let rows = (0..g.ny).flat_map(|j| {
                        let f = &f;
                        (0..g.nx).map(move |i| {
                            let (x, y) = g.node(i, j);
                            row([i.to_string(), j.to_string(), num(x), num(y), num(f.values[g.idx(i, j)])])
                        })
                    });
                    run.csv("field.csv", &["i", "j", "x", "y", "value"], rows)?;
                }
                Format::Json => {
                    let mut h = header;
                    h["values"] = json!(f.values);
                    run.json("field.json", &h)?;
                }
            }
            let cfg = json!({ "action": "sample", "kappa": kappa, "seed": seed, "grid": grid, "scale": scale, "format": format });
            run.commit("gff", cfg, Some(seed_record(seed, 1)))
        }
        GffAction::Calibrate => {
            let replicas = p.replicas.unwrap_or(64);
            let c = calibrate_fluctuation_scale(kappa, grid, replicas, seed)?;
            run.json("calibration.json", &c)?;
            run.csv(
                "calibration.csv",
                &["kappa", "grid", "replicas", "seed", "scale", "kappa_estimate", "iterations"],
                [row([
                    num(c.kappa),
                    c.grid.to_string(),
                    c.replicas.to_string(),
                    c.seed.to_string(),
                    num(c.scale),
                    num(c.kappa_estimate),
                    c.iterations.to_string(),
                ])],
            )?;
            run.gate(Gate::relative("kappa_estimate", c.kappa_estimate, f64::NAN, kappa, 0.05));
            let cfg = json!({ "action": "calibrate", "kappa": kappa, "seed": seed, "grid": grid, "replicas": replicas });
            run.commit("gff", cfg, Some(seed_record(seed, replicas)))
        }
    }
}

/// Resolved settings shared by the field-path subcommands.
struct FieldSetup {
    kappa: f64,
    theta: f64,
    seed: u64,
    grid: usize,
    scale: f64,
    start: [f64; 2],
    step: f64,
    max_cell_visits: Option<u32>,
    max_steps: Option<usize>,
}

impl FieldSetup {
    fn from(p: &FieldPathArgs) -> Result<Self> {
        let start = match p.start.as_deref() {
            None => [0.0, 0.0],
            Some([x, y]) => [*x, *y],
            Some(_) => bail!("--start takes two numbers x,y"),
        };
        Ok(FieldSetup {
            kappa: need(p.kappa, "kappa")?,
            theta: p.theta.unwrap_or(0.0),
            seed: need(p.seed, "seed")?,
            grid: p.grid.unwrap_or(256),
            scale: p.scale.unwrap_or(DEFAULT_SCALE),
            start,
            step: p.step.unwrap_or(0.1),
            max_cell_visits: p.max_cell_visits,
            max_steps: p.max_steps,
        })
    }

    fn field(&self) -> Result<GffField> {
        Ok(flowline_field(self.kappa, self.grid, self.scale, self.seed)?)
    }

    fn tracer<'a>(&self, f: &'a GffField) -> Result<FlowTracer<'a>> {
        let mut tr = FlowTracer::new(f, ig_constants(self.kappa)?.chi)?;
        tr.step = self.step * f.grid.spacing;
        if let Some(v) = self.max_cell_visits {
            tr.max_cell_visits = v;
        }
        if let Some(m) = self.max_steps {
            tr.max_steps = m;
        }
        Ok(tr)
    }

    fn config(&self) -> Value {
        json!({
            "kappa": self.kappa, "theta": self.theta, "seed": self.seed, "grid": self.grid,
            "scale": self.scale, "start": self.start, "step": self.step,
            "max_cell_visits": self.max_cell_visits, "max_steps": self.max_steps,
        })
    }
}

fn stop_name(s: TraceStop) -> &'static str {
    match s {
        TraceStop::Boundary => "boundary",
        TraceStop::Exit => "exit",
        TraceStop::Budget => "budget",
        TraceStop::SelfTrap => "self-trap",
    }
}

/// Generates the object of a field-path subcommand.
fn field_cloud(kind: &str, p: &FieldPathArgs) -> Result<(PointCloud, Value)> {
    let s = FieldSetup::from(p)?;
    let f = s.field()?;
    let tr = s.tracer(&f)?;
    let mut cfg = s.config();
    let cloud = match kind {
        "flowline" => {
            let l = tr.trace(s.start, s.theta)?;
            let n = l.points.len();
            PointCloud {
                points: l.points,
                provenance: igsim::flowlines::Provenance::Trace,
                meta: json!({ "theta": s.theta }),
                paths: vec![igsim::flowlines::PathSummary { start: 0, len: n, angle: Some(s.theta), stop: l.stop }],
            }
        }
        "lightcone" => {
            let paths = p.paths.unwrap_or(400);
            let changes = p.max_changes.unwrap_or(8);
            cfg["paths"] = json!(paths);
            cfg["max_changes"] = json!(changes);
            tr.light_cone(s.start, s.theta, paths, changes, s.seed)?
        }
        "fan" => {
            let n = p.angles.unwrap_or(33);
            cfg["angles"] = json!(n);
            tr.fan(s.start, s.theta, n)?
        }
        other => bail!("unknown field object {other}"),
    };
    Ok((cloud, cfg))
}

fn write_cloud(run: &mut RunDir, kind: &str, cloud: &PointCloud, kappa: f64, theta: f64) -> Result<()> {
    let rows = (0..cloud.paths.len()).flat_map(|k| {
        cloud.path_points(k).iter().map(move |q| row([k.to_string(), num(q[0]), num(q[1])]))
    });
    run.csv("points.csv", &["path", "x", "y"], rows)?;
    run.csv(
        "paths.csv",
        &["path", "angle", "len", "stop"],
        cloud.paths.iter().enumerate().map(|(k, ps)| row([k.to_string(), opt_num(ps.angle), ps.len.to_string(), stop_name(ps.stop).into()])),
    )?;
    let slices: Vec<&[[f64; 2]]> = (0..cloud.paths.len()).map(|k| cloud.path_points(k)).collect();
    let thinned = thin(&slices, SVG_POINT_BUDGET);
    let layers: Vec<(&[[f64; 2]], Option<f64>)> =
        thinned.iter().zip(&cloud.paths).map(|(v, ps)| (v.as_slice(), ps.angle)).collect();
    let title = format!("{kind}, kappa = {}, theta = {}", num(kappa), num(theta));
    run.text(&format!("{kind}.svg"), &svg::curves(&title, &layers, Some((-1.0, 1.0, 0.0, 2.0)))?)
}

pub fn field_paths(kind: &str, p: &FieldPathArgs, out: &Path) -> Result<Vec<Gate>> {
    let (cloud, cfg) = field_cloud(kind, p)?;
    let mut run = RunDir::begin(out)?;
    write_cloud(&mut run, kind, &cloud, cfg["kappa"].as_f64().unwrap_or(f64::NAN), cfg["theta"].as_f64().unwrap_or(0.0))?;
    let seed = cfg["seed"].as_u64().unwrap_or_default();
    let streams = cloud.paths.len();
    run.commit(kind, cfg, Some(seed_record(seed, streams)))
}

fn read_points(path: &Path) -> Result<Vec<[f64; 2]>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let h = r.headers()?.clone();
    let col = |name: &str| h.iter().position(|c| c == name).ok_or_else(|| anyhow!("{} has no {name} column", path.display()));
    let (ix, iy) = (col("x")?, col("y")?);
    let mut pts = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let x: f64 = rec.get(ix).unwrap_or("").parse().context("x value")?;
        let y: f64 = rec.get(iy).unwrap_or("").parse().context("y value")?;
        pts.push([x, y]);
    }
    ensure!(!pts.is_empty(), "{} holds no points", path.display());
    Ok(pts)
}

/// Linear interpolation so that consecutive points are at most `h` apart.
pub fn densify(pts: &[[f64; 2]], h: f64) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(pts.len());
    if let Some(first) = pts.first() {
        out.push(*first);
    }
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let n = ((b[0] - a[0]).hypot(b[1] - a[1]) / h).ceil().max(1.0) as usize;
        for i in 1..=n {
            let s = i as f64 / n as f64;
            out.push([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
        }
    }
    out
}

/// Box-count window for a curve sampled at uneven spacing: from an eighth of
/// the diameter down to eight median segment lengths.
pub fn trace_window(pts: &[[f64; 2]]) -> (f64, f64, f64) {
    let mut seg: Vec<f64> = pts.windows(2).map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1])).collect();
    seg.sort_by(f64::total_cmp);
    let med = seg.get(seg.len() / 2).copied().unwrap_or(0.0);
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for q in pts {
        x0 = x0.min(q[0]);
        x1 = x1.max(q[0]);
        y0 = y0.min(q[1]);
        y1 = y1.max(q[1]);
    }
    let diam = (x1 - x0).max(y1 - y0);
    (diam / 8.0, 8.0 * med, med)
}

pub fn dim_estimate(p: &DimEstimateArgs, out: &Path) -> Result<Vec<Gate>> {
    let object = need(p.object, "object")?;
    let n_scales = p.n_scales.unwrap_or(if object == DimObject::Trace { 8 } else { 6 });
    let tol = p.tolerance.unwrap_or(0.10);
    let (pts, predicted, default_window, mut cfg, seeds) = match object {
        DimObject::Points => {
            let input = need(p.input.clone(), "input")?;
            let pts = read_points(&input)?;
            let w = trace_window(&pts);
            (pts, p.predicted, (w.0, w.1), json!({ "input": input }), None)
        }
        DimObject::Trace => {
            let kappa = need(p.field.kappa, "kappa")?;
            let seed = need(p.field.seed, "seed")?;
            let steps = p.steps.unwrap_or(20_000);
            let dt = p.dt.unwrap_or(1.0 / steps as f64);
            let d = sle_driving(kappa, steps, dt, seed)?;
            let line = d.chain()?.trace()?;
            let raw: Vec<[f64; 2]> = line.points.iter().map(|q| [q.x, q.y]).collect();
            let (hi, lo, med) = trace_window(&raw);
            let pts = densify(&raw, med / 4.0);
            let pred = p.predicted.unwrap_or((1.0 + kappa / 8.0).min(2.0));
            (pts, Some(pred), (hi, lo), json!({ "kappa": kappa, "seed": seed, "steps": steps, "dt": dt }), Some(seed_record(seed, 1)))
        }
        DimObject::Flowline | DimObject::Lightcone | DimObject::Fan => {
            let kind = match object {
                DimObject::Flowline => "flowline",
                DimObject::Lightcone => "lightcone",
                _ => "fan",
            };
            let (cloud, cfg) = field_cloud(kind, &p.field)?;
            let kappa = cfg["kappa"].as_f64().unwrap_or(f64::NAN);
            let theta = cfg["theta"].as_f64().unwrap_or(0.0);
            let grid = cfg["grid"].as_u64().unwrap_or(256) as f64;
            let h = 2.0 / grid;
            let pred = match p.predicted {
                Some(v) => v,
                None if object == DimObject::Lightcone => capped_dimension(lightcone_dimension(kappa, theta)?),
                None => 1.0 + kappa / 8.0,
            };
            let seed = cfg["seed"].as_u64().unwrap_or_default();
            let n = cloud.paths.len();
            (cloud.points, Some(pred), (0.25, 4.0 * h), cfg, Some(seed_record(seed, n)))
        }
    };
    let r_max = p.r_max.unwrap_or(default_window.0);
    let r_min = p.r_min.unwrap_or(default_window.1);
    ensure!(r_max > r_min && r_min > 0.0, "need r-max > r-min > 0 (got {r_max}, {r_min})");
    let scales = geometric_scales(r_max, r_min, n_scales);
    let fit = box_count(&pts, &scales)?;
    cfg["object"] = json!(object);
    cfg["r_max"] = json!(r_max);
    cfg["r_min"] = json!(r_min);
    cfg["n_scales"] = json!(n_scales);
    cfg["tolerance"] = json!(tol);
    let mut run = RunDir::begin(out)?;
    let counts: Vec<(f64, usize)> = scales.iter().map(|&r| (r, box_counts(&pts, r))).collect();
    run.csv(
        "box_counts.csv",
        &["scale", "count", "in_fit"],
        counts.iter().map(|&(r, n)| row([num(r), n.to_string(), (r >= fit.window.0 && r <= fit.window.1).to_string()])),
    )?;
    run.json("fit.json", &json!({ "fit": fit, "predicted": predicted }))?;
    let plot_pts: Vec<(f64, f64, f64)> = counts.iter().map(|&(r, n)| (1.0 / r, n as f64, 0.0)).collect();
    run.text("loglog.svg", &svg::loglog_plot("box counting", "1/r", "N(r)", &plot_pts, &fit, predicted)?)?;
    if let Some(pred) = predicted {
        run.gate(Gate::absolute("dimension", fit.slope, fit.stderr, pred, tol));
    }
    run.commit("dim-estimate", cfg, seeds)
}

fn default_moment_r(kappa: f64) -> Result<f64> {
    ensure!(kappa > 4.0, "the default r needs kappa > 4; pass --r");
    Ok(canonical_r_and_beta(16.0 / kappa, 0.0)?.r)
}

fn z_of(v: &Option<Vec<f64>>) -> Result<Complex64> {
    match v.as_deref() {
        None => Ok(Complex64::new(0.0, 1.0)),
        Some([x, y]) => Ok(Complex64::new(*x, *y)),
        Some(_) => bail!("--z takes two numbers x,y"),
    }
}

pub fn exponent(p: &ExponentArgs, out: &Path) -> Result<Vec<Gate>> {
    let which = need(p.which, "which")?;
    let seed = need(p.seed, "seed")?;
    let mut run = RunDir::begin(out)?;
    match which {
        ExponentKind::Moment => {
            let kappa = p.kappa.unwrap_or(6.0);
            let r = match p.r {
                Some(r) => r,
                None => default_moment_r(kappa)?,
            };
            let z = z_of(&p.z)?;
            let eps = p.eps.clone().unwrap_or_else(|| vec![0.25, 0.125, 0.0625, 0.03125]);
            let replicas = p.replicas.unwrap_or(10_000);
            let tol = p.tolerance.unwrap_or(0.20);
            let m = derivative_moment_scaling(kappa, r, z, &eps, replicas, seed, &MomentOptions::default())?;
            let mut rows = Vec::new();
            for s in &m.rows {
                rows.push(row([num(s.eps), "moment".into(), num(s.mean), num(s.stderr), s.n.to_string()]));
                let f = s.hits as f64 / s.n as f64;
                rows.push(row([num(s.eps), "hit_fraction".into(), num(f), num((f * (1.0 - f) / s.n as f64).sqrt()), s.n.to_string()]));
            }
            run.csv("exponent.csv", &["eps", "statistic", "value", "stderr", "n"], rows)?;
            run.json("fit.json", &json!({ "fit": m.fit, "predicted_slope": m.predicted_slope, "nu": m.nu, "xi": m.xi, "r": r }))?;
            let pts: Vec<(f64, f64, f64)> = m.rows.iter().map(|s| (s.eps, s.mean, s.stderr)).collect();
            run.text("loglog.svg", &svg::loglog_plot("derivative moment", "eps", "moment", &pts, &m.fit, Some(m.predicted_slope))?)?;
            run.gate(Gate::relative("moment_slope", m.fit.slope, m.fit.stderr, m.predicted_slope, tol));
            run.gate(Gate::bands("moment_slope_band", m.fit.slope, m.fit.stderr, m.predicted_slope, 3.0));
            let cfg = json!({
                "which": "moment", "kappa": kappa, "r": r, "z": [z.re, z.im], "eps": eps,
                "replicas": replicas, "seed": seed, "tolerance": tol, "options": MomentOptions::default(),
            });
            run.commit("exponent", cfg, Some(seed_record(seed, replicas)))
        }
        ExponentKind::Nonintersection => {
            let kappa = p.kappa.unwrap_or(2.0);
            let c = ig_constants(kappa)?;
            let theta1 = p.theta1.unwrap_or(FRAC_PI_4);
            let theta2 = p.theta2.unwrap_or(-FRAC_PI_4);
            let a = p.a.unwrap_or(c.lambda_prime);
            let b = p.b.unwrap_or(-c.lambda_prime);
            let eps = p.eps.clone().unwrap_or_else(|| vec![0.2, 0.1, 0.05]);
            let replicas = p.replicas.unwrap_or(2000);
            let tol = p.tolerance.unwrap_or(0.30);
            let mut opts = TwoPathOptions::new(p.grid.unwrap_or(128), p.scale.unwrap_or(DEFAULT_SCALE));
            if let Some(t) = p.touch_distance {
                opts.touch_distance = t;
            }
            let res = nonintersection_experiment(kappa, theta1, theta2, a, b, &eps, replicas, seed, &opts)?;
            let mut rows = Vec::new();
            for fr in &res.rows {
                let n = fr.n as f64;
                for (name, k) in [
                    ("disjoint", fr.disjoint),
                    ("tails_separated", fr.tails_separated),
                    ("avoids_center", fr.avoids_center),
                    ("e_delta", fr.e_delta),
                    ("both_exited", fr.both_exited),
                ] {
                    let f = k as f64 / n;
                    rows.push(row([num(fr.eps), name.into(), num(f), num((f * (1.0 - f) / n).sqrt()), fr.n.to_string()]));
                }
            }
            run.csv("exponent.csv", &["eps", "statistic", "value", "stderr", "n"], rows)?;
            let two_minus_d = 2.0 - lightcone_dimension(kappa, (theta1 - theta2).clamp(0.0, PI))?;
            run.json(
                "fit.json",
                &json!({ "fit": res.fit, "predicted_alpha": res.predicted_alpha, "two_minus_d": two_minus_d }),
            )?;
            let pts: Vec<(f64, f64, f64)> = res.rows.iter().map(|fr| (fr.eps, fr.frequency(), fr.stderr())).collect();
            run.text(
                "loglog.svg",
                &svg::loglog_plot("non-intersection frequency", "eps", "P[disjoint]", &pts, &res.fit, Some(res.predicted_alpha))?,
            )?;
            run.gate(Gate::relative("alpha", res.fit.slope, res.fit.stderr, res.predicted_alpha, tol));
            run.gate(Gate::relative("alpha_vs_2_minus_d", res.fit.slope, res.fit.stderr, two_minus_d, tol));
            let cfg = json!({
                "which": "nonintersection", "kappa": kappa, "theta1": theta1, "theta2": theta2, "a": a, "b": b,
                "eps": eps, "replicas": replicas, "seed": seed, "tolerance": tol, "options": opts,
            });
            run.commit("exponent", cfg, Some(seed_record(seed, replicas)))
        }
    }
}

fn write_constancy(run: &mut RunDir, title: &str, rep: &ConstancyReport, bands: f64) -> Result<()> {
    run.csv(
        "checkpoints.csv",
        &["t", "mean", "stderr", "n", "stopped", "m0"],
        rep.rows.iter().map(|r| row([num(r.t), num(r.mean), num(r.stderr), r.n.to_string(), r.stopped.to_string(), num(rep.m0)])),
    )?;
    run.text("drift.svg", &svg::drift_plot(title, rep.m0, &rep.rows)?)?;
    for r in &rep.rows {
        run.gate(Gate::bands(&format!("mean_at_t={}", num(r.t)), r.mean, r.stderr, rep.m0, bands));
    }
    Ok(())
}

pub fn martingale_check(p: &MartingaleArgs, out: &Path) -> Result<Vec<Gate>> {
    let which = need(p.which, "which")?;
    let seed = need(p.seed, "seed")?;
    let replicas = p.replicas.unwrap_or(10_000);
    let bands = p.bands.unwrap_or(3.0);
    let mut run = RunDir::begin(out)?;
    let cfg = match which {
        MartingaleKind::OnePoint => {
            let kappa = p.kappa.unwrap_or(6.0);
            let r = match p.r {
                Some(r) => r,
                None => default_moment_r(kappa)?,
            };
            let z = z_of(&p.z)?;
            let cps = p.checkpoints.clone().unwrap_or_else(|| vec![0.05, 0.1, 0.2, 0.4]);
            let mut opts = OnePointOptions::default();
            if let Some(d) = p.dt_max {
                opts.dt_max = d;
            }
            let rep = one_point_constancy(kappa, r, z, &cps, replicas, seed, &opts)?;
            write_constancy(&mut run, "one-point martingale", &rep, bands)?;
            json!({
                "which": "one-point", "kappa": kappa, "r": r, "z": [z.re, z.im], "checkpoints": cps,
                "replicas": replicas, "seed": seed, "bands": bands, "options": opts,
            })
        }
        MartingaleKind::TwoPath => {
            let kappa = p.kappa.unwrap_or(2.0);
            let c = ig_constants(kappa)?;
            let theta1 = p.theta1.unwrap_or(FRAC_PI_4);
            let theta2 = p.theta2.unwrap_or(-FRAC_PI_4);
            let a = p.a.unwrap_or(c.lambda_prime);
            let b = p.b.unwrap_or(-c.lambda_prime);
            let x1 = p.x1.unwrap_or(-0.5);
            let x2 = p.x2.unwrap_or(2.0);
            let threat = p.threat.unwrap_or(0.05);
            let cps = p.checkpoints.clone().unwrap_or_else(|| vec![0.005, 0.01, 0.02, 0.04]);
            let mut opts = GrowthOptions::default();
            if let Some(d) = p.dt_max {
                opts.dt_max = d;
            }
            let setup = TwoPathSetup::new(kappa, theta1, theta2, a, b, x1, x2)?;
            let rep = two_path_constancy(&setup, &cps, threat, replicas, seed, &opts)?;
            write_constancy(&mut run, "two-path martingale", &rep, bands)?;
            json!({
                "which": "two-path", "kappa": kappa, "theta1": theta1, "theta2": theta2, "a": a, "b": b,
                "x1": x1, "x2": x2, "threat": threat, "checkpoints": cps, "replicas": replicas, "seed": seed,
                "bands": bands, "options": opts,
            })
        }
    };
    run.commit("martingale-check", cfg, Some(seed_record(seed, replicas)))
}

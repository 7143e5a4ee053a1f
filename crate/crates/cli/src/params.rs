//! Flag sets. Every field is optional so that flags, config keys and defaults
//! can be layered; defaults are applied by the subcommands.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct FormulasArgs {
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Light-cone angle θ ∈ [0, π].
    #[arg(long, conflicts_with = "rho")]
    pub theta: Option<f64>,
    /// Force-point weight ρ.
    #[arg(long)]
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct PhaseDiagramArgs {
    #[arg(long)]
    pub kappa_steps: Option<usize>,
    #[arg(long)]
    pub rho_steps: Option<usize>,
    #[arg(long)]
    pub rho_min: Option<f64>,
    #[arg(long)]
    pub rho_max: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleSleArgs {
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapSchemeArg {
    TruncatedEuler,
    Exact,
    DirectEuler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdArg {
    Stop,
    Continue,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleSleRhoArgs {
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Weights, one per force point.
    #[arg(long, value_delimiter = ',')]
    pub rho: Option<Vec<f64>>,
    /// Positions, as `L:x`, `R:x` or a bare `x` (left of the start if
    /// `x < start`, right otherwise).
    #[arg(long, value_delimiter = ',')]
    pub force_point: Option<Vec<String>>,
    /// Starting point of the curve.
    #[arg(long)]
    pub start: Option<f64>,
    #[arg(long, value_enum)]
    pub gap_scheme: Option<GapSchemeArg>,
    /// What to do when colliding weights sum to ≤ −2.
    #[arg(long, value_enum)]
    pub threshold: Option<ThresholdArg>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub driving: SampleSleRhoArgs,
    /// Trace points per driving step.
    #[arg(long)]
    pub refine: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GffAction {
    Sample,
    Calibrate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct GffArgs {
    #[arg(value_enum)]
    pub action: Option<GffAction>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Cells across the domain `[−1,1] × [0,2]`.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Variance multiplier of the zero-boundary part.
    #[arg(long)]
    pub scale: Option<f64>,
    /// Calibration replicas.
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldPathArgs {
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Flow-line angle, light-cone opening or fan half-width.
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub scale: Option<f64>,
    /// Start point `x,y`.
    #[arg(long, value_delimiter = ',')]
    pub start: Option<Vec<f64>>,
    /// Euler step in grid spacings.
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub max_cell_visits: Option<u32>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Light-cone paths.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Angle changes per light-cone path.
    #[arg(long)]
    pub max_changes: Option<usize>,
    /// Fan angles.
    #[arg(long)]
    pub angles: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DimObject {
    Trace,
    Flowline,
    Lightcone,
    Fan,
    Points,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct DimEstimateArgs {
    #[arg(long, value_enum)]
    pub object: Option<DimObject>,
    /// CSV with `x` and `y` columns, for `--object points`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub field: FieldPathArgs,
    /// Driving steps for `--object trace`.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub r_max: Option<f64>,
    #[arg(long)]
    pub r_min: Option<f64>,
    #[arg(long)]
    pub n_scales: Option<usize>,
    /// Overrides the predicted dimension.
    #[arg(long)]
    pub predicted: Option<f64>,
    /// Absolute tolerance of the dimension gate.
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExponentKind {
    Moment,
    Nonintersection,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct ExponentArgs {
    #[arg(long, value_enum)]
    pub which: Option<ExponentKind>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    /// Moment parameter r.
    #[arg(long)]
    pub r: Option<f64>,
    /// Marked point `x,y`.
    #[arg(long, value_delimiter = ',')]
    pub z: Option<Vec<f64>>,
    #[arg(long)]
    pub theta1: Option<f64>,
    #[arg(long)]
    pub theta2: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub scale: Option<f64>,
    /// Touch distance in grid spacings.
    #[arg(long)]
    pub touch_distance: Option<f64>,
    /// Relative tolerance of the slope gate.
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MartingaleKind {
    OnePoint,
    TwoPath,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct MartingaleArgs {
    #[arg(long, value_enum)]
    pub which: Option<MartingaleKind>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub checkpoints: Option<Vec<f64>>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub z: Option<Vec<f64>>,
    #[arg(long)]
    pub theta1: Option<f64>,
    #[arg(long)]
    pub theta2: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub x1: Option<f64>,
    #[arg(long)]
    pub x2: Option<f64>,
    /// Two-path freeze when the gap to `x₂` falls below `threat · x₂`.
    #[arg(long)]
    pub threat: Option<f64>,
    #[arg(long)]
    pub dt_max: Option<f64>,
    /// Gate width in standard errors.
    #[arg(long)]
    pub bands: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportArgs {
    /// Directory searched recursively for run manifests.
    #[arg(long)]
    pub dir: Option<PathBuf>,
}

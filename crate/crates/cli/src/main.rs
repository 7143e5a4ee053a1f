//! `igsim`: experiment runner for SLE, GFF flow lines and exponent estimates.
//!
//! Every subcommand writes its artifacts (CSV, JSON, SVG) plus a
//! `manifest.json` into one run directory. Stochastic subcommands need
//! `--seed`; replica `k` always draws from stream `k`, so output bytes do not
//! depend on `--parallelism`.

mod commands;
mod config;
mod output;
mod params;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde_json::{Map, Value};

use params::*;

/// Base directory for runs when `--out` is not given.
pub const OUT_ENV: &str = "IGSIM_OUT";
const DEFAULT_BASE: &str = "igsim-runs";

#[derive(Debug, Parser)]
#[command(name = "igsim", version, about = "SLE and GFF flow-line experiments")]
struct Cli {
    /// TOML file with the subcommand's flags as keys; flags on the command line win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory. Defaults to `$IGSIM_OUT/<subcommand>` (or `igsim-runs/<subcommand>`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; output is identical for every value.
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    /// Exit with status 2 when any acceptance gate of the run fails.
    #[arg(long, global = true)]
    check: bool,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dimensions, Bessel dimension and phase at one (κ, θ) or (κ, ρ).
    #[command(allow_negative_numbers = true)]
    Formulas(FormulasArgs),
    /// SLE_κ(ρ) phase regions as CSV and SVG.
    #[command(allow_negative_numbers = true)]
    PhaseDiagram(PhaseDiagramArgs),
    /// Brownian driving function of SLE_κ.
    #[command(allow_negative_numbers = true)]
    SampleSle(SampleSleArgs),
    /// Driving function of one-sided SLE_κ(ρ).
    #[command(allow_negative_numbers = true)]
    SampleSleRho(SampleSleRhoArgs),
    /// Trace of SLE_κ or SLE_κ(ρ) through the zipper.
    #[command(allow_negative_numbers = true)]
    Trace(TraceArgs),
    /// Sample a discrete GFF or calibrate its fluctuation scale.
    #[command(allow_negative_numbers = true)]
    Gff(GffArgs),
    /// One flow line of a sampled field.
    #[command(allow_negative_numbers = true)]
    Flowline(FieldPathArgs),
    /// Light cone of angle-varying flow lines.
    #[command(allow_negative_numbers = true)]
    Lightcone(FieldPathArgs),
    /// Fan of fixed-angle flow lines.
    #[command(allow_negative_numbers = true)]
    Fan(FieldPathArgs),
    /// Box-counting dimension of a generated object or a CSV point list.
    #[command(allow_negative_numbers = true)]
    DimEstimate(DimEstimateArgs),
    /// Monte Carlo exponent regressions.
    #[command(allow_negative_numbers = true)]
    Exponent(ExponentArgs),
    /// Constancy of the one-point or two-path martingale.
    #[command(allow_negative_numbers = true)]
    MartingaleCheck(MartingaleArgs),
    /// Summarize every run below a directory.
    Report(ReportArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Formulas(_) => "formulas",
            Command::PhaseDiagram(_) => "phase-diagram",
            Command::SampleSle(_) => "sample-sle",
            Command::SampleSleRho(_) => "sample-sle-rho",
            Command::Trace(_) => "trace",
            Command::Gff(_) => "gff",
            Command::Flowline(_) => "flowline",
            Command::Lightcone(_) => "lightcone",
            Command::Fan(_) => "fan",
            Command::DimEstimate(_) => "dim-estimate",
            Command::Exponent(_) => "exponent",
            Command::MartingaleCheck(_) => "martingale-check",
            Command::Report(_) => "report",
        }
    }
}

fn global<T: serde::de::DeserializeOwned>(file: &Map<String, Value>, key: &str) -> Result<Option<T>> {
    file.get(key)
        .map(|v| serde_json::from_value(v.clone()).with_context(|| format!("config key {key}")))
        .transpose()
}

fn base_dir() -> PathBuf {
    std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_BASE))
}

fn run(cli: Cli) -> Result<bool> {
    let file = match &cli.config {
        Some(p) => config::load(p)?,
        None => Map::new(),
    };
    let threads = match cli.parallelism {
        Some(n) => Some(n),
        None => global::<usize>(&file, "parallelism")?,
    };
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring the worker pool")?;
    }
    let check = cli.check || global::<bool>(&file, "check")?.unwrap_or(false);
    let out = match cli.out.clone() {
        Some(p) => p,
        None => match global::<PathBuf>(&file, "out")? {
            Some(p) => p,
            None => base_dir().join(cli.cmd.name()),
        },
    };
    let name = cli.cmd.name();
    let gates = match &cli.cmd {
        Command::Formulas(a) => commands::formulas(&config::merge(a, &file)?, &out)?,
        Command::PhaseDiagram(a) => commands::phase_diagram(&config::merge(a, &file)?, &out)?,
        Command::SampleSle(a) => commands::sample_sle(&config::merge(a, &file)?, &out)?,
        Command::SampleSleRho(a) => commands::sample_sle_rho(&config::merge(a, &file)?, &out)?,
        Command::Trace(a) => commands::trace(&config::merge(a, &file)?, &out)?,
        Command::Gff(a) => commands::gff(&config::merge(a, &file)?, &out)?,
        Command::Flowline(a) => commands::field_paths(name, &config::merge(a, &file)?, &out)?,
        Command::Lightcone(a) => commands::field_paths(name, &config::merge(a, &file)?, &out)?,
        Command::Fan(a) => commands::field_paths(name, &config::merge(a, &file)?, &out)?,
        Command::DimEstimate(a) => commands::dim_estimate(&config::merge(a, &file)?, &out)?,
        Command::Exponent(a) => commands::exponent(&config::merge(a, &file)?, &out)?,
        Command::MartingaleCheck(a) => commands::martingale_check(&config::merge(a, &file)?, &out)?,
        Command::Report(a) => {
            let a: ReportArgs = config::merge(a, &file)?;
            let dir = a.dir.clone().unwrap_or_else(base_dir);
            print!("{}", report::report(&dir)?);
            Vec::new()
        }
    };
    for g in &gates {
        eprintln!(
            "{} {}: measured {} (stderr {}), predicted {}, tolerance {} {}",
            if g.pass { "PASS" } else { "FAIL" },
            g.quantity,
            output::num(g.measured),
            output::num(g.stderr),
            output::num(g.predicted),
            output::num(g.tolerance),
            g.tolerance_kind
        );
    }
    if !matches!(cli.cmd, Command::Report(_)) {
        eprintln!("wrote {}", out.display());
    }
    Ok(!check || gates.iter().all(|g| g.pass))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("acceptance gate failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

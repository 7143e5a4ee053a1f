//! Run directories: files are staged next to the target and moved into place
//! only when the subcommand succeeds.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

/// One row of `summary.csv`: a measured quantity against its prediction.
#[derive(Debug, Clone, Serialize)]
pub struct Gate {
    pub quantity: String,
    pub measured: f64,
    pub stderr: f64,
    pub predicted: f64,
    pub tolerance: f64,
    /// `abs`, `rel` or `stderr` (multiples of the measured stderr).
    pub tolerance_kind: &'static str,
    pub pass: bool,
}

impl Gate {
    pub fn absolute(quantity: &str, measured: f64, stderr: f64, predicted: f64, tol: f64) -> Self {
        let pass = (measured - predicted).abs() <= tol;
        Gate { quantity: quantity.into(), measured, stderr, predicted, tolerance: tol, tolerance_kind: "abs", pass }
    }

    pub fn relative(quantity: &str, measured: f64, stderr: f64, predicted: f64, tol: f64) -> Self {
        let pass = (measured - predicted).abs() <= tol * predicted.abs();
        Gate { quantity: quantity.into(), measured, stderr, predicted, tolerance: tol, tolerance_kind: "rel", pass }
    }

    pub fn bands(quantity: &str, measured: f64, stderr: f64, predicted: f64, bands: f64) -> Self {
        let pass = (measured - predicted).abs() <= bands * stderr;
        Gate { quantity: quantity.into(), measured, stderr, predicted, tolerance: bands, tolerance_kind: "stderr", pass }
    }
}

pub struct RunDir {
    target: PathBuf,
    stage: PathBuf,
    files: Vec<String>,
    gates: Vec<Gate>,
    committed: bool,
}

impl RunDir {
    pub fn begin(target: &Path) -> Result<Self> {
        let name = target.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent).with_context(|| format!("creating {}", parent.display()))?;
        let stage = parent.join(format!(".{name}.partial-{}", std::process::id()));
        if stage.exists() {
            fs::remove_dir_all(&stage)?;
        }
        fs::create_dir_all(&stage).with_context(|| format!("creating {}", stage.display()))?;
        Ok(RunDir { target: target.to_path_buf(), stage, files: Vec::new(), gates: Vec::new(), committed: false })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.stage.join(name)
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let p = self.path(name);
        fs::write(&p, body).with_context(|| format!("writing {}", p.display()))
    }

    pub fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(v)?;
        s.push('\n');
        self.text(name, &s)
    }

    pub fn csv<R: AsRef<[String]>>(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<()> {
        let p = self.path(name);
        let mut w = csv::Writer::from_path(&p).with_context(|| format!("writing {}", p.display()))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r.as_ref())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn gate(&mut self, g: Gate) {
        self.gates.push(g);
    }

    /// Writes `summary.csv` (when gates exist) and `manifest.json`, then moves
    /// everything into the target directory.
    pub fn commit(mut self, subcommand: &str, config: Value, seeds: Option<Value>) -> Result<Vec<Gate>> {
        if !self.gates.is_empty() {
            let rows: Vec<Vec<String>> = self
                .gates
                .iter()
                .map(|g| {
                    vec![
                        g.quantity.clone(),
                        num(g.measured),
                        num(g.stderr),
                        num(g.predicted),
                        num(g.tolerance),
                        g.tolerance_kind.to_string(),
                        g.pass.to_string(),
                    ]
                })
                .collect();
            self.csv("summary.csv", &["quantity", "measured", "stderr", "predicted", "tolerance", "tolerance_kind", "pass"], rows)?;
        }
        let manifest = json!({
            "tool": "igsim",
            "version": env!("CARGO_PKG_VERSION"),
            "subcommand": subcommand,
            "config": config,
            "seeds": seeds,
            "files": self.files,
        });
        self.json("manifest.json", &manifest)?;
        // A previous run at the target is replaced whole so no stale files
        // survive; any other non-empty directory is left alone.
        if self.target.exists() {
            let empty = fs::read_dir(&self.target)?.next().is_none();
            if self.target.join("manifest.json").is_file() {
                fs::remove_dir_all(&self.target).with_context(|| format!("replacing {}", self.target.display()))?;
            } else if empty {
                fs::remove_dir(&self.target)?;
            } else {
                bail!("{} exists and is not an igsim run directory", self.target.display());
            }
        }
        fs::rename(&self.stage, &self.target).with_context(|| format!("moving the run into {}", self.target.display()))?;
        self.committed = true;
        Ok(std::mem::take(&mut self.gates))
    }
}

impl Drop for RunDir {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.stage);
        }
    }
}

/// Shortest round-trip decimal; identical inputs give identical bytes.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x}")
    }
}

/// Seed record for a run whose replica `k` uses ChaCha8 stream `k`.
pub fn seed_record(seed: u64, replicas: usize) -> Value {
    json!({
        "seed": seed,
        "generator": "ChaCha8Rng::seed_from_u64(seed), replica k on stream k",
        "streams": [0, replicas],
    })
}

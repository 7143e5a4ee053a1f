//! Collects the runs below a directory into one markdown table per subcommand.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde_json::Value;

fn manifests(dir: &Path, found: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let p = e.path();
        let name = e.file_name();
        // Staging directories of interrupted runs are skipped.
        if name.to_string_lossy().starts_with('.') {
            continue;
        }
        if e.file_type()?.is_dir() {
            manifests(&p, found)?;
        } else if name == "manifest.json" {
            found.push(p);
        }
    }
    Ok(())
}

struct Run {
    dir: String,
    rows: Vec<Vec<String>>,
}

/// Writes `report.md` into `dir` and returns its contents.
pub fn report(dir: &Path) -> Result<String> {
    let mut found = Vec::new();
    manifests(dir, &mut found)?;
    if found.is_empty() {
        bail!("no manifest.json below {}", dir.display());
    }
    let mut groups: BTreeMap<String, Vec<Run>> = BTreeMap::new();
    for m in &found {
        let manifest: Value = serde_json::from_str(&fs::read_to_string(m)?).with_context(|| format!("parsing {}", m.display()))?;
        let sub = manifest["subcommand"].as_str().unwrap_or("unknown").to_string();
        let run_dir = m.parent().unwrap_or(dir);
        let rel = run_dir.strip_prefix(dir).unwrap_or(run_dir);
        let rel = if rel.as_os_str().is_empty() { ".".to_string() } else { rel.display().to_string() };
        let summary = run_dir.join("summary.csv");
        let mut rows = Vec::new();
        if summary.exists() {
            let mut r = csv::Reader::from_path(&summary)?;
            for rec in r.records() {
                rows.push(rec?.iter().map(str::to_string).collect());
            }
        }
        groups.entry(sub).or_default().push(Run { dir: rel, rows });
    }
    let mut md = String::from("# igsim report\n");
    for (sub, runs) in &groups {
        md.push_str(&format!("\n## {sub}\n\n"));
        md.push_str("| run | quantity | measured | stderr | predicted | tolerance | kind | pass |\n");
        md.push_str("|---|---|---|---|---|---|---|---|\n");
        for run in runs {
            if run.rows.is_empty() {
                md.push_str(&format!("| {} | (no gates) | | | | | | |\n", run.dir));
            }
            for r in &run.rows {
                md.push_str(&format!("| {} | {} |\n", run.dir, r.join(" | ")));
            }
        }
    }
    fs::write(dir.join("report.md"), &md).with_context(|| format!("writing {}", dir.join("report.md").display()))?;
    Ok(md)
}

//! TOML config files merged under command-line flags.
//!
//! A config file is a flat table whose keys are the long flag names of one
//! subcommand (`-` and `_` are interchangeable). Flags given on the command
//! line win over the file.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

/// Keys handled by the runner rather than by a subcommand.
pub const GLOBAL_KEYS: [&str; 3] = ["out", "parallelism", "check"];

pub fn load(path: &Path) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let table: toml::Table = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    let json = serde_json::to_value(table)?;
    let Value::Object(map) = json else { unreachable!("a TOML document is a table") };
    Ok(map.into_iter().map(|(k, v)| (k.replace('-', "_"), v)).collect())
}

/// Overlay the flags in `cli` onto `file`, validating every file key.
///
/// All violating keys are reported together.
pub fn merge<P>(cli: &P, file: &Map<String, Value>) -> Result<P>
where
    P: Serialize + DeserializeOwned,
{
    let mut errors = Vec::new();
    let mut merged = Map::new();
    for (key, value) in file {
        if GLOBAL_KEYS.contains(&key.as_str()) {
            continue;
        }
        let mut one = Map::new();
        one.insert(key.clone(), value.clone());
        // Unknown keys are dropped by deserialization, so a key that does not
        // survive the round trip is not part of the schema.
        match serde_json::from_value::<P>(Value::Object(one)).map(|p| serde_json::to_value(p)) {
            Ok(Ok(Value::Object(back))) if back.get(key).is_some_and(|v| !v.is_null()) => {
                merged.insert(key.clone(), value.clone());
            }
            Ok(_) => errors.push(format!("  {key}: unknown key")),
            Err(e) => errors.push(format!("  {key}: {e}")),
        }
    }
    if !errors.is_empty() {
        bail!("config schema errors:\n{}", errors.join("\n"));
    }
    let Value::Object(flags) = serde_json::to_value(cli)? else { bail!("flags did not serialize to a table") };
    for (k, v) in flags {
        if !v.is_null() {
            merged.insert(k, v);
        }
    }
    Ok(serde_json::from_value(Value::Object(merged))?)
}

//! Structured run provenance: every command writes a `run.json` embedding
//! the full resolved configuration so outputs are reproducible from the
//! record alone. No timestamps; reruns must be byte-identical.

use crate::config::Config;
use crate::error::CliError;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Serialize)]
struct SectionRecord {
    name: String,
    entries: BTreeMap<String, String>,
}

#[derive(Serialize)]
struct RunRecord<'a> {
    tool: &'a str,
    version: &'a str,
    command: &'a str,
    seed: u64,
    config: Vec<SectionRecord>,
    outputs: Vec<String>,
    summary: BTreeMap<String, serde_json::Value>,
}

pub struct Provenance {
    command: String,
    seed: u64,
    config: Vec<SectionRecord>,
    outputs: Vec<String>,
    summary: BTreeMap<String, serde_json::Value>,
}

impl Provenance {
    pub fn new(command: &str, seed: u64, config: &Config) -> Self {
        let config = config
            .sections()
            .iter()
            .map(|s| SectionRecord {
                name: s.name.clone(),
                entries: s
                    .entries()
                    .iter()
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect(),
            })
            .collect();
        Self {
            command: command.to_string(),
            seed,
            config,
            outputs: Vec::new(),
            summary: BTreeMap::new(),
        }
    }

    pub fn add_output(&mut self, name: &str) {
        self.outputs.push(name.to_string());
    }

    pub fn add_summary(&mut self, key: &str, value: impl Into<serde_json::Value>) {
        self.summary.insert(key.to_string(), value.into());
    }

    pub fn write(mut self, out_dir: &Path) -> Result<(), CliError> {
        self.outputs.sort();
        self.outputs.dedup();
        let record = RunRecord {
            tool: "spadsim",
            version: env!("CARGO_PKG_VERSION"),
            command: &self.command,
            seed: self.seed,
            config: self.config,
            outputs: self.outputs,
            summary: self.summary,
        };
        let path = out_dir.join("run.json");
        let json = serde_json::to_string_pretty(&record)
            .map_err(|e| CliError::config(format!("provenance serialization: {e}")))?;
        std::fs::write(&path, json + "\n").map_err(|e| CliError::io(&path, e))
    }
}

/// Write a text file under the run directory, registering it in provenance.
pub fn write_text(
    prov: &mut Provenance,
    out_dir: &Path,
    name: &str,
    contents: &str,
) -> Result<(), CliError> {
    let path = out_dir.join(name);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
    prov.add_output(name);
    Ok(())
}

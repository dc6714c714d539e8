//! Per-command run manifest.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: RunConfig,
    pub version: String,
    pub stages: Vec<StageTiming>,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
    pub diagnostics: BTreeMap<String, serde_json::Value>,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            command: command.into(),
            config: config.clone(),
            version: env!("CARGO_PKG_VERSION").into(),
            stages: Vec::new(),
            outputs: Vec::new(),
            diagnostics: BTreeMap::new(),
        }
    }

    /// Run `f` and record its wall-clock time under `stage`.
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.stages.push(StageTiming {
            stage: stage.into(),
            seconds: t.elapsed().as_secs_f64(),
        });
        out
    }

    pub fn output(&mut self, name: impl Into<String>) {
        self.outputs.push(name.into());
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.diagnostics.insert(key.into(), v);
    }

    /// Every listed output must exist and be non-empty.
    pub fn check_outputs(&self, dir: &Path) -> CliResult<()> {
        for o in &self.outputs {
            let len = std::fs::metadata(dir.join(o)).map(|m| m.len()).unwrap_or(0);
            if len == 0 {
                return Err(CliError::usage(format!("output {o} is missing or empty")));
            }
        }
        Ok(())
    }

    pub fn file_name(&self) -> String {
        format!("{}.manifest.json", self.command)
    }
}

//! Run manifest: config echo, tool version, timestamps, diagnostics, and
//! the hashed file inventory. Written atomically at the end of every run.
//!
//! Reproducibility contract: all result files are byte-deterministic for a
//! fixed config, build and thread-independent gather order; the manifest's
//! timestamp and runtime fields are the only values that vary between
//! identical runs (sweep CSVs also carry a wall-clock runtime column).

use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{FileRecord, OutputDir};
use crate::CliError;

#[derive(Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub created_utc: String,
    pub runtime_s: f64,
    pub threads: usize,
    pub seed: u64,
    /// Full config echo with all defaults made explicit.
    pub config: RunConfig,
    pub diagnostics: serde_json::Value,
    pub partial: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub files: Vec<FileRecord>,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig, seed: u64) -> Self {
        RunManifest {
            schema_version: 1,
            tool: "antidot",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            created_utc: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            runtime_s: 0.0,
            threads: current_threads(),
            seed,
            config: config.clone(),
            diagnostics: serde_json::Value::Null,
            partial: false,
            error: None,
            files: Vec::new(),
        }
    }

    pub fn finalize(
        mut self,
        out: &mut OutputDir,
        runtime_s: f64,
        diagnostics: serde_json::Value,
        error: Option<String>,
    ) -> Result<(), CliError> {
        self.runtime_s = runtime_s;
        self.diagnostics = diagnostics;
        self.partial = error.is_some();
        self.error = error;
        self.files = out.files().to_vec();
        let mut body = serde_json::to_vec_pretty(&self)
            .map_err(|e| CliError::Io(format!("serializing manifest: {e}")))?;
        body.push(b'\n');
        // Written last and not part of its own inventory.
        let tmp = out.root().join(format!("manifest.json.tmp-{}", std::process::id()));
        std::fs::write(&tmp, &body).map_err(|e| CliError::Io(format!("writing manifest: {e}")))?;
        std::fs::rename(&tmp, out.root().join("manifest.json"))
            .map_err(|e| CliError::Io(format!("renaming manifest: {e}")))?;
        Ok(())
    }
}

pub fn current_threads() -> usize {
    rayon::current_num_threads()
}

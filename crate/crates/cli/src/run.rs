//! Per-stage run manifests recording inputs, outputs, parameters and timing.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Result};
use serde::Serialize;

#[derive(Serialize)]
struct RunManifest<'a, P: Serialize> {
    stage: &'a str,
    tool_version: &'a str,
    parameters: &'a P,
    inputs: Vec<String>,
    outputs: Vec<String>,
    wall_clock_s: f64,
}

pub struct Stage {
    name: &'static str,
    start: Instant,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Stage {
    pub fn start(name: &'static str) -> Self {
        Stage {
            name,
            start: Instant::now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, p: impl AsRef<Path>) {
        self.inputs.push(p.as_ref().to_path_buf());
    }

    pub fn output(&mut self, p: impl AsRef<Path>) {
        self.outputs.push(p.as_ref().to_path_buf());
    }

    /// Writes the manifest to `path` after checking every listed file exists.
    pub fn finish(self, params: &impl Serialize, path: impl AsRef<Path>) -> Result<()> {
        for p in self.inputs.iter().chain(&self.outputs) {
            if !p.exists() {
                bail!("stage {} lists missing file {}", self.name, p.display());
            }
        }
        let show = |v: &[PathBuf]| v.iter().map(|p| p.display().to_string()).collect();
        let manifest = RunManifest {
            stage: self.name,
            tool_version: env!("CARGO_PKG_VERSION"),
            parameters: params,
            inputs: show(&self.inputs),
            outputs: show(&self.outputs),
            wall_clock_s: self.start.elapsed().as_secs_f64(),
        };
        slscan::io::save_json(&manifest, path)?;
        Ok(())
    }
}

/// `<out>.run.json` next to a single-file output.
pub fn sidecar(out: &Path) -> PathBuf {
    let mut name = out.file_stem().unwrap_or_default().to_os_string();
    name.push(".run.json");
    out.with_file_name(name)
}

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::io::sha256_file;

#[derive(Debug, Serialize)]
pub struct InputFile {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Machine {
    pub os: &'static str,
    pub arch: &'static str,
    pub available_parallelism: usize,
    pub worker_threads: usize,
}

impl Machine {
    pub fn current() -> Self {
        Self {
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
            available_parallelism: std::thread::available_parallelism().map_or(1, |n| n.get()),
            worker_threads: rayon::current_num_threads(),
        }
    }
}

/// What a run read, how it was configured, and what it wrote.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<InputFile>,
    pub version: &'static str,
    pub wall_time_seconds: f64,
    pub outputs: Vec<PathBuf>,
    pub machine: Machine,
}

/// Tracks the files a command writes into its output directory.
pub struct Run {
    command: &'static str,
    dir: PathBuf,
    started: Instant,
    inputs: Vec<InputFile>,
    outputs: Vec<PathBuf>,
}

impl Run {
    pub fn start(command: &'static str, dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            command,
            dir: dir.to_path_buf(),
            started: Instant::now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(InputFile {
            path: path.to_path_buf(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    /// Path for an output file; the file is listed in the manifest.
    pub fn output(&mut self, name: &str) -> PathBuf {
        let path = self.dir.join(name);
        self.outputs.push(path.clone());
        path
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.output(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn finish(mut self, parameters: impl Serialize, seed: Option<u64>) -> Result<PathBuf> {
        let path = self.dir.join("manifest.json");
        self.outputs.push(path.clone());
        let manifest = RunManifest {
            command: self.command.to_string(),
            parameters: serde_json::to_value(parameters)?,
            seed,
            inputs: self.inputs,
            version: env!("CARGO_PKG_VERSION"),
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
            outputs: self.outputs,
            machine: Machine::current(),
        };
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

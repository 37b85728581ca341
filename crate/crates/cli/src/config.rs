//! Parameter resolution: explicit flag, then the JSON config file, then the
//! built-in default.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ght_core::baselines::{BaselineConfig, DEFAULT_MAX_ITERS};
use ght_core::ght::{DEFAULT_MAX_ITERATIONS, DEFAULT_RHO, DEFAULT_TOLERANCE};
use ght_core::solver::SolverOptions;
use ght_core::{GhtConfig, Solver};
use serde::{Deserialize, Serialize};

use crate::args::{DictionaryArgs, ImageFormat, TuningArgs};

/// Everything a config file may set. Keys a command does not use are ignored
/// by that command.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub patch_side: Option<usize>,
    pub atoms_per_dim: Option<usize>,
    pub dictionary: Option<PathBuf>,
    pub budget: Option<f64>,
    pub solver: Option<Solver>,
    pub solvers: Option<Vec<Solver>>,
    pub sigma: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub rho: Option<f64>,
    pub tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
    pub baseline_max_iters: Option<usize>,
    pub format: Option<ImageFormat>,
    pub s_min: Option<usize>,
    pub s_max: Option<usize>,
    pub trials: Option<usize>,
    pub n: Option<usize>,
    pub l: Option<usize>,
    pub p: Option<usize>,
    pub p_list: Option<Vec<usize>>,
    pub s: Option<usize>,
    pub iterations: Option<usize>,
    pub repeats: Option<usize>,
    pub image_dir: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Flag, else config value, else default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// List flag (empty means unset), else config value, else default.
pub fn pick_list<T: Clone>(flag: &[T], file: Option<&Vec<T>>, default: &[T]) -> Vec<T> {
    if !flag.is_empty() {
        flag.to_vec()
    } else {
        file.cloned().unwrap_or_else(|| default.to_vec())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Tuning {
    pub rho: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub baseline_max_iters: usize,
}

impl Tuning {
    pub fn resolve(args: &TuningArgs, file: &FileConfig) -> Self {
        Self {
            rho: pick(args.rho, file.rho, DEFAULT_RHO),
            tolerance: pick(args.tolerance, file.tolerance, DEFAULT_TOLERANCE),
            max_iterations: pick(
                args.max_iterations,
                file.max_iterations,
                DEFAULT_MAX_ITERATIONS,
            ),
            baseline_max_iters: pick(
                args.baseline_max_iters,
                file.baseline_max_iters,
                DEFAULT_MAX_ITERS,
            ),
        }
    }

    pub fn options(&self) -> SolverOptions {
        let mut ght = GhtConfig::new(0);
        ght.rho = self.rho;
        ght.tolerance = self.tolerance;
        ght.max_iterations = self.max_iterations;
        SolverOptions {
            ght,
            baseline: BaselineConfig {
                max_iters: self.baseline_max_iters,
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DictionarySpec {
    pub patch_side: usize,
    pub atoms_per_dim: usize,
    pub csv: Option<PathBuf>,
}

impl DictionarySpec {
    pub fn resolve(args: &DictionaryArgs, file: &FileConfig) -> Self {
        Self {
            patch_side: pick(args.patch_side, file.patch_side, 8),
            atoms_per_dim: pick(args.atoms_per_dim, file.atoms_per_dim, 10),
            csv: args.dictionary.clone().or_else(|| file.dictionary.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        assert_eq!(pick(Some(1), Some(2), 3), 1);
        assert_eq!(pick(None, Some(2), 3), 2);
        assert_eq!(pick::<i32>(None, None, 3), 3);
        assert_eq!(pick_list(&[1], Some(&vec![2]), &[3]), vec![1]);
        assert_eq!(pick_list(&[], Some(&vec![2]), &[3]), vec![2]);
        assert_eq!(pick_list::<i32>(&[], None, &[3]), vec![3]);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<FileConfig>(r#"{"rho": 0.5}"#).is_ok());
        assert!(serde_json::from_str::<FileConfig>(r#"{"rhoo": 0.5}"#).is_err());
        let c: FileConfig = serde_json::from_str(r#"{"solvers": ["omp", "ght-admm"]}"#).unwrap();
        assert_eq!(c.solvers.unwrap(), vec![Solver::Omp, Solver::GhtAdmm]);
    }
}

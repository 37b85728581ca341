//! One entry point over the two global solvers and the three patch-wise
//! baselines, all driven by a per-patch budget.

use std::fmt;
use std::str::FromStr;

use crate::baselines::{solve_patchwise, BaselineConfig, PatchBudget, PatchwiseAlgorithm};
use crate::dictionary::Dictionary;
use crate::error::{invalid, Error, Result};
use crate::ght::{self, GhtConfig, Method, SolveResult};
use crate::image::GrayImage;
use crate::patcher::{image_to_patch_matrix, patch_matrix_to_image, PatchMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Solver {
    #[serde(rename = "ght-qpm")]
    GhtQpm,
    #[serde(rename = "ght-admm")]
    GhtAdmm,
    #[serde(rename = "omp")]
    Omp,
    #[serde(rename = "aiht")]
    Aiht,
    #[serde(rename = "cosamp")]
    Cosamp,
}

impl Solver {
    pub const ALL: [Solver; 5] = [
        Solver::GhtQpm,
        Solver::GhtAdmm,
        Solver::Omp,
        Solver::Aiht,
        Solver::Cosamp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::GhtQpm => "ght-qpm",
            Self::GhtAdmm => "ght-admm",
            Self::Omp => "omp",
            Self::Aiht => "aiht",
            Self::Cosamp => "cosamp",
        }
    }

    /// True for the solvers that share one budget across all patches.
    pub fn is_global(self) -> bool {
        matches!(self, Self::GhtQpm | Self::GhtAdmm)
    }

    fn patchwise(self) -> Option<PatchwiseAlgorithm> {
        match self {
            Self::Omp => Some(PatchwiseAlgorithm::Omp),
            Self::Aiht => Some(PatchwiseAlgorithm::Aiht),
            Self::Cosamp => Some(PatchwiseAlgorithm::Cosamp),
            _ => None,
        }
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Solver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let wanted = s.trim().to_ascii_lowercase();
        Solver::ALL
            .into_iter()
            .find(|v| v.name() == wanted)
            .ok_or_else(|| invalid(format!("unknown solver {s:?}")))
    }
}

/// Knobs shared by every solver. The global budget field of `ght` is
/// ignored; it is derived from the per-patch budget at dispatch time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub ght: GhtConfig,
    pub baseline: BaselineConfig,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            ght: GhtConfig::new(0),
            baseline: BaselineConfig::default(),
        }
    }
}

/// Global budget `S = round(b·P)`.
pub fn global_budget(budget_per_patch: f64, n_patches: usize) -> Result<usize> {
    check_budget(budget_per_patch)?;
    Ok((budget_per_patch * n_patches as f64).round() as usize)
}

/// Per-column budget `s = round(b)`.
pub fn patch_budget(budget_per_patch: f64) -> Result<PatchBudget> {
    check_budget(budget_per_patch)?;
    PatchBudget::new(budget_per_patch.round() as usize)
}

fn check_budget(b: f64) -> Result<()> {
    if !(b.is_finite() && b >= 0.0) {
        return Err(invalid(format!(
            "budget per patch must be non-negative, got {b}"
        )));
    }
    Ok(())
}

pub fn run_solver(
    solver: Solver,
    d: &Dictionary,
    y: &PatchMatrix,
    budget_per_patch: f64,
    options: &SolverOptions,
) -> Result<SolveResult> {
    match solver.patchwise() {
        Some(algorithm) => {
            let s = patch_budget(budget_per_patch)?;
            solve_patchwise(algorithm, d, y, s, &options.baseline)
        }
        None => {
            let mut config = options.ght;
            config.global_budget = global_budget(budget_per_patch, y.n_cols())?;
            let method = if solver == Solver::GhtQpm {
                Method::Qpm
            } else {
                Method::Admm
            };
            ght::solve(d, y, &config, method)
        }
    }
}

/// Codes every non-overlapping `side × side` patch of `image` and renders
/// the reconstruction `D·Z` back into an image (unclamped).
pub fn represent_image(
    solver: Solver,
    d: &Dictionary,
    image: &GrayImage,
    budget_per_patch: f64,
    options: &SolverOptions,
) -> Result<(GrayImage, SolveResult)> {
    let side = (d.n_rows() as f64).sqrt().round() as usize;
    if side * side != d.n_rows() {
        return Err(invalid(format!(
            "dictionary rows ({}) are not a square patch size",
            d.n_rows()
        )));
    }
    let y = image_to_patch_matrix(image, side)?;
    let result = run_solver(solver, d, &y, budget_per_patch, options)?;
    let approx = d.matrix() * result.codes.matrix();
    let patches = match y.grid() {
        Some(grid) => PatchMatrix::with_grid(approx, grid)?,
        None => PatchMatrix::from_signals(approx)?,
    };
    let recon = patch_matrix_to_image(&patches, image.height(), image.width())?;
    Ok((recon, result))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for s in Solver::ALL {
            assert_eq!(s.name().parse::<Solver>().unwrap(), s);
            assert_eq!(s.to_string(), s.name());
        }
        assert_eq!(" GHT-ADMM ".parse::<Solver>().unwrap(), Solver::GhtAdmm);
        assert!("ista".parse::<Solver>().is_err());
    }

    #[test]
    fn budgets_round() {
        assert_eq!(global_budget(2.5, 3).unwrap(), 8);
        assert_eq!(patch_budget(2.5).unwrap().get(), 3);
        assert!(patch_budget(0.2).is_err());
        assert!(global_budget(-1.0, 3).is_err());
    }

    #[test]
    fn square_dct_full_budget_reproduces_image() {
        let d = crate::dictionary::build_overcomplete_dct(4, 4).unwrap();
        let im = GrayImage::from_fn(8, 12, |r, c| ((r * 31 + c * 17) % 256) as f64).unwrap();
        for solver in [Solver::GhtQpm, Solver::Omp] {
            let (recon, res) =
                represent_image(solver, &d, &im, 16.0, &SolverOptions::default()).unwrap();
            assert!(res.rmse < 1e-3, "{solver}: {}", res.rmse);
            let err = recon
                .pixels()
                .iter()
                .zip(im.pixels())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-2, "{solver}: {err}");
        }
    }

    #[test]
    fn dispatch_full_budget_identity() {
        let d = Dictionary::identity(4);
        let y = crate::dictionary::gaussian_matrix(4, 5, 1.0, 3).unwrap();
        let y = PatchMatrix::from_signals(y).unwrap();
        for solver in Solver::ALL {
            if solver == Solver::Cosamp {
                continue; // 2s > L
            }
            let res = run_solver(solver, &d, &y, 4.0, &SolverOptions::default()).unwrap();
            assert!(res.rmse < 1e-4, "{solver}: {}", res.rmse);
        }
    }
}

//! Joint sparse coding of image patches under a single global nonzero budget.
//!
//! The central problem is
//!
//! ```text
//! minimize ‖D·X − Y‖_F²   subject to   ‖X‖₀ ≤ S
//! ```
//!
//! where the columns of `Y` are vectorized image patches, `D` is a dictionary
//! with unit-norm atoms, and `S` bounds the number of nonzeros across *all*
//! patches at once. [`ght::ght_qpm`] (quadratic penalty splitting) and
//! [`ght::ght_admm`] (a multiplier-based heuristic) solve it with a cached
//! Cholesky factor and a linear-time global hard threshold per iteration.
//! The patch-wise baselines in [`baselines`] (OMP, AIHT, CoSaMP) split the
//! same budget evenly over the columns instead.

pub mod baselines;
pub mod dictionary;
mod error;
pub mod ght;
pub mod image;
pub mod kernels;
pub mod metrics;
pub mod patcher;
pub mod solver;
pub mod synth;

pub use baselines::{PatchBudget, PatchwiseAlgorithm};
pub use dictionary::Dictionary;
pub use error::{Error, Result};
pub use ght::{GhtConfig, SolveResult};
pub use image::GrayImage;
pub use kernels::{CholeskyFactor, CodeMatrix};
pub use patcher::{PatchGrid, PatchMatrix};
pub use solver::Solver;

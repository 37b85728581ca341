//! Numerical primitives shared by the solvers: global hard thresholding via
//! quickselect, ridge-shifted Gram assembly, and a dense Cholesky factor
//! with cached triangular solves.

mod cholesky;
mod select;

use std::collections::BTreeSet;

use nalgebra::DMatrix;

pub use cholesky::{cholesky_factor, solve_spd, CholeskyFactor};
pub use select::{global_hard_threshold, hard_threshold_into, select_kth_magnitude, Thresholder};

use crate::dictionary::Dictionary;
use crate::error::{invalid, Result};

/// An `L × P` coefficient matrix; column `p` codes patch `p`.
///
/// Storage is column-major, so the linear index of entry `(i, p)` is
/// `p·L + i`. That index is what the thresholding tie rule refers to.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeMatrix {
    data: DMatrix<f64>,
}

impl CodeMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(invalid("code matrix entries must be finite"));
        }
        Ok(Self { data })
    }

    pub fn zeros(n_atoms: usize, n_cols: usize) -> Self {
        Self {
            data: DMatrix::zeros(n_atoms, n_cols),
        }
    }

    pub(crate) fn from_matrix_unchecked(data: DMatrix<f64>) -> Self {
        Self { data }
    }

    pub fn n_atoms(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    /// Column-major view of all entries.
    pub fn as_slice(&self) -> &[f64] {
        self.data.as_slice()
    }

    pub fn column(&self, p: usize) -> &[f64] {
        let l = self.n_atoms();
        &self.data.as_slice()[p * l..(p + 1) * l]
    }

    /// Total number of nonzero entries, `‖X‖₀`.
    pub fn nnz(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0.0).count()
    }

    pub fn column_nnz(&self, p: usize) -> usize {
        self.column(p).iter().filter(|&&v| v != 0.0).count()
    }

    /// Positions `(row, column)` of the nonzero entries.
    pub fn support(&self) -> BTreeSet<(usize, usize)> {
        let l = self.n_atoms();
        self.as_slice()
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(k, _)| (k % l, k / l))
            .collect()
    }
}

/// `DᵀD + ρI`, symmetric positive definite for any `ρ > 0`.
pub fn gram_plus_ridge(d: &Dictionary, rho: f64) -> Result<DMatrix<f64>> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(invalid(format!("rho must be positive, got {rho}")));
    }
    let mut gram = d.matrix().tr_mul(d.matrix());
    // symmetrize exactly; the product is symmetric only up to rounding
    let l = gram.nrows();
    for j in 0..l {
        for i in j + 1..l {
            let v = 0.5 * (gram[(i, j)] + gram[(j, i)]);
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
        gram[(j, j)] += rho;
    }
    Ok(gram)
}

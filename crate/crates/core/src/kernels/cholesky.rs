use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{invalid, mismatch, Error, Result};

/// Columns handed to one worker during a multi-column solve.
const COLUMNS_PER_TASK: usize = 64;

/// Lower-triangular `C` with `C·Cᵀ = A`, stored twice (row-major `C` and
/// row-major `Cᵀ`) so both substitution sweeps read contiguous memory.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    n: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

/// Dense unpivoted Cholesky factorization of a symmetric positive definite
/// matrix. Only the lower triangle of `a` is read.
pub fn cholesky_factor(a: &DMatrix<f64>) -> Result<CholeskyFactor> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(invalid(format!(
            "Cholesky needs a non-empty square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let mut lower = vec![0.0; n * n];
    for j in 0..n {
        for i in j..n {
            let s = a[(i, j)] - dot(&lower[i * n..i * n + j], &lower[j * n..j * n + j]);
            if i == j {
                if !(s > 0.0 && s.is_finite()) {
                    return Err(Error::NumericFailure(format!(
                        "non-positive pivot {s:e} at row {j}; matrix is not positive definite"
                    )));
                }
                lower[j * n + j] = s.sqrt();
            } else {
                lower[i * n + j] = s / lower[j * n + j];
            }
        }
    }
    let mut upper = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            upper[j * n + i] = lower[i * n + j];
        }
    }
    Ok(CholeskyFactor { n, lower, upper })
}

/// Solves `(C·Cᵀ)·X = b` for every column of `b`.
pub fn solve_spd(factor: &CholeskyFactor, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if b.nrows() != factor.n {
        return Err(invalid(format!(
            "right-hand side has {} rows, factor is {}x{}",
            b.nrows(),
            factor.n,
            factor.n
        )));
    }
    let mut x = b.clone();
    factor.solve_in_place(x.as_mut_slice())?;
    Ok(x)
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// `C` as a matrix.
    pub fn lower(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.lower)
    }

    /// `C·Cᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let c = self.lower();
        &c * c.transpose()
    }

    /// Overwrites a column-major block of right-hand sides (length a multiple
    /// of the dimension) with the solutions: a forward sweep with `C`, then a
    /// backward sweep with `Cᵀ`. Columns are independent and solved in
    /// parallel.
    pub fn solve_in_place(&self, columns: &mut [f64]) -> Result<()> {
        let n = self.n;
        if !columns.len().is_multiple_of(n) {
            return Err(mismatch(format!(
                "buffer of {} values is not a whole number of length-{n} columns",
                columns.len()
            )));
        }
        columns
            .par_chunks_mut(n * COLUMNS_PER_TASK)
            .for_each(|block| {
                for col in block.chunks_exact_mut(n) {
                    self.forward(col);
                    self.backward(col);
                }
            });
        Ok(())
    }

    fn forward(&self, y: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.lower[i * n..i * n + i];
            y[i] = (y[i] - dot(row, &y[..i])) / self.lower[i * n + i];
        }
    }

    fn backward(&self, x: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let row = &self.upper[i * n + i + 1..(i + 1) * n];
            x[i] = (x[i] - dot(row, &x[i + 1..])) / self.upper[i * n + i];
        }
    }
}

/// Inner product with four independent accumulators, which lets the
/// compiler vectorize the loop.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    let mut acc = [0.0; 4];
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_factor() {
        let f = cholesky_factor(&DMatrix::identity(5, 5)).unwrap();
        assert_eq!(f.lower(), DMatrix::identity(5, 5));
        let b = DMatrix::from_fn(5, 3, |i, j| (i * 3 + j) as f64);
        assert_eq!(solve_spd(&f, &b).unwrap(), b);
    }

    #[test]
    fn hand_computed_two_by_two() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 3.0]);
        let c = cholesky_factor(&a).unwrap().lower();
        let expected = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 2f64.sqrt()]);
        assert!((c - expected).abs().max() < 1e-15);
    }

    #[test]
    fn scaled_identity_halves() {
        let f = cholesky_factor(&(DMatrix::identity(4, 4) * 2.0)).unwrap();
        let b = DMatrix::from_fn(4, 7, |i, j| i as f64 - 2.5 * j as f64);
        let x = solve_spd(&f, &b).unwrap();
        // two divisions by √2 per entry, so only a few ulps of error
        assert!((x - b / 2.0).abs().max() < 1e-13);
    }

    #[test]
    fn rejects_indefinite_and_non_square() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(cholesky_factor(&a), Err(Error::NumericFailure(_))));
        assert!(matches!(
            cholesky_factor(&DMatrix::zeros(2, 3)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn solve_rejects_wrong_rows() {
        let f = cholesky_factor(&DMatrix::identity(3, 3)).unwrap();
        assert!(solve_spd(&f, &DMatrix::zeros(4, 2)).is_err());
        assert!(f.solve_in_place(&mut [0.0; 5]).is_err());
    }

    #[test]
    fn dot_handles_remainders() {
        let a: Vec<f64> = (0..11).map(f64::from).collect();
        let expected: f64 = a.iter().map(|v| v * v).sum();
        for n in 0..=11 {
            let e: f64 = a[..n].iter().map(|v| v * v).sum();
            assert_eq!(dot(&a[..n], &a[..n]), e);
        }
        assert_eq!(dot(&a, &a), expected);
    }
}

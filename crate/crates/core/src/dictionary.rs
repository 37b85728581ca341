//! Dictionaries with unit-norm atoms: overcomplete 2-D DCT frames for image
//! patches and seeded Gaussian random matrices for synthetic recovery.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Error, Result};

const UNIT_NORM_TOL: f64 = 1e-10;

/// An `N × L` matrix whose columns (atoms) have unit Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: DMatrix<f64>,
}

impl Dictionary {
    /// Wraps a matrix whose columns are already unit-norm.
    pub fn new(atoms: DMatrix<f64>) -> Result<Self> {
        check_shape(&atoms)?;
        for (j, col) in atoms.column_iter().enumerate() {
            let norm = col.norm();
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(invalid(format!("atom {j} has norm {norm}, expected 1")));
            }
        }
        Ok(Self { atoms })
    }

    /// Scales every column of `atoms` to unit norm.
    pub fn normalized(mut atoms: DMatrix<f64>) -> Result<Self> {
        check_shape(&atoms)?;
        for (j, mut col) in atoms.column_iter_mut().enumerate() {
            let norm = col.norm();
            if norm == 0.0 || !norm.is_finite() {
                return Err(Error::NumericFailure(format!(
                    "atom {j} cannot be normalized (norm {norm})"
                )));
            }
            col /= norm;
        }
        Ok(Self { atoms })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            atoms: DMatrix::identity(n, n),
        }
    }

    /// Signal dimension `N`.
    pub fn n_rows(&self) -> usize {
        self.atoms.nrows()
    }

    /// Number of atoms `L`.
    pub fn n_atoms(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.atoms
    }

    pub fn atom(&self, j: usize) -> &[f64] {
        let n = self.n_rows();
        &self.atoms.as_slice()[j * n..(j + 1) * n]
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.atoms
    }

    /// Writes the dictionary as CSV: a header line `N,L` followed by `N`
    /// rows of `L` comma-separated values (row-major). Values use Rust's
    /// shortest round-trip float formatting, so a read-back is bit-exact.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{},{}", self.n_rows(), self.n_atoms())?;
        let mut line = String::new();
        for i in 0..self.n_rows() {
            line.clear();
            for j in 0..self.n_atoms() {
                if j > 0 {
                    line.push(',');
                }
                line.push_str(&self.atoms[(i, j)].to_string());
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Reads the format produced by [`Dictionary::write_csv`].
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let fmt_err = |message: String| Error::Format {
            format: "dictionary csv",
            message,
        };
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| fmt_err("empty input".into()))??;
        let dims: Vec<usize> = header
            .split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| fmt_err(format!("bad header {header:?}: {e}")))?;
        let [n, l] = dims[..] else {
            return Err(fmt_err(format!("header must be `N,L`, got {header:?}")));
        };
        let mut atoms = DMatrix::zeros(n, l);
        for i in 0..n {
            let line = lines
                .next()
                .ok_or_else(|| fmt_err(format!("missing row {i}")))??;
            let mut count = 0;
            for (j, tok) in line.split(',').enumerate() {
                if j >= l {
                    return Err(fmt_err(format!("row {i} has more than {l} values")));
                }
                atoms[(i, j)] = tok
                    .trim()
                    .parse()
                    .map_err(|e| fmt_err(format!("row {i} col {j}: {e}")))?;
                count += 1;
            }
            if count != l {
                return Err(fmt_err(format!("row {i} has {count} values, expected {l}")));
            }
        }
        Dictionary::new(atoms)
    }
}

fn check_shape(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(invalid(
            "dictionary must have at least one row and one atom",
        ));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(invalid("dictionary entries must be finite"));
    }
    Ok(())
}

/// 1-D `n × m` cosine frame sampled on the DCT-II grid, with the mean
/// removed from every non-constant column.
fn dct_frame(n: usize, m: usize) -> DMatrix<f64> {
    let mut frame = DMatrix::from_fn(n, m, |i, j| {
        (PI * (2 * i + 1) as f64 * j as f64 / (2 * m) as f64).cos()
    });
    for mut col in frame.column_iter_mut().skip(1) {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    frame
}

/// Separable overcomplete DCT dictionary for `n × n` patches with `m` cosine
/// frequencies per axis, i.e. an `n² × m²` matrix.
///
/// Atom `(a, b)` sits in column `a·m + b` and is the outer product of 1-D
/// frame columns `a` and `b`; its vectorization matches the column-major
/// patch layout used by [`crate::patcher`]. With `m == n` this is the
/// orthonormal 2-D DCT-II basis.
pub fn build_overcomplete_dct(patch_side: usize, atoms_per_dim: usize) -> Result<Dictionary> {
    if patch_side == 0 {
        return Err(invalid("patch side must be at least 1"));
    }
    if atoms_per_dim < patch_side {
        return Err(invalid(format!(
            "atoms per dimension ({atoms_per_dim}) must be at least the patch side ({patch_side})"
        )));
    }
    let frame = dct_frame(patch_side, atoms_per_dim);
    Dictionary::normalized(frame.kronecker(&frame))
}

/// Gaussian random dictionary: i.i.d. `N(0, std_dev²)` entries, then every
/// column scaled to unit norm. Identical arguments give identical matrices.
pub fn build_gaussian_dictionary(
    n_rows: usize,
    n_atoms: usize,
    std_dev: f64,
    seed: u64,
) -> Result<Dictionary> {
    Dictionary::normalized(gaussian_matrix(n_rows, n_atoms, std_dev, seed)?)
}

/// The raw draw behind [`build_gaussian_dictionary`], before normalization.
pub fn gaussian_matrix(
    n_rows: usize,
    n_cols: usize,
    std_dev: f64,
    seed: u64,
) -> Result<DMatrix<f64>> {
    if !(std_dev > 0.0 && std_dev.is_finite()) {
        return Err(invalid(format!("std_dev must be positive, got {std_dev}")));
    }
    if n_rows == 0 || n_cols == 0 {
        return Err(invalid(
            "dictionary must have at least one row and one atom",
        ));
    }
    let normal = Normal::new(0.0, std_dev).map_err(|e| invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(DMatrix::from_iterator(
        n_rows,
        n_cols,
        (0..n_rows * n_cols).map(|_| normal.sample(&mut rng)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn assert_unit_columns(d: &Dictionary) {
        for col in d.matrix().column_iter() {
            assert_abs_diff_eq!(col.norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn dct_shapes() {
        let d = build_overcomplete_dct(8, 10).unwrap();
        assert_eq!((d.n_rows(), d.n_atoms()), (64, 100));
        assert_unit_columns(&d);
    }

    #[test]
    fn square_dct_is_orthonormal() {
        for n in [2, 4, 8] {
            let d = build_overcomplete_dct(n, n).unwrap();
            let gram = d.matrix().tr_mul(d.matrix());
            let err = (gram - DMatrix::identity(n * n, n * n)).abs().max();
            assert!(err < 1e-10, "n={n}: max deviation {err}");
        }
    }

    #[test]
    fn two_point_dct_first_atom_is_constant() {
        let d = build_overcomplete_dct(2, 2).unwrap();
        assert_eq!((d.n_rows(), d.n_atoms()), (4, 4));
        for &v in d.atom(0) {
            assert_abs_diff_eq!(v, 0.5, epsilon = 1e-15);
        }
        // Hand-computed 2-point DCT-II: second frame column is [1, -1]/√2.
        let expected = [0.5, -0.5, 0.5, -0.5];
        for (&v, &e) in d.atom(1).iter().zip(&expected) {
            assert_abs_diff_eq!(v, e, epsilon = 1e-15);
        }
    }

    #[test]
    fn dct_rejects_undercomplete() {
        assert!(matches!(
            build_overcomplete_dct(8, 7),
            Err(Error::InvalidArgument(_))
        ));
        assert!(build_overcomplete_dct(0, 3).is_err());
    }

    #[test]
    fn gaussian_is_seeded_and_normalized() {
        let a = build_gaussian_dictionary(100, 200, 0.1, 7).unwrap();
        let b = build_gaussian_dictionary(100, 200, 0.1, 7).unwrap();
        let c = build_gaussian_dictionary(100, 200, 0.1, 8).unwrap();
        assert_eq!((a.n_rows(), a.n_atoms()), (100, 200));
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_unit_columns(&a);
    }

    #[test]
    fn gaussian_sample_std_matches() {
        let raw = gaussian_matrix(1000, 1, 0.1, 3).unwrap();
        let mean = raw.mean();
        let var = raw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (raw.len() - 1) as f64;
        let sd = var.sqrt();
        assert!((0.09..=0.11).contains(&sd), "sample std {sd}");
    }

    #[test]
    fn gaussian_rejects_bad_std() {
        assert!(build_gaussian_dictionary(4, 4, 0.0, 1).is_err());
        assert!(build_gaussian_dictionary(4, 4, -1.0, 1).is_err());
    }

    #[test]
    fn new_rejects_non_unit_columns() {
        let m = DMatrix::from_element(3, 2, 1.0);
        assert!(Dictionary::new(m.clone()).is_err());
        assert!(Dictionary::normalized(m).is_ok());
        assert!(Dictionary::normalized(DMatrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let d = build_overcomplete_dct(4, 5).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"16,25\n"));
        let back = Dictionary::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn csv_rejects_short_rows() {
        let err = Dictionary::read_csv("2,2\n1,0\n0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Format { .. }), "{err}");
    }
}

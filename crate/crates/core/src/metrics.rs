//! Evaluation quantities: representation RMSE, PSNR, and support mismatch.

use std::collections::BTreeSet;

use crate::dictionary::Dictionary;
use crate::error::{invalid, mismatch, Result};
use crate::image::GrayImage;
use crate::kernels::CodeMatrix;
use crate::patcher::PatchMatrix;

/// Peak value used for 8-bit images.
pub const PEAK_8BIT: f64 = 255.0;

/// `sqrt(‖D·Z − Y‖_F² / P)`: error per patch column, not per pixel.
pub fn rmse(d: &Dictionary, z: &CodeMatrix, y: &PatchMatrix) -> Result<f64> {
    check_shapes(d, z, y)?;
    let residual = d.matrix() * z.matrix() - y.matrix();
    Ok((residual.norm_squared() / y.n_cols() as f64).sqrt())
}

pub(crate) fn check_shapes(d: &Dictionary, z: &CodeMatrix, y: &PatchMatrix) -> Result<()> {
    if d.n_rows() != y.n_rows() || d.n_atoms() != z.n_atoms() || z.n_cols() != y.n_cols() {
        return Err(mismatch(format!(
            "D is {}x{}, Z is {}x{}, Y is {}x{}",
            d.n_rows(),
            d.n_atoms(),
            z.n_atoms(),
            z.n_cols(),
            y.n_rows(),
            y.n_cols()
        )));
    }
    if y.n_cols() == 0 {
        return Err(invalid("no signals"));
    }
    Ok(())
}

/// Mean squared pixel difference.
pub fn mse(reference: &GrayImage, test: &GrayImage) -> Result<f64> {
    if reference.height() != test.height() || reference.width() != test.width() {
        return Err(mismatch(format!(
            "{}x{} reference vs {}x{} test image",
            reference.height(),
            reference.width(),
            test.height(),
            test.width()
        )));
    }
    let sum: f64 = reference
        .pixels()
        .iter()
        .zip(test.pixels())
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    Ok(sum / reference.pixels().len() as f64)
}

/// Peak signal-to-noise ratio in dB; `f64::INFINITY` for identical images.
pub fn psnr(reference: &GrayImage, test: &GrayImage, peak: f64) -> Result<f64> {
    if peak.is_nan() || peak <= 0.0 {
        return Err(invalid(format!("peak must be positive, got {peak}")));
    }
    let err = mse(reference, test)?;
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / err).log10())
}

/// Positions `(row, column)` of the nonzero entries of a matrix.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SupportSet {
    indices: BTreeSet<(usize, usize)>,
}

impl SupportSet {
    /// Builds a support from explicit positions, all of which must fall
    /// inside a `rows × cols` matrix.
    pub fn new(
        indices: impl IntoIterator<Item = (usize, usize)>,
        rows: usize,
        cols: usize,
    ) -> Result<Self> {
        let indices: BTreeSet<_> = indices.into_iter().collect();
        if let Some(&(r, c)) = indices.iter().find(|&&(r, c)| r >= rows || c >= cols) {
            return Err(invalid(format!(
                "position ({r}, {c}) outside {rows}x{cols}"
            )));
        }
        Ok(Self { indices })
    }

    pub fn of(codes: &CodeMatrix) -> Self {
        Self {
            indices: codes.support(),
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn intersection_len(&self, other: &SupportSet) -> usize {
        self.indices.intersection(&other.indices).count()
    }
}

/// `(max{|A|,|B|} − |A∩B|) / max{|A|,|B|}`, with two empty supports
/// counting as a perfect match.
pub fn support_mismatch_ratio(truth: &SupportSet, recovered: &SupportSet) -> f64 {
    let largest = truth.len().max(recovered.len());
    if largest == 0 {
        return 0.0;
    }
    (largest - truth.intersection_len(recovered)) as f64 / largest as f64
}

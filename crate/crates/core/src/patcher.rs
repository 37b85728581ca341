//! Non-overlapping square patches: image ⇄ `N × P` patch matrix, and the
//! per-patch atom-count heatmap.
//!
//! Patches are numbered row-major over the patch grid; within a patch,
//! pixels are stacked column by column (pixel `(r, c)` of a patch of side
//! `n` lands in row `c·n + r`).

use nalgebra::DMatrix;

use crate::error::{invalid, mismatch, Result};
use crate::image::GrayImage;
use crate::kernels::CodeMatrix;

/// Layout of a patch matrix over its source image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct PatchGrid {
    pub patch_side: usize,
    pub grid_rows: usize,
    pub grid_cols: usize,
}

impl PatchGrid {
    pub fn n_patches(&self) -> usize {
        self.grid_rows * self.grid_cols
    }

    pub fn patch_len(&self) -> usize {
        self.patch_side * self.patch_side
    }

    pub fn image_height(&self) -> usize {
        self.grid_rows * self.patch_side
    }

    pub fn image_width(&self) -> usize {
        self.grid_cols * self.patch_side
    }
}

/// Signals stacked as columns (`N × P`), optionally tied to an image grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchMatrix {
    data: DMatrix<f64>,
    grid: Option<PatchGrid>,
}

impl PatchMatrix {
    /// Columns that do not come from an image (synthetic signals).
    pub fn from_signals(data: DMatrix<f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(invalid("signal entries must be finite"));
        }
        Ok(Self { data, grid: None })
    }

    pub fn with_grid(data: DMatrix<f64>, grid: PatchGrid) -> Result<Self> {
        if data.nrows() != grid.patch_len() || data.ncols() != grid.n_patches() {
            return Err(mismatch(format!(
                "{}x{} matrix does not fit a {}x{} grid of {}x{} patches",
                data.nrows(),
                data.ncols(),
                grid.grid_rows,
                grid.grid_cols,
                grid.patch_side,
                grid.patch_side
            )));
        }
        let mut m = Self::from_signals(data)?;
        m.grid = Some(grid);
        Ok(m)
    }

    pub fn n_rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn grid(&self) -> Option<PatchGrid> {
        self.grid
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn column(&self, p: usize) -> &[f64] {
        let n = self.n_rows();
        &self.data.as_slice()[p * n..(p + 1) * n]
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }
}

/// Cuts `image` into non-overlapping `patch_side × patch_side` blocks.
/// Both image dimensions must be multiples of `patch_side`.
pub fn image_to_patch_matrix(image: &GrayImage, patch_side: usize) -> Result<PatchMatrix> {
    if patch_side == 0 {
        return Err(invalid("patch side must be at least 1"));
    }
    for (axis, len) in [("height", image.height()), ("width", image.width())] {
        if len % patch_side != 0 {
            return Err(mismatch(format!(
                "image {axis} {len} is not a multiple of the patch side {patch_side}"
            )));
        }
    }
    let grid = PatchGrid {
        patch_side,
        grid_rows: image.height() / patch_side,
        grid_cols: image.width() / patch_side,
    };
    let n = patch_side;
    let mut data = DMatrix::zeros(grid.patch_len(), grid.n_patches());
    for (p, mut col) in data.column_iter_mut().enumerate() {
        let (top, left) = ((p / grid.grid_cols) * n, (p % grid.grid_cols) * n);
        for c in 0..n {
            for r in 0..n {
                col[c * n + r] = image.get(top + r, left + c);
            }
        }
    }
    PatchMatrix::with_grid(data, grid)
}

/// Inverse of [`image_to_patch_matrix`] for a `height × width` image.
pub fn patch_matrix_to_image(
    patches: &PatchMatrix,
    height: usize,
    width: usize,
) -> Result<GrayImage> {
    let grid = match patches.grid() {
        Some(g) => g,
        None => infer_grid(patches.n_rows(), patches.n_cols(), height, width)?,
    };
    if grid.image_height() != height || grid.image_width() != width {
        return Err(mismatch(format!(
            "patch grid covers {}x{} pixels, requested {height}x{width}",
            grid.image_height(),
            grid.image_width()
        )));
    }
    render_patches(patches.matrix(), grid)
}

fn infer_grid(n_rows: usize, n_cols: usize, height: usize, width: usize) -> Result<PatchGrid> {
    let side = (n_rows as f64).sqrt().round() as usize;
    if side == 0
        || side * side != n_rows
        || !height.is_multiple_of(side)
        || !width.is_multiple_of(side)
    {
        return Err(mismatch(format!(
            "{n_rows}-row patches cannot tile a {height}x{width} image"
        )));
    }
    let grid = PatchGrid {
        patch_side: side,
        grid_rows: height / side,
        grid_cols: width / side,
    };
    if grid.n_patches() != n_cols {
        return Err(mismatch(format!(
            "{n_cols} patches cannot tile a {height}x{width} image with side {side}"
        )));
    }
    Ok(grid)
}

/// Places every column of `data` back into its block of the image.
pub(crate) fn render_patches(data: &DMatrix<f64>, grid: PatchGrid) -> Result<GrayImage> {
    let n = grid.patch_side;
    if data.nrows() != grid.patch_len() || data.ncols() != grid.n_patches() {
        return Err(mismatch(format!(
            "{}x{} matrix does not match the patch grid",
            data.nrows(),
            data.ncols()
        )));
    }
    let mut image = GrayImage::zeros(grid.image_height(), grid.image_width())?;
    for (p, col) in data.column_iter().enumerate() {
        let (top, left) = ((p / grid.grid_cols) * n, (p % grid.grid_cols) * n);
        for c in 0..n {
            for r in 0..n {
                image.set(top + r, left + c, col[c * n + r]);
            }
        }
    }
    Ok(image)
}

/// Heatmap of `‖x_p‖₀` per patch, each patch block filled with its count
/// rescaled linearly so the smallest observed count maps to 0 and the
/// largest to 255. A constant count renders as all zeros.
pub fn atom_count_heatmap(codes: &CodeMatrix, grid: PatchGrid) -> Result<GrayImage> {
    if codes.n_cols() != grid.n_patches() {
        return Err(mismatch(format!(
            "{} code columns for a grid of {} patches",
            codes.n_cols(),
            grid.n_patches()
        )));
    }
    let counts: Vec<usize> = (0..codes.n_cols()).map(|p| codes.column_nnz(p)).collect();
    let lo = counts.iter().copied().min().unwrap_or(0);
    let hi = counts.iter().copied().max().unwrap_or(0);
    let span = (hi - lo) as f64;
    let n = grid.patch_side;
    GrayImage::from_fn(grid.image_height(), grid.image_width(), |r, c| {
        let p = (r / n) * grid.grid_cols + c / n;
        if span == 0.0 {
            0.0
        } else {
            255.0 * (counts[p] - lo) as f64 / span
        }
    })
}

use crate::error::{invalid, Result};

use super::CodeMatrix;

/// Below this length a range is sorted outright instead of partitioned.
const SORT_CUTOFF: usize = 64;

/// The `k`-th largest absolute value in `values` (1-based), in expected
/// linear time.
pub fn select_kth_magnitude(values: &[f64], k: usize) -> Result<f64> {
    if k == 0 || k > values.len() {
        return Err(invalid(format!(
            "k = {k} outside 1..={} for selection",
            values.len()
        )));
    }
    let mut scratch: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    Ok(kth_largest(&mut scratch, k))
}

/// Quickselect with median-of-three pivots and a three-way partition, so
/// long runs of equal magnitudes (zeros, mostly) cannot degrade it.
/// Reorders `buf`. Requires `1 ≤ k ≤ buf.len()`.
fn kth_largest(buf: &mut [f64], k: usize) -> f64 {
    let target = k - 1;
    let (mut lo, mut hi) = (0, buf.len());
    loop {
        let len = hi - lo;
        if len <= SORT_CUTOFF {
            buf[lo..hi].sort_unstable_by(|a, b| b.total_cmp(a));
            return buf[target];
        }
        let pivot = median_of_three(buf[lo], buf[lo + len / 2], buf[hi - 1]);
        // [lo, gt) > pivot, [gt, i) == pivot, [lt, hi) < pivot
        let (mut gt, mut i, mut lt) = (lo, lo, hi);
        while i < lt {
            let v = buf[i];
            if v > pivot {
                buf.swap(gt, i);
                gt += 1;
                i += 1;
            } else if v < pivot {
                lt -= 1;
                buf.swap(i, lt);
            } else {
                i += 1;
            }
        }
        if target < gt {
            hi = gt;
        } else if target < lt {
            return pivot;
        } else {
            lo = lt;
        }
    }
}

fn median_of_three(a: f64, b: f64, c: f64) -> f64 {
    if (a <= b) == (b <= c) {
        b
    } else if (b <= a) == (a <= c) {
        a
    } else {
        c
    }
}

/// Hard thresholding `H_S` with a reusable magnitude buffer.
///
/// Keeps the `budget` largest-magnitude entries of `src` and zeroes the
/// rest. When several entries tie at the cut-off magnitude, the ones with
/// the smallest linear index win.
#[derive(Debug, Default)]
pub struct Thresholder {
    scratch: Vec<f64>,
}

impl Thresholder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Writes `H_budget(src)` into `out`. Panics if the lengths differ.
    pub fn apply(&mut self, src: &[f64], budget: usize, out: &mut [f64]) {
        assert_eq!(src.len(), out.len(), "threshold input/output length");
        if budget == 0 {
            out.fill(0.0);
            return;
        }
        if budget >= src.len() {
            out.copy_from_slice(src);
            return;
        }
        self.scratch.clear();
        self.scratch.extend(src.iter().map(|v| v.abs()));
        let cut = kth_largest(&mut self.scratch, budget);

        let above = src.iter().filter(|v| v.abs() > cut).count();
        let mut ties_left = budget - above;
        for (o, &v) in out.iter_mut().zip(src) {
            let m = v.abs();
            *o = if m > cut {
                v
            } else if m == cut && ties_left > 0 {
                ties_left -= 1;
                v
            } else {
                0.0
            };
        }
    }
}

/// One-shot form of [`Thresholder::apply`].
pub fn hard_threshold_into(src: &[f64], budget: usize, out: &mut [f64]) {
    Thresholder::new().apply(src, budget, out);
}

/// `H_S(x)` over the whole code matrix: the `S` largest magnitudes across
/// all columns survive, regardless of which column they sit in.
pub fn global_hard_threshold(x: &CodeMatrix, budget: usize) -> Result<CodeMatrix> {
    let total = x.n_atoms() * x.n_cols();
    if budget > total {
        return Err(invalid(format!(
            "budget {budget} exceeds the {total} entries of a {}x{} code matrix",
            x.n_atoms(),
            x.n_cols()
        )));
    }
    let mut out = x.matrix().clone();
    hard_threshold_into(x.as_slice(), budget, out.as_mut_slice());
    Ok(CodeMatrix::from_matrix_unchecked(out))
}

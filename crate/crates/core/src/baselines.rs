//! Patch-wise competitors: every column is coded on its own with the same
//! per-patch budget `s`.
//!
//! * OMP adds the atom most correlated with the residual, then refits by
//!   least squares on the active set.
//! * AIHT takes normalized projected-gradient steps `x ← H_s(x + α·Dᵀ(y − Dx))`
//!   with the step chosen by exact line search on the current support and
//!   halved whenever the projected step fails to reduce the residual.
//! * CoSaMP merges the `2s` strongest correlations into the support, refits,
//!   and prunes back to `s` atoms.
//!
//! Least-squares refits go through the Cholesky kernel on the active Gram
//! matrix with a `1e-12` ridge.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dictionary::Dictionary;
use crate::error::{invalid, mismatch, Error, Result};
use crate::ght::SolveResult;
use crate::kernels::{cholesky_factor, hard_threshold_into, CodeMatrix};
use crate::metrics;
use crate::patcher::PatchMatrix;

const REFIT_RIDGE: f64 = 1e-12;
/// Relative residual change below which AIHT and CoSaMP stop.
const STAGNATION: f64 = 1e-6;
const MAX_HALVINGS: usize = 30;
pub const DEFAULT_MAX_ITERS: usize = 100;

/// Nonzeros allowed in each column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchBudget(usize);

impl PatchBudget {
    pub fn new(s: usize) -> Result<Self> {
        if s == 0 {
            return Err(invalid("per-patch budget must be at least 1"));
        }
        Ok(Self(s))
    }

    pub fn get(self) -> usize {
        self.0
    }

    fn check(self, d: &Dictionary) -> Result<()> {
        let cap = d.n_rows().min(d.n_atoms());
        if self.0 > cap {
            return Err(invalid(format!(
                "per-patch budget {} exceeds min(N, L) = {cap}",
                self.0
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatchwiseAlgorithm {
    Omp,
    Aiht,
    Cosamp,
}

impl PatchwiseAlgorithm {
    pub fn name(self) -> &'static str {
        match self {
            Self::Omp => "omp",
            Self::Aiht => "aiht",
            Self::Cosamp => "cosamp",
        }
    }
}

impl fmt::Display for PatchwiseAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PatchwiseAlgorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "omp" => Ok(Self::Omp),
            "aiht" => Ok(Self::Aiht),
            "cosamp" => Ok(Self::Cosamp),
            other => Err(invalid(format!("unknown patch-wise algorithm {other:?}"))),
        }
    }
}

fn check_signal(d: &Dictionary, y: &[f64]) -> Result<()> {
    if y.len() != d.n_rows() {
        return Err(mismatch(format!(
            "signal of length {} for a dictionary with {} rows",
            y.len(),
            d.n_rows()
        )));
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `Dᵀv`.
fn correlate(d: &Dictionary, v: &[f64]) -> Vec<f64> {
    (0..d.n_atoms()).map(|j| dot(d.atom(j), v)).collect()
}

/// `y − D·x`, touching only the nonzero coefficients.
fn residual(d: &Dictionary, y: &[f64], x: &[f64]) -> Vec<f64> {
    let mut r = y.to_vec();
    for (j, &c) in x.iter().enumerate() {
        if c != 0.0 {
            for (ri, &a) in r.iter_mut().zip(d.atom(j)) {
                *ri -= c * a;
            }
        }
    }
    r
}

/// `‖D·x‖²`.
fn image_energy(d: &Dictionary, x: &[f64]) -> f64 {
    let zero = vec![0.0; d.n_rows()];
    let r = residual(d, &zero, x);
    dot(&r, &r)
}

/// Least-squares coefficients of `y` over the atoms in `support`.
fn least_squares(d: &Dictionary, support: &[usize], y: &[f64]) -> Result<Vec<f64>> {
    let k = support.len();
    let mut gram = DMatrix::zeros(k, k);
    let mut rhs = DMatrix::zeros(k, 1);
    for (a, &i) in support.iter().enumerate() {
        for (b, &j) in support.iter().enumerate().take(a + 1) {
            let g = dot(d.atom(i), d.atom(j));
            gram[(a, b)] = g;
            gram[(b, a)] = g;
        }
        gram[(a, a)] += REFIT_RIDGE;
        rhs[(a, 0)] = dot(d.atom(i), y);
    }
    let factor = cholesky_factor(&gram).map_err(|e| match e {
        Error::NumericFailure(msg) => {
            Error::NumericFailure(format!("rank-deficient active set {support:?}: {msg}"))
        }
        other => other,
    })?;
    let mut sol = rhs.as_slice().to_vec();
    factor.solve_in_place(&mut sol)?;
    Ok(sol)
}

/// Indices of the `k` largest magnitudes, ties to the smaller index,
/// returned in ascending index order.
fn top_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut kept = vec![0.0; values.len()];
    hard_threshold_into(values, k, &mut kept);
    let mut idx: Vec<usize> = (0..values.len()).filter(|&j| kept[j] != 0.0).collect();
    if idx.len() < k.min(values.len()) {
        // zeros among the winners; fill from the lowest unused indices
        for j in 0..values.len() {
            if idx.len() == k {
                break;
            }
            if kept[j] == 0.0 && values[j].abs() == 0.0 && !idx.contains(&j) {
                idx.push(j);
            }
        }
        idx.sort_unstable();
    }
    idx
}

/// Greedy state of one OMP run, exposed so callers can inspect every step.
pub struct OmpState<'a> {
    d: &'a Dictionary,
    y: &'a [f64],
    active: Vec<usize>,
    coefficients: Vec<f64>,
    residual: Vec<f64>,
    y_norm: f64,
}

impl<'a> OmpState<'a> {
    pub fn new(d: &'a Dictionary, y: &'a [f64]) -> Result<Self> {
        check_signal(d, y)?;
        Ok(Self {
            d,
            y,
            active: Vec::new(),
            coefficients: Vec::new(),
            residual: y.to_vec(),
            y_norm: norm(y),
        })
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    /// Coefficients of the active atoms, in selection order.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn residual(&self) -> &[f64] {
        &self.residual
    }

    /// Adds one atom and refits. Returns `false` without changing anything
    /// once the residual has no correlation left with any unused atom.
    pub fn step(&mut self) -> Result<bool> {
        let floor = 1e-12 * self.y_norm.max(f64::MIN_POSITIVE);
        if norm(&self.residual) <= floor {
            return Ok(false);
        }
        let corr = correlate(self.d, &self.residual);
        let mut best: Option<(usize, f64)> = None;
        for (j, &c) in corr.iter().enumerate() {
            if self.active.contains(&j) {
                continue;
            }
            if best.is_none_or(|(_, b)| c.abs() > b) {
                best = Some((j, c.abs()));
            }
        }
        let Some((j, strength)) = best else {
            return Ok(false);
        };
        if strength <= floor {
            return Ok(false);
        }
        self.active.push(j);
        self.coefficients = least_squares(self.d, &self.active, self.y)?;
        let x = self.dense();
        self.residual = residual(self.d, self.y, x.as_slice());
        Ok(true)
    }

    pub fn dense(&self) -> DVector<f64> {
        let mut x = DVector::zeros(self.d.n_atoms());
        for (&j, &c) in self.active.iter().zip(&self.coefficients) {
            x[j] = c;
        }
        x
    }
}

/// Orthogonal Matching Pursuit with at most `s` atoms.
pub fn omp(d: &Dictionary, y: &[f64], s: PatchBudget) -> Result<DVector<f64>> {
    s.check(d)?;
    let mut state = OmpState::new(d, y)?;
    for _ in 0..s.get() {
        if !state.step()? {
            break;
        }
    }
    Ok(state.dense())
}

/// Accelerated (normalized-step) iterative hard thresholding. Returns the
/// accepted iterate with the smallest residual, plus the residual norm of
/// every accepted iterate when `trace` is given.
pub fn aiht_traced(
    d: &Dictionary,
    y: &[f64],
    s: PatchBudget,
    max_iters: usize,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<DVector<f64>> {
    s.check(d)?;
    check_signal(d, y)?;
    let l = d.n_atoms();
    let s = s.get();
    let mut x = vec![0.0; l];
    let mut r = y.to_vec();
    let mut r_norm = norm(&r);
    if let Some(t) = trace.as_deref_mut() {
        t.push(r_norm);
    }
    let mut candidate = vec![0.0; l];
    let mut step_point = vec![0.0; l];

    for _ in 0..max_iters {
        if r_norm <= 1e-14 * norm(y).max(f64::MIN_POSITIVE) {
            break;
        }
        // negative gradient of ½‖y − Dx‖²
        let g = correlate(d, &r);
        let support: Vec<usize> = if x.iter().any(|&v| v != 0.0) {
            (0..l).filter(|&j| x[j] != 0.0).collect()
        } else {
            top_indices(&g, s)
        };
        let mut g_sup = vec![0.0; l];
        for &j in &support {
            g_sup[j] = g[j];
        }
        let num: f64 = support.iter().map(|&j| g[j] * g[j]).sum();
        let den = image_energy(d, &g_sup);
        let mut alpha = if den > 0.0 { num / den } else { 1.0 };

        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            for j in 0..l {
                step_point[j] = x[j] + alpha * g[j];
            }
            hard_threshold_into(&step_point, s, &mut candidate);
            let r_new = residual(d, y, &candidate);
            let n_new = norm(&r_new);
            if n_new <= r_norm {
                accepted = Some((r_new, n_new));
                break;
            }
            alpha *= 0.5;
        }
        let Some((r_new, n_new)) = accepted else {
            break;
        };
        let change = r_norm - n_new;
        x.copy_from_slice(&candidate);
        r = r_new;
        let prev = r_norm;
        r_norm = n_new;
        if let Some(t) = trace.as_deref_mut() {
            t.push(r_norm);
        }
        if change <= STAGNATION * prev {
            break;
        }
    }
    Ok(DVector::from_vec(x))
}

pub fn aiht(d: &Dictionary, y: &[f64], s: PatchBudget, max_iters: usize) -> Result<DVector<f64>> {
    aiht_traced(d, y, s, max_iters, None)
}

/// Compressive Sampling Matching Pursuit. Requires `2s ≤ L`.
pub fn cosamp(d: &Dictionary, y: &[f64], s: PatchBudget, max_iters: usize) -> Result<DVector<f64>> {
    s.check(d)?;
    check_signal(d, y)?;
    let l = d.n_atoms();
    let s = s.get();
    if 2 * s > l {
        return Err(invalid(format!(
            "CoSaMP needs 2s ≤ L, got s = {s}, L = {l}"
        )));
    }
    let mut x = vec![0.0; l];
    let y_norm = norm(y);
    if y_norm == 0.0 {
        return Ok(DVector::from_vec(x));
    }
    let mut r_norm = y_norm;
    let mut r = y.to_vec();
    let mut best = (r_norm, x.clone());

    for _ in 0..max_iters {
        let proxy = correlate(d, &r);
        let mut merged = top_indices(&proxy, 2 * s);
        merged.extend((0..l).filter(|&j| x[j] != 0.0));
        merged.sort_unstable();
        merged.dedup();

        let b = least_squares(d, &merged, y)?;
        let mut pruned = vec![0.0; merged.len()];
        hard_threshold_into(&b, s, &mut pruned);
        x.fill(0.0);
        for (&j, &v) in merged.iter().zip(&pruned) {
            x[j] = v;
        }
        r = residual(d, y, &x);
        let n_new = norm(&r);
        if n_new < best.0 {
            best = (n_new, x.clone());
        }
        let stalled = (r_norm - n_new).abs() < STAGNATION * r_norm;
        r_norm = n_new;
        if r_norm <= 1e-12 * y_norm || stalled {
            break;
        }
    }
    Ok(DVector::from_vec(best.1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaselineConfig {
    /// Iteration cap for AIHT and CoSaMP (OMP always takes `s` steps).
    pub max_iters: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

pub fn solve_column(
    algorithm: PatchwiseAlgorithm,
    d: &Dictionary,
    y: &[f64],
    s: PatchBudget,
    config: &BaselineConfig,
) -> Result<DVector<f64>> {
    match algorithm {
        PatchwiseAlgorithm::Omp => omp(d, y, s),
        PatchwiseAlgorithm::Aiht => aiht(d, y, s, config.max_iters),
        PatchwiseAlgorithm::Cosamp => cosamp(d, y, s, config.max_iters),
    }
}

/// Runs `algorithm` on every column independently (in parallel) and
/// assembles the codes. The first failing column, by index, is reported.
pub fn solve_patchwise(
    algorithm: PatchwiseAlgorithm,
    d: &Dictionary,
    y: &PatchMatrix,
    s: PatchBudget,
    config: &BaselineConfig,
) -> Result<SolveResult> {
    let start = Instant::now();
    s.check(d)?;
    if d.n_rows() != y.n_rows() {
        return Err(mismatch(format!(
            "dictionary has {} rows, signals have {}",
            d.n_rows(),
            y.n_rows()
        )));
    }
    let columns: Vec<Result<DVector<f64>>> = (0..y.n_cols())
        .into_par_iter()
        .map(|p| solve_column(algorithm, d, y.column(p), s, config))
        .collect();
    let mut codes = DMatrix::zeros(d.n_atoms(), y.n_cols());
    for (p, col) in columns.into_iter().enumerate() {
        let col = col.map_err(|e| Error::Column {
            index: p,
            source: Box::new(e),
        })?;
        codes.set_column(p, &col);
    }
    let codes = CodeMatrix::new(codes)?;
    let rmse = metrics::rmse(d, &codes, y)?;
    Ok(SolveResult {
        codes,
        rmse,
        iterations: 1,
        rmse_trace: vec![rmse],
        objective_trace: Vec::new(),
        converged: true,
        final_rmse: rmse,
        best_iteration: 1,
        wall_time: start.elapsed(),
        setup_time: Default::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::build_gaussian_dictionary;

    fn budget(s: usize) -> PatchBudget {
        PatchBudget::new(s).unwrap()
    }

    #[test]
    fn omp_single_atom() {
        let d = build_gaussian_dictionary(20, 40, 0.1, 1).unwrap();
        let y: Vec<f64> = d.atom(7).iter().map(|v| 3.0 * v).collect();
        let x = omp(&d, &y, budget(1)).unwrap();
        assert!((x[7] - 3.0).abs() < 1e-10);
        assert_eq!(x.iter().filter(|&&v| v != 0.0).count(), 1);
        assert!(norm(&residual(&d, &y, x.as_slice())) < 1e-10);
    }

    #[test]
    fn omp_residual_orthogonal_each_step() {
        let d = build_gaussian_dictionary(16, 32, 0.1, 5).unwrap();
        let y = crate::dictionary::gaussian_matrix(16, 1, 1.0, 6).unwrap();
        let mut state = OmpState::new(&d, y.as_slice()).unwrap();
        for _ in 0..8 {
            assert!(state.step().unwrap());
            for &j in state.active() {
                assert!(dot(d.atom(j), state.residual()).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn omp_stops_early_on_exact_fit() {
        let d = Dictionary::identity(4);
        let y = [0.0, 2.0, 0.0, 0.0];
        let x = omp(&d, &y, budget(4)).unwrap();
        assert_eq!(x.iter().filter(|&&v| v != 0.0).count(), 1);
        assert!((x[1] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn aiht_single_atom_support() {
        let d = build_gaussian_dictionary(20, 40, 0.1, 2).unwrap();
        let y = d.atom(11).to_vec();
        let x = aiht(&d, &y, budget(1), 1).unwrap();
        let support: Vec<usize> = (0..40).filter(|&j| x[j] != 0.0).collect();
        assert_eq!(support, vec![11]);
    }

    #[test]
    fn aiht_residual_non_increasing() {
        let d = build_gaussian_dictionary(30, 60, 0.1, 8).unwrap();
        let y = crate::dictionary::gaussian_matrix(30, 1, 1.0, 9).unwrap();
        let mut trace = Vec::new();
        let x = aiht_traced(&d, y.as_slice(), budget(5), 100, Some(&mut trace)).unwrap();
        assert!(trace.len() > 1);
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(x.iter().filter(|&&v| v != 0.0).count() <= 5);
    }

    /// Picks `k` atoms of a Gaussian dictionary whose pairwise coherence is
    /// below `limit`, greedily by index.
    fn separated_atoms(d: &Dictionary, k: usize, limit: f64) -> Vec<usize> {
        let mut chosen: Vec<usize> = Vec::new();
        for j in 0..d.n_atoms() {
            if chosen
                .iter()
                .all(|&i| dot(d.atom(i), d.atom(j)).abs() < limit)
            {
                chosen.push(j);
                if chosen.len() == k {
                    break;
                }
            }
        }
        assert_eq!(chosen.len(), k);
        chosen
    }

    #[test]
    fn omp_two_incoherent_atoms() {
        let d = build_gaussian_dictionary(64, 128, 0.1, 4).unwrap();
        let atoms = separated_atoms(&d, 2, 0.2);
        let y: Vec<f64> = (0..64)
            .map(|i| 2.0 * d.atom(atoms[0])[i] + 3.0 * d.atom(atoms[1])[i])
            .collect();
        let x = omp(&d, &y, budget(2)).unwrap();
        assert!((x[atoms[0]] - 2.0).abs() < 1e-8);
        assert!((x[atoms[1]] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn cosamp_recovers_separated_support() {
        let d = build_gaussian_dictionary(100, 200, 0.1, 12).unwrap();
        for k in 1..=5 {
            let atoms = separated_atoms(&d, k, 0.1);
            let mut y = vec![0.0; 100];
            for (n, &j) in atoms.iter().enumerate() {
                let c = if n % 2 == 0 { 1.0 } else { -1.5 };
                for (yi, &a) in y.iter_mut().zip(d.atom(j)) {
                    *yi += c * a;
                }
            }
            let x = cosamp(&d, &y, budget(k), 100).unwrap();
            let support: Vec<usize> = (0..200).filter(|&j| x[j] != 0.0).collect();
            assert_eq!(support, atoms, "k = {k}");
        }
    }

    #[test]
    fn batch_matches_column_loop() {
        let d = build_gaussian_dictionary(16, 32, 0.1, 21).unwrap();
        let y = crate::dictionary::gaussian_matrix(16, 9, 1.0, 22).unwrap();
        let y = PatchMatrix::from_signals(y).unwrap();
        let config = BaselineConfig::default();
        for a in [
            PatchwiseAlgorithm::Omp,
            PatchwiseAlgorithm::Aiht,
            PatchwiseAlgorithm::Cosamp,
        ] {
            let batch = solve_patchwise(a, &d, &y, budget(3), &config).unwrap();
            for p in 0..9 {
                let single = solve_column(a, &d, y.column(p), budget(3), &config).unwrap();
                assert_eq!(batch.codes.column(p), single.as_slice(), "{a} column {p}");
                assert!(batch.codes.column_nnz(p) <= 3);
            }
        }
    }

    #[test]
    fn cosamp_zero_signal() {
        let d = build_gaussian_dictionary(10, 20, 0.1, 3).unwrap();
        let x = cosamp(&d, &[0.0; 10], budget(3), 100).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cosamp_requires_room_for_merge() {
        let d = build_gaussian_dictionary(10, 10, 0.1, 3).unwrap();
        assert!(cosamp(&d, &[1.0; 10], budget(6), 10).is_err());
    }

    #[test]
    fn budget_bounds() {
        assert!(PatchBudget::new(0).is_err());
        let d = Dictionary::identity(4);
        assert!(omp(&d, &[1.0; 4], budget(5)).is_err());
        assert!(omp(&d, &[1.0; 3], budget(2)).is_err());
    }

    #[test]
    fn top_indices_handles_zero_ties() {
        assert_eq!(top_indices(&[0.0, 3.0, 0.0, -1.0], 3), vec![0, 1, 3]);
        assert_eq!(top_indices(&[0.0; 4], 2), vec![0, 1]);
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in [
            PatchwiseAlgorithm::Omp,
            PatchwiseAlgorithm::Aiht,
            PatchwiseAlgorithm::Cosamp,
        ] {
            assert_eq!(a.name().parse::<PatchwiseAlgorithm>().unwrap(), a);
        }
        assert!("lasso".parse::<PatchwiseAlgorithm>().is_err());
    }

    #[test]
    fn batch_reports_failing_column() {
        let d = build_gaussian_dictionary(10, 10, 0.1, 3).unwrap();
        let y = PatchMatrix::from_signals(DMatrix::from_element(10, 3, 1.0)).unwrap();
        let err = solve_patchwise(
            PatchwiseAlgorithm::Cosamp,
            &d,
            &y,
            budget(6),
            &Default::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Column { index: 0, .. }), "{err}");
    }
}

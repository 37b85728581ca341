//! Synthetic recovery instances and the two benchmark sweeps: support
//! recovery versus sparsity, and wall time versus the number of patches.

use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dictionary::{build_gaussian_dictionary, gaussian_matrix, Dictionary};
use crate::error::{invalid, Result};
use crate::image::GrayImage;
use crate::kernels::CodeMatrix;
use crate::metrics::{support_mismatch_ratio, SupportSet};
use crate::patcher::PatchMatrix;
use crate::solver::{run_solver, Solver, SolverOptions};

/// Standard deviation of the raw Gaussian dictionary entries.
pub const DICTIONARY_STD: f64 = 0.1;

pub const CSV_HEADER: &str = "solver,s_or_p,mismatch,rmse,seconds";

#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub dictionary: Dictionary,
    /// Exactly `s` entries of ±1 per column.
    pub true_codes: CodeMatrix,
    /// `dictionary · true_codes`.
    pub signals: PatchMatrix,
    pub per_column_sparsity: usize,
    pub seed: u64,
}

/// Gaussian dictionary plus `p` signals, each a ±1 combination of `s`
/// atoms drawn without replacement.
pub fn gen_instance(
    n: usize,
    l: usize,
    p: usize,
    s: usize,
    seed: u64,
) -> Result<SyntheticInstance> {
    if s > l {
        return Err(invalid(format!(
            "sparsity {s} exceeds the {l} available atoms"
        )));
    }
    if p == 0 {
        return Err(invalid("need at least one signal"));
    }
    let dictionary = build_gaussian_dictionary(n, l, DICTIONARY_STD, seed)?;
    // separate stream so the codes don't reuse the dictionary's draws
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut codes = DMatrix::zeros(l, p);
    for col in 0..p {
        for j in sample(&mut rng, l, s) {
            codes[(j, col)] = if rng.random::<bool>() { 1.0 } else { -1.0 };
        }
    }
    let signals = PatchMatrix::from_signals(dictionary.matrix() * &codes)?;
    Ok(SyntheticInstance {
        dictionary,
        true_codes: CodeMatrix::new(codes)?,
        signals,
        per_column_sparsity: s,
        seed,
    })
}

/// One cell of a sweep: a solver at one sparsity level or patch count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub solver: Solver,
    pub s_or_p: usize,
    pub mismatch: Option<f64>,
    pub rmse: Option<f64>,
    pub seconds: Option<f64>,
    /// Mean time per iteration, excluding setup (global solvers only).
    pub seconds_per_iteration: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    fn failed(solver: Solver, s_or_p: usize, error: String) -> Self {
        Self {
            solver,
            s_or_p,
            mismatch: None,
            rmse: None,
            seconds: None,
            seconds_per_iteration: None,
            error: Some(error),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn rows_for(&self, solver: Solver) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.solver == solver)
    }

    /// CSV with a fixed header. Missing values are left empty.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        fn cell(v: Option<f64>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.solver,
                r.s_or_p,
                cell(r.mismatch),
                cell(r.rmse),
                cell(r.seconds)
            )?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| invalid(e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct RecoveryConfig {
    pub n: usize,
    pub l: usize,
    pub p: usize,
    /// Trial `t` uses seed `base_seed + t`.
    pub base_seed: u64,
    pub options: SolverOptions,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self {
            n: 100,
            l: 200,
            p: 100,
            base_seed: 0,
            options: SolverOptions::default(),
        }
    }
}

/// For every `s` and solver, averages mismatch ratio, RMSE and wall time
/// over `trials` independent instances. Global solvers get `S = s·P`.
/// A failing cell is recorded with its error instead of aborting the sweep.
pub fn run_recovery_sweep(
    s_values: &[usize],
    trials: usize,
    solvers: &[Solver],
    config: &RecoveryConfig,
) -> Result<SweepReport> {
    if trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    let mut rows = Vec::with_capacity(s_values.len() * solvers.len());
    for &s in s_values {
        let instances = (0..trials as u64)
            .map(|t| gen_instance(config.n, config.l, config.p, s, config.base_seed + t))
            .collect::<Result<Vec<_>>>()?;
        for &solver in solvers {
            rows.push(recovery_cell(solver, s, &instances, &config.options));
        }
    }
    Ok(SweepReport { rows })
}

fn recovery_cell(
    solver: Solver,
    s: usize,
    instances: &[SyntheticInstance],
    options: &SolverOptions,
) -> SweepRow {
    let mut mismatch = 0.0;
    let mut rmse = 0.0;
    let mut seconds = 0.0;
    let mut per_iter = 0.0;
    for inst in instances {
        let start = Instant::now();
        let res = match run_solver(solver, &inst.dictionary, &inst.signals, s as f64, options) {
            Ok(r) => r,
            Err(e) => return SweepRow::failed(solver, s, format!("seed {}: {e}", inst.seed)),
        };
        seconds += start.elapsed().as_secs_f64();
        per_iter += res.seconds_per_iteration();
        rmse += res.rmse;
        mismatch += support_mismatch_ratio(
            &SupportSet::of(&inst.true_codes),
            &SupportSet::of(&res.codes),
        );
    }
    let k = instances.len() as f64;
    SweepRow {
        solver,
        s_or_p: s,
        mismatch: Some(mismatch / k),
        rmse: Some(rmse / k),
        seconds: Some(seconds / k),
        seconds_per_iteration: solver.is_global().then_some(per_iter / k),
        error: None,
    }
}

/// Where the scaling sweep takes its patches from.
#[derive(Debug, Clone)]
pub enum PatchSource {
    /// Uniformly placed patches from uniformly chosen images.
    Images(Vec<GrayImage>),
    /// i.i.d. Gaussian patches with pixel-like spread.
    Gaussian,
}

/// Draws `p` patches of `side × side` pixels, vectorized column-major like
/// [`crate::patcher::image_to_patch_matrix`].
pub fn sample_patches(
    source: &PatchSource,
    side: usize,
    p: usize,
    seed: u64,
) -> Result<PatchMatrix> {
    match source {
        PatchSource::Gaussian => {
            PatchMatrix::from_signals(gaussian_matrix(side * side, p, 50.0, seed)?)
        }
        PatchSource::Images(images) => {
            let usable: Vec<&GrayImage> = images
                .iter()
                .filter(|im| im.height() >= side && im.width() >= side)
                .collect();
            if usable.is_empty() {
                return Err(invalid(format!("no image is at least {side}×{side}")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut data = DMatrix::zeros(side * side, p);
            for col in 0..p {
                let im = usable[rng.random_range(0..usable.len())];
                let top = rng.random_range(0..=im.height() - side);
                let left = rng.random_range(0..=im.width() - side);
                for c in 0..side {
                    for r in 0..side {
                        data[(c * side + r, col)] = im.get(top + r, left + c);
                    }
                }
            }
            PatchMatrix::from_signals(data)
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScalingConfig {
    pub dictionary: Dictionary,
    pub source: PatchSource,
    /// Per-patch budget.
    pub s: usize,
    /// Global solvers run exactly this many iterations so that timings
    /// measure per-patch cost rather than data-dependent convergence.
    pub iterations: usize,
    /// Each cell is timed this many times; the fastest run is reported.
    pub repeats: usize,
    pub seed: u64,
    pub options: SolverOptions,
}

/// Wall time per solver and patch count. Each `P` gets its own patch draw.
pub fn run_scaling_sweep(
    p_values: &[usize],
    solvers: &[Solver],
    config: &ScalingConfig,
) -> Result<SweepReport> {
    if config.repeats == 0 || config.iterations == 0 {
        return Err(invalid("repeats and iterations must be at least 1"));
    }
    let side = (config.dictionary.n_rows() as f64).sqrt().round() as usize;
    if side * side != config.dictionary.n_rows() {
        return Err(invalid("dictionary rows must be a square patch size"));
    }
    let mut options = config.options;
    options.ght = options.ght.fixed_iterations(config.iterations);

    let mut rows = Vec::with_capacity(p_values.len() * solvers.len());
    for &p in p_values {
        let y = sample_patches(&config.source, side, p, config.seed ^ p as u64)?;
        for &solver in solvers {
            rows.push(scaling_cell(
                solver,
                p,
                &config.dictionary,
                &y,
                config,
                &options,
            ));
        }
    }
    Ok(SweepReport { rows })
}

fn scaling_cell(
    solver: Solver,
    p: usize,
    d: &Dictionary,
    y: &PatchMatrix,
    config: &ScalingConfig,
    options: &SolverOptions,
) -> SweepRow {
    let mut best: Option<(f64, f64, f64)> = None;
    for _ in 0..config.repeats {
        let start = Instant::now();
        match run_solver(solver, d, y, config.s as f64, options) {
            Ok(res) => {
                let secs = start.elapsed().as_secs_f64();
                if best.is_none_or(|(b, _, _)| secs < b) {
                    best = Some((secs, res.rmse, res.seconds_per_iteration()));
                }
            }
            Err(e) => return SweepRow::failed(solver, p, e.to_string()),
        }
    }
    let (seconds, rmse, per_iter) = best.expect("repeats >= 1");
    SweepRow {
        solver,
        s_or_p: p,
        mismatch: None,
        rmse: Some(rmse),
        seconds: Some(seconds),
        seconds_per_iteration: solver.is_global().then_some(per_iter),
        error: None,
    }
}

/// Least-squares line `t ≈ a + b·p` and its coefficient of determination.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    (intercept, slope, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instance_shape_and_signs() {
        let inst = gen_instance(100, 200, 100, 5, 3).unwrap();
        assert_eq!(inst.signals.n_rows(), 100);
        assert_eq!(inst.signals.n_cols(), 100);
        for p in 0..100 {
            let col = inst.true_codes.column(p);
            assert_eq!(col.iter().filter(|&&v| v != 0.0).count(), 5);
            assert!(col.iter().all(|&v| v == 0.0 || v.abs() == 1.0));
        }
        let rebuilt = inst.dictionary.matrix() * inst.true_codes.matrix();
        assert_eq!(&rebuilt, inst.signals.matrix());
    }

    #[test]
    fn instances_reproducible_by_seed() {
        let a = gen_instance(20, 40, 10, 3, 9).unwrap();
        let b = gen_instance(20, 40, 10, 3, 9).unwrap();
        let c = gen_instance(20, 40, 10, 3, 10).unwrap();
        assert_eq!(a.true_codes, b.true_codes);
        assert_eq!(a.signals.matrix(), b.signals.matrix());
        assert_ne!(a.true_codes.support(), c.true_codes.support());
    }

    #[test]
    fn instance_rejects_excess_sparsity() {
        assert!(gen_instance(10, 5, 3, 6, 0).is_err());
    }

    #[test]
    fn omp_recovers_low_sparsity() {
        let report =
            run_recovery_sweep(&[5], 1, &[Solver::Omp], &RecoveryConfig::default()).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert!(report.rows[0].mismatch.unwrap() < 0.02);
    }

    #[test]
    fn report_has_one_row_per_cell() {
        let config = RecoveryConfig {
            n: 20,
            l: 40,
            p: 8,
            ..Default::default()
        };
        let report = run_recovery_sweep(&[2, 3], 2, &Solver::ALL, &config).unwrap();
        assert_eq!(report.rows.len(), 10);
        assert!(report.rows.iter().all(|r| r.error.is_none()));
    }

    #[test]
    fn failing_cell_is_recorded() {
        let config = RecoveryConfig {
            n: 20,
            l: 10,
            p: 4,
            ..Default::default()
        };
        let report = run_recovery_sweep(&[6], 1, &[Solver::Cosamp, Solver::Omp], &config).unwrap();
        assert!(report.rows[0].error.is_some());
        assert!(report.rows[1].error.is_none());
    }

    #[test]
    fn csv_layout() {
        let report = SweepReport {
            rows: vec![
                SweepRow {
                    solver: Solver::GhtQpm,
                    s_or_p: 1024,
                    mismatch: None,
                    rmse: Some(1.5),
                    seconds: Some(0.25),
                    seconds_per_iteration: Some(0.025),
                    error: None,
                },
                SweepRow::failed(Solver::Omp, 1024, "boom".into()),
            ],
        };
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "solver,s_or_p,mismatch,rmse,seconds\nght-qpm,1024,,1.5,0.25\nomp,1024,,,\n"
        );
        let back: SweepReport = serde_json::from_str(&report.to_json().unwrap()).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn image_patches_follow_patcher_layout() {
        let im = GrayImage::from_fn(8, 8, |r, c| (r * 8 + c) as f64).unwrap();
        let y = sample_patches(&PatchSource::Images(vec![im.clone()]), 8, 3, 1).unwrap();
        let reference = crate::patcher::image_to_patch_matrix(&im, 8).unwrap();
        for p in 0..3 {
            assert_eq!(y.column(p), reference.column(0));
        }
    }

    #[test]
    fn scaling_rows() {
        let config = ScalingConfig {
            dictionary: crate::dictionary::build_overcomplete_dct(4, 5).unwrap(),
            source: PatchSource::Gaussian,
            s: 2,
            iterations: 3,
            repeats: 1,
            seed: 0,
            options: SolverOptions::default(),
        };
        let solvers = [Solver::GhtQpm, Solver::Omp];
        let report = run_scaling_sweep(&[64, 128], &solvers, &config).unwrap();
        assert_eq!(report.rows.len(), 4);
        assert!(report
            .rows_for(Solver::GhtQpm)
            .all(|r| r.seconds_per_iteration.is_some()));
    }

    #[test]
    fn fit_of_exact_line() {
        let (a, b, r2) = linear_fit(&[1.0, 2.0, 4.0], &[3.0, 5.0, 9.0]);
        assert!((a - 1.0).abs() < 1e-12 && (b - 2.0).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }
}

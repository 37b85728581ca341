use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use ght_core::dictionary::{build_gaussian_dictionary, build_overcomplete_dct};
use ght_core::metrics::{psnr, PEAK_8BIT};
use ght_core::patcher::atom_count_heatmap;
use ght_core::solver::{global_budget, represent_image};
use ght_core::synth::{
    run_recovery_sweep, run_scaling_sweep, PatchSource, RecoveryConfig, ScalingConfig, SweepReport,
};
use ght_core::{Dictionary, GrayImage, PatchGrid, Solver};
use serde::Serialize;

use crate::args::{
    DenoiseArgs, DictArgs, DictKind, ImageFormat, RepresentArgs, ScaleArgs, SynthArgs,
};
use crate::config::{pick, pick_list, DictionarySpec, FileConfig, Tuning};
use crate::io::{image_file_name, images_in, read_dictionary, read_image, write_image};
use crate::manifest::Run;

fn load_dictionary(spec: &DictionarySpec, run: &mut Run) -> Result<Dictionary> {
    let d = match &spec.csv {
        Some(path) => {
            run.input(path)?;
            read_dictionary(path)?
        }
        None => build_overcomplete_dct(spec.patch_side, spec.atoms_per_dim)?,
    };
    if d.n_rows() != spec.patch_side * spec.patch_side {
        bail!(
            "dictionary has {} rows but {}x{} patches need {}",
            d.n_rows(),
            spec.patch_side,
            spec.patch_side,
            spec.patch_side * spec.patch_side
        );
    }
    Ok(d)
}

fn load_input_image(path: &Path, side: usize, crop: bool, run: &mut Run) -> Result<GrayImage> {
    run.input(path)?;
    let image = read_image(path)?;
    if crop {
        return Ok(image.center_crop_to_multiple(side)?);
    }
    if image.height() % side != 0 || image.width() % side != 0 {
        bail!(
            "{}x{} image is not divisible into {side}x{side} patches (pass --crop to center-crop)",
            image.height(),
            image.width()
        );
    }
    Ok(image)
}

fn grid_of(image: &GrayImage, side: usize) -> PatchGrid {
    PatchGrid {
        patch_side: side,
        grid_rows: image.height() / side,
        grid_cols: image.width() / side,
    }
}

#[derive(Serialize)]
struct RepresentParams<'a> {
    image: &'a Path,
    dictionary: DictionarySpec,
    budget_per_patch: f64,
    solver: Solver,
    crop: bool,
    format: ImageFormat,
    tuning: Tuning,
}

pub fn represent(
    args: &RepresentArgs,
    file: &FileConfig,
    out: &Path,
    heatmap_only: bool,
) -> Result<()> {
    let params = RepresentParams {
        image: &args.image,
        dictionary: DictionarySpec::resolve(&args.dict, file),
        budget_per_patch: pick(args.budget, file.budget, 10.0),
        solver: pick(args.solver, file.solver, Solver::GhtQpm),
        crop: args.crop,
        format: pick(args.format, file.format, ImageFormat::Pgm),
        tuning: Tuning::resolve(&args.tuning, file),
    };
    let mut run = Run::start(if heatmap_only { "heatmap" } else { "represent" }, out)?;
    let d = load_dictionary(&params.dictionary, &mut run)?;
    let side = params.dictionary.patch_side;
    let image = load_input_image(&args.image, side, params.crop, &mut run)?;
    let (recon, result) = represent_image(
        params.solver,
        &d,
        &image,
        params.budget_per_patch,
        &params.tuning.options(),
    )?;

    let heatmap = atom_count_heatmap(&result.codes, grid_of(&image, side))?;
    let heatmap_path = run.output(&image_file_name("heatmap", params.format));
    write_image(&heatmap, &heatmap_path, params.format)?;

    if !heatmap_only {
        let recon = recon.clamped();
        let recon_path = run.output(&image_file_name("reconstruction", params.format));
        write_image(&recon, &recon_path, params.format)?;

        let patches = result.codes.n_cols();
        let budget = if params.solver.is_global() {
            global_budget(params.budget_per_patch, patches)?
        } else {
            params.budget_per_patch.round() as usize * patches
        };
        let mut report = String::from(
            "solver,patches,budget_per_patch,total_budget,nonzeros,rmse,psnr,iterations,converged\n",
        );
        writeln!(
            report,
            "{},{},{},{},{},{},{},{},{}",
            params.solver,
            patches,
            params.budget_per_patch,
            budget,
            result.codes.nnz(),
            result.rmse,
            psnr(&image, &recon, PEAK_8BIT)?,
            result.iterations,
            result.converged
        )?;
        run.write_text("report.csv", &report)?;

        let timing = serde_json::json!({
            "wall_seconds": result.wall_time.as_secs_f64(),
            "setup_seconds": result.setup_time.as_secs_f64(),
            "seconds_per_iteration": result.seconds_per_iteration(),
            "iterations": result.iterations,
        });
        run.write_text(
            "timing.json",
            &(serde_json::to_string_pretty(&timing)? + "\n"),
        )?;
        println!(
            "{}: rmse {:.4} in {} iterations",
            params.solver, result.rmse, result.iterations
        );
    }
    run.finish(&params, None)?;
    Ok(())
}

#[derive(Serialize)]
struct DenoiseParams<'a> {
    image: &'a Path,
    dictionary: DictionarySpec,
    sigma: Vec<f64>,
    budget_per_patch: f64,
    solvers: Vec<Solver>,
    seed: u64,
    crop: bool,
    format: ImageFormat,
    tuning: Tuning,
}

pub fn denoise(args: &DenoiseArgs, file: &FileConfig, out: &Path) -> Result<()> {
    let params = DenoiseParams {
        image: &args.image,
        dictionary: DictionarySpec::resolve(&args.dict, file),
        sigma: pick_list(
            &args.sigma,
            file.sigma.as_ref(),
            &[5.0, 10.0, 20.0, 30.0, 40.0],
        ),
        budget_per_patch: pick(args.budget, file.budget, 10.0),
        solvers: pick_list(&args.solver, file.solvers.as_ref(), &Solver::ALL),
        seed: pick(args.seed, file.seed, 0),
        crop: args.crop,
        format: pick(args.format, file.format, ImageFormat::Pgm),
        tuning: Tuning::resolve(&args.tuning, file),
    };
    let mut run = Run::start("denoise", out)?;
    let d = load_dictionary(&params.dictionary, &mut run)?;
    let clean = load_input_image(
        &args.image,
        params.dictionary.patch_side,
        params.crop,
        &mut run,
    )?;
    let options = params.tuning.options();

    let mut report = String::from("sigma,solver,noisy_psnr,denoised_psnr,rmse,iterations\n");
    for &sigma in &params.sigma {
        let noisy = clean.with_gaussian_noise(sigma, params.seed)?;
        let noisy_path = run.output(&image_file_name(
            &format!("noisy_sigma{sigma}"),
            params.format,
        ));
        write_image(&noisy, &noisy_path, params.format)?;
        let noisy_db = psnr(&clean, &noisy, PEAK_8BIT)?;
        for &solver in &params.solvers {
            let (recon, result) =
                represent_image(solver, &d, &noisy, params.budget_per_patch, &options)
                    .with_context(|| format!("{solver} at sigma {sigma}"))?;
            let recon = recon.clamped();
            let db = psnr(&clean, &recon, PEAK_8BIT)?;
            let name = image_file_name(&format!("denoised_{solver}_sigma{sigma}"), params.format);
            let path = run.output(&name);
            write_image(&recon, &path, params.format)?;
            writeln!(
                report,
                "{sigma},{solver},{noisy_db},{db},{},{}",
                result.rmse, result.iterations
            )?;
            println!("sigma {sigma}: {solver} {db:.2} dB (noisy {noisy_db:.2} dB)");
        }
    }
    run.write_text("psnr.csv", &report)?;
    run.finish(&params, Some(params.seed))?;
    Ok(())
}

fn write_report(run: &mut Run, stem: &str, report: &SweepReport) -> Result<()> {
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    run.write_text(&format!("{stem}.csv"), std::str::from_utf8(&csv)?)?;
    run.write_text(&format!("{stem}.json"), &(report.to_json()? + "\n"))?;
    for row in &report.rows {
        if let Some(e) = &row.error {
            eprintln!("warning: {} at {}: {e}", row.solver, row.s_or_p);
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SynthParams {
    s_min: usize,
    s_max: usize,
    trials: usize,
    solvers: Vec<Solver>,
    n: usize,
    l: usize,
    p: usize,
    seed: u64,
    tuning: Tuning,
}

pub fn synth_bench(args: &SynthArgs, file: &FileConfig, out: &Path) -> Result<()> {
    let params = SynthParams {
        s_min: pick(args.s_min, file.s_min, 5),
        s_max: pick(args.s_max, file.s_max, 30),
        trials: pick(args.trials, file.trials, 5),
        solvers: pick_list(&args.solver, file.solvers.as_ref(), &Solver::ALL),
        n: pick(args.n, file.n, 100),
        l: pick(args.l, file.l, 200),
        p: pick(args.p, file.p, 100),
        seed: pick(args.seed, file.seed, 0),
        tuning: Tuning::resolve(&args.tuning, file),
    };
    if params.s_min == 0 || params.s_min > params.s_max {
        bail!(
            "need 1 <= s-min <= s-max, got {}..{}",
            params.s_min,
            params.s_max
        );
    }
    let mut run = Run::start("synth-bench", out)?;
    let s_values: Vec<usize> = (params.s_min..=params.s_max).collect();
    let config = RecoveryConfig {
        n: params.n,
        l: params.l,
        p: params.p,
        base_seed: params.seed,
        options: params.tuning.options(),
    };
    let report = run_recovery_sweep(&s_values, params.trials, &params.solvers, &config)?;
    write_report(&mut run, "synth", &report)?;
    println!("{} rows written", report.rows.len());
    run.finish(&params, Some(params.seed))?;
    Ok(())
}

#[derive(Serialize)]
struct ScaleParams {
    p_list: Vec<usize>,
    s: usize,
    solvers: Vec<Solver>,
    image_dir: Option<std::path::PathBuf>,
    iterations: usize,
    repeats: usize,
    seed: u64,
    dictionary: DictionarySpec,
    tuning: Tuning,
}

pub fn scale_bench(args: &ScaleArgs, file: &FileConfig, out: &Path) -> Result<()> {
    let top = if args.full_range { 20 } else { 16 };
    let default_p: Vec<usize> = (10..=top).map(|e| 1usize << e).collect();
    let params = ScaleParams {
        p_list: pick_list(&args.p_list, file.p_list.as_ref(), &default_p),
        s: pick(args.s, file.s, 10),
        solvers: pick_list(&args.solver, file.solvers.as_ref(), &Solver::ALL),
        image_dir: args.image_dir.clone().or_else(|| file.image_dir.clone()),
        iterations: pick(args.iterations, file.iterations, 20),
        repeats: pick(args.repeats, file.repeats, 1),
        seed: pick(args.seed, file.seed, 0),
        dictionary: DictionarySpec::resolve(&args.dict, file),
        tuning: Tuning::resolve(&args.tuning, file),
    };
    let mut run = Run::start("scale-bench", out)?;
    let dictionary = load_dictionary(&params.dictionary, &mut run)?;
    let source = match &params.image_dir {
        Some(dir) => {
            let mut images = Vec::new();
            for path in images_in(dir)? {
                run.input(&path)?;
                images.push(read_image(&path)?);
            }
            PatchSource::Images(images)
        }
        None => PatchSource::Gaussian,
    };
    let config = ScalingConfig {
        dictionary,
        source,
        s: params.s,
        iterations: params.iterations,
        repeats: params.repeats,
        seed: params.seed,
        options: params.tuning.options(),
    };
    let report = run_scaling_sweep(&params.p_list, &params.solvers, &config)?;
    write_report(&mut run, "scale", &report)?;
    for row in &report.rows {
        if let Some(secs) = row.seconds {
            println!("{} P={}: {secs:.3} s", row.solver, row.s_or_p);
        }
    }
    run.finish(&params, Some(params.seed))?;
    Ok(())
}

#[derive(Serialize)]
struct DictParams<'a> {
    kind: &'static str,
    patch_side: usize,
    atoms_per_dim: usize,
    n: usize,
    l: usize,
    seed: u64,
    name: &'a str,
}

pub fn dict(args: &DictArgs, out: &Path) -> Result<()> {
    let mut run = Run::start("dict", out)?;
    let (d, kind) = match args.kind {
        DictKind::Dct => (
            build_overcomplete_dct(args.patch_side, args.atoms_per_dim)?,
            "dct",
        ),
        DictKind::Gaussian => (
            build_gaussian_dictionary(args.n, args.l, ght_core::synth::DICTIONARY_STD, args.seed)?,
            "gaussian",
        ),
    };
    let mut csv = Vec::new();
    d.write_csv(&mut csv)?;
    run.write_text(&args.name, std::str::from_utf8(&csv)?)?;
    println!("{}x{} dictionary written", d.n_rows(), d.n_atoms());
    let params = DictParams {
        kind,
        patch_side: args.patch_side,
        atoms_per_dim: args.atoms_per_dim,
        n: args.n,
        l: args.l,
        seed: args.seed,
        name: &args.name,
    };
    run.finish(
        &params,
        (args.kind == DictKind::Gaussian).then_some(args.seed),
    )?;
    Ok(())
}

mod args;
mod commands;
mod config;
mod io;
mod manifest;

use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use crate::args::{Cli, Command};
use crate::config::FileConfig;

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let file = FileConfig::load(cli.config.as_deref())?;
    let out = cli.out_dir.as_path();
    match &cli.command {
        Command::Represent(a) => commands::represent(a, &file, out, false),
        Command::Heatmap(a) => commands::represent(a, &file, out, true),
        Command::Denoise(a) => commands::denoise(a, &file, out),
        Command::SynthBench(a) => commands::synth_bench(a, &file, out),
        Command::ScaleBench(a) => commands::scale_bench(a, &file, out),
        Command::Dict(a) => commands::dict(a, out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

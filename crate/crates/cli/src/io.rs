//! File formats at the command-line boundary: image decoding, hashing.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ght_core::{Dictionary, GrayImage};
use sha2::{Digest, Sha256};

use crate::args::ImageFormat;

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

pub fn read_image(path: &Path) -> Result<GrayImage> {
    let load = || -> Result<GrayImage> {
        match extension(path).as_str() {
            "pgm" => Ok(GrayImage::read_pgm(BufReader::new(File::open(path)?))?),
            "png" => {
                let decoded = image::open(path)?.into_luma8();
                let (w, h) = decoded.dimensions();
                Ok(GrayImage::from_u8(
                    h as usize,
                    w as usize,
                    decoded.as_raw(),
                )?)
            }
            other => bail!("unsupported image extension {other:?} (expected pgm or png)"),
        }
    };
    load().with_context(|| format!("reading image {}", path.display()))
}

pub fn write_image(image: &GrayImage, path: &Path, format: ImageFormat) -> Result<()> {
    let save = || -> Result<()> {
        match format {
            ImageFormat::Pgm => {
                let mut out = BufWriter::new(File::create(path)?);
                image.write_pgm(&mut out)?;
                out.flush()?;
            }
            ImageFormat::Png => {
                let buf = image::GrayImage::from_raw(
                    image.width() as u32,
                    image.height() as u32,
                    image.to_u8(),
                )
                .context("pixel buffer size")?;
                buf.save_with_format(path, image::ImageFormat::Png)?;
            }
        }
        Ok(())
    };
    save().with_context(|| format!("writing image {}", path.display()))
}

pub fn image_file_name(stem: &str, format: ImageFormat) -> String {
    match format {
        ImageFormat::Pgm => format!("{stem}.pgm"),
        ImageFormat::Png => format!("{stem}.png"),
    }
}

/// PGM and PNG files directly inside `dir`, sorted by name.
pub fn images_in(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(extension(p).as_str(), "pgm" | "png"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no .pgm or .png files in {}", dir.display());
    }
    Ok(paths)
}

pub fn read_dictionary(path: &Path) -> Result<Dictionary> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Dictionary::read_csv(BufReader::new(file))
        .with_context(|| format!("reading dictionary {}", path.display()))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

//! Grayscale images and 8-bit PGM input/output.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, mismatch, Error, Result};

/// A single-channel image of real intensities (nominally 0–255), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(invalid("image dimensions must be positive"));
        }
        if pixels.len() != height * width {
            return Err(mismatch(format!(
                "{} pixels for a {height}x{width} image",
                pixels.len()
            )));
        }
        if pixels.iter().any(|p| !p.is_finite()) {
            return Err(invalid("image pixels must be finite"));
        }
        Ok(Self {
            height,
            width,
            pixels,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![0.0; height * width])
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut pixels = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                pixels.push(f(r, c));
            }
        }
        Self::new(height, width, pixels)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.pixels[row * self.width + col] = value;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            height: self.height,
            width: self.width,
            pixels: self.pixels.iter().map(|&p| f(p)).collect(),
        }
    }

    /// Clamps every pixel into `[0, 255]`.
    pub fn clamped(&self) -> Self {
        self.map(|p| p.clamp(0.0, 255.0))
    }

    /// Adds seeded i.i.d. `N(0, σ²)` noise in floating point and clips to
    /// `[0, 255]` without rounding. `σ = 0` returns an exact copy.
    pub fn with_gaussian_noise(&self, sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(invalid(format!(
                "noise sigma must be non-negative, got {sigma}"
            )));
        }
        if sigma == 0.0 {
            return Ok(self.clone());
        }
        let normal = Normal::new(0.0, sigma).map_err(|e| invalid(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self {
            height: self.height,
            width: self.width,
            pixels: self
                .pixels
                .iter()
                .map(|&p| (p + normal.sample(&mut rng)).clamp(0.0, 255.0))
                .collect(),
        })
    }

    /// Sub-image of `height × width` pixels starting at `(top, left)`.
    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Self> {
        if top + height > self.height || left + width > self.width {
            return Err(mismatch(format!(
                "crop {height}x{width}+{top}+{left} exceeds {}x{} image",
                self.height, self.width
            )));
        }
        Self::from_fn(height, width, |r, c| self.get(top + r, left + c))
    }

    /// Center-crops to the largest size whose sides are multiples of `side`.
    pub fn center_crop_to_multiple(&self, side: usize) -> Result<Self> {
        if side == 0 {
            return Err(invalid("patch side must be at least 1"));
        }
        let h = self.height / side * side;
        let w = self.width / side * side;
        if h == 0 || w == 0 {
            return Err(mismatch(format!(
                "{}x{} image is smaller than one {side}x{side} patch",
                self.height, self.width
            )));
        }
        self.crop((self.height - h) / 2, (self.width - w) / 2, h, w)
    }

    /// Rounds and clamps to 8-bit samples.
    pub fn to_u8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|&p| p.round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    pub fn from_u8(height: usize, width: usize, samples: &[u8]) -> Result<Self> {
        Self::new(
            height,
            width,
            samples.iter().map(|&v| f64::from(v)).collect(),
        )
    }

    /// Parses a binary (`P5`) or ASCII (`P2`) PGM with `maxval ≤ 255`.
    pub fn read_pgm<R: Read>(mut input: R) -> Result<Self> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        let mut cursor = PgmCursor {
            bytes: &bytes,
            pos: 0,
        };
        let magic = cursor.token()?;
        let ascii = match magic.as_str() {
            "P5" => false,
            "P2" => true,
            other => return Err(pgm_err(format!("unsupported magic {other:?}"))),
        };
        let width = cursor.number()?;
        let height = cursor.number()?;
        let maxval = cursor.number()?;
        if maxval == 0 || maxval > 255 {
            return Err(pgm_err(format!("maxval {maxval} not in 1..=255")));
        }
        let count = width * height;
        let samples: Vec<u8> = if ascii {
            (0..count)
                .map(|_| cursor.number().map(|v| v.min(255) as u8))
                .collect::<Result<_>>()?
        } else {
            // exactly one whitespace byte separates the header from the raster
            let start = cursor.pos + 1;
            let raster = bytes
                .get(start..start + count)
                .ok_or_else(|| pgm_err("truncated raster".into()))?;
            raster.to_vec()
        };
        let scale = 255.0 / maxval as f64;
        Self::new(
            height,
            width,
            samples.iter().map(|&v| f64::from(v) * scale).collect(),
        )
    }

    /// Writes a binary `P5` PGM with `maxval = 255`.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "P5\n{} {}\n255\n", self.width, self.height)?;
        out.write_all(&self.to_u8())?;
        Ok(())
    }
}

fn pgm_err(message: String) -> Error {
    Error::Format {
        format: "pgm",
        message,
    }
}

struct PgmCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl PgmCursor<'_> {
    fn token(&mut self) -> Result<String> {
        loop {
            match self.bytes.get(self.pos) {
                Some(b'#') => {
                    while let Some(&b) = self.bytes.get(self.pos) {
                        self.pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(_) => break,
                None => return Err(pgm_err("unexpected end of header".into())),
            }
        }
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|b| !b.is_ascii_whitespace())
        {
            self.pos += 1;
        }
        Ok(String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned())
    }

    fn number(&mut self) -> Result<usize> {
        let tok = self.token()?;
        tok.parse()
            .map_err(|_| pgm_err(format!("expected a number, got {tok:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_is_seeded_and_clipped() {
        let im = GrayImage::from_fn(16, 16, |r, c| (r * 16 + c) as f64).unwrap();
        assert_eq!(im.with_gaussian_noise(0.0, 1).unwrap(), im);
        let a = im.with_gaussian_noise(30.0, 5).unwrap();
        assert_eq!(a, im.with_gaussian_noise(30.0, 5).unwrap());
        assert_ne!(a, im.with_gaussian_noise(30.0, 6).unwrap());
        assert!(a.pixels().iter().all(|p| (0.0..=255.0).contains(p)));
        assert!(im.with_gaussian_noise(-1.0, 0).is_err());
    }

    #[test]
    fn pgm_round_trip() {
        let img = GrayImage::from_fn(3, 5, |r, c| (r * 40 + c * 7) as f64).unwrap();
        let mut buf = Vec::new();
        img.write_pgm(&mut buf).unwrap();
        assert!(buf.starts_with(b"P5\n5 3\n255\n"));
        assert_eq!(GrayImage::read_pgm(buf.as_slice()).unwrap(), img);
    }

    #[test]
    fn reads_ascii_pgm_with_comments() {
        let src = b"P2\n# a comment\n2 2\n255\n0 10\n200 255\n";
        let img = GrayImage::read_pgm(&src[..]).unwrap();
        assert_eq!(img.pixels(), &[0.0, 10.0, 200.0, 255.0]);
    }

    #[test]
    fn rescales_small_maxval() {
        let src = b"P2 1 2 15 0 15";
        let img = GrayImage::read_pgm(&src[..]).unwrap();
        assert_eq!(img.pixels(), &[0.0, 255.0]);
    }

    #[test]
    fn rejects_truncated_raster() {
        let src = b"P5\n4 4\n255\n\x00\x01";
        assert!(GrayImage::read_pgm(&src[..]).is_err());
        assert!(GrayImage::read_pgm(&b"P6\n1 1\n255\n\x00"[..]).is_err());
    }

    #[test]
    fn center_crop() {
        let img = GrayImage::from_fn(19, 17, |r, c| (r * 17 + c) as f64).unwrap();
        let cropped = img.center_crop_to_multiple(8).unwrap();
        assert_eq!((cropped.height(), cropped.width()), (16, 16));
        assert_eq!(cropped.get(0, 0), img.get(1, 0));
        assert!(img.center_crop_to_multiple(32).is_err());
    }

    #[test]
    fn rejects_bad_pixel_count() {
        assert!(GrayImage::new(2, 2, vec![0.0; 3]).is_err());
        assert!(GrayImage::new(0, 2, vec![]).is_err());
    }
}

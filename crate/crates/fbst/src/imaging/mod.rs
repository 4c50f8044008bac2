//! Image representation, normalization, synthetic noise, and PSNR.
//!
//! Images are real-valued 2-D sample grids in double precision with cyclic
//! boundary semantics. File samples are scaled to `[0, 1]`, but nothing here
//! clamps values: noisy images may leave that range and are only quantized
//! back on save.

mod patch;
mod pgm;

pub use patch::{build_patch_matrix, Boundary, PatchMatrix};
pub use pgm::{load_pgm, save_pgm};

use crate::error::{Error, Result};
use ndarray::Array2;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// A real-valued grayscale image, row-major, double precision.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    data: Array2<f64>,
}

impl Image {
    /// Wraps a sample grid, rejecting empty or non-finite data.
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::DimensionMismatch(
                "image dimensions must be at least 1x1".into(),
            ));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::DimensionMismatch(
                "image contains non-finite samples".into(),
            ));
        }
        Ok(Self { data })
    }

    /// Builds an image by evaluating `f(row, col)`.
    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        Self::new(Array2::from_shape_fn((height, width), |(i, j)| f(i, j)))
    }

    pub fn height(&self) -> usize {
        self.data.nrows()
    }

    pub fn width(&self) -> usize {
        self.data.ncols()
    }

    pub fn num_pixels(&self) -> usize {
        self.data.len()
    }

    pub fn samples(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Rescales an image to unit Euclidean norm.
///
/// Returns the normalized image and the scale that restores the original
/// (`original = scale * normalized`). Fails on an identically zero image.
pub fn normalize_unit_norm(image: &Image) -> Result<(Image, f64)> {
    let norm = image.l2_norm();
    if norm == 0.0 {
        return Err(Error::ZeroImage);
    }
    let scaled = image.samples().mapv(|v| v / norm);
    Ok((Image::new(scaled)?, norm))
}

/// Deterministic Gaussian sampler: ChaCha8 keyed by the seed, uniform doubles
/// from the top 53 bits of each draw, normal deviates via the Box-Muller
/// transform. Reproducible across platforms for a fixed seed.
pub struct GaussianSampler {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform draw in (0, 1]; never zero, so the Box-Muller log is safe.
    fn uniform_open_closed(&mut self) -> f64 {
        (((self.rng.next_u64() >> 11) + 1) as f64) * (1.0 / 9007199254740992.0)
    }

    /// One standard normal deviate.
    pub fn next_standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform_open_closed();
        let u2 = self.uniform_open_closed();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }
}

/// Adds i.i.d. zero-mean Gaussian noise of standard deviation `sigma`.
///
/// Deterministic for a fixed seed. Samples are not clamped.
pub fn add_gaussian_noise(image: &Image, sigma: f64, seed: u64) -> Image {
    assert!(sigma >= 0.0, "sigma must be non-negative");
    if sigma == 0.0 {
        return image.clone();
    }
    let mut sampler = GaussianSampler::new(seed);
    let noisy = image
        .samples()
        .mapv(|v| v + sigma * sampler.next_standard_normal());
    Image { data: noisy }
}

/// Peak signal-to-noise ratio in decibels:
/// `20 log10(peak * sqrt(#pixels) / ||x - x_ref||_2)`.
///
/// Identical images yield `f64::INFINITY`.
pub fn psnr(x: &Image, x_ref: &Image, peak: f64) -> Result<f64> {
    if x.height() != x_ref.height() || x.width() != x_ref.width() {
        return Err(Error::DimensionMismatch(format!(
            "psnr inputs {}x{} vs {}x{}",
            x.height(),
            x.width(),
            x_ref.height(),
            x_ref.width()
        )));
    }
    let err_sq: f64 = x
        .samples()
        .iter()
        .zip(x_ref.samples().iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    if err_sq == 0.0 {
        return Ok(f64::INFINITY);
    }
    let n = x.num_pixels() as f64;
    Ok(20.0 * (peak * n.sqrt() / err_sq.sqrt()).log10())
}

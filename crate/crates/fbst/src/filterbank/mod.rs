//! The undecimated filter-bank transform: analysis and adjoint operators via
//! FFT cyclic convolution, the DFT-diagonal Gram solve, and the
//! pseudoinverse synthesis bank.
//!
//! A transform is a matrix `W` with `num_channels` rows of length
//! `filter_size^2`. Row `i` is turned into a 2-D impulse response by
//! [`filter_from_row`], and the analysis operator correlates the image with
//! each impulse response cyclically. With that pairing, channel `i` of
//! `analyze` equals row `i` of `W * X` for the unit-stride periodic patch
//! matrix `X`, entry for entry.

mod model_io;
mod montage;
mod spectrum;

pub use model_io::{load_model, save_model, write_sidecar, MODEL_FORMAT_VERSION, MODEL_MAGIC};
pub use montage::filter_montage;
pub use spectrum::{
    autocorrelation_spectrum, gram_eigenvalues, max_magnitude_coherence, spectrum_report,
    SpectrumReport, PR_TOLERANCE_FACTOR,
};

use crate::error::{Error, Result};
use crate::fft::{fft2_padded, fft2_real, ifft2_real_part};
use crate::imaging::Image;
use ndarray::{Array2, ArrayView1};
use rustfft::num_complex::Complex64;

/// An undecimated 2-D filter bank parameterized by a small matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBankTransform {
    num_channels: usize,
    filter_size: usize,
    fft_size: usize,
    w: Array2<f64>,
}

impl FilterBankTransform {
    /// Builds a transform from its row matrix.
    ///
    /// `fft_size` is the DFT grid used for regularization and certification;
    /// it must be at least `2 * filter_size - 1` so that grid sampling can
    /// certify the underlying trigonometric polynomial.
    pub fn new(w: Array2<f64>, filter_size: usize, fft_size: usize) -> Result<Self> {
        let num_channels = w.nrows();
        if num_channels == 0 || filter_size == 0 {
            return Err(Error::InvalidConfig(
                "need at least one channel and a positive filter size".into(),
            ));
        }
        if w.ncols() != filter_size * filter_size {
            return Err(Error::FilterLengthMismatch {
                expected: filter_size * filter_size,
                found: w.ncols(),
            });
        }
        if fft_size < 2 * filter_size - 1 {
            return Err(Error::GridTooSmall {
                grid: fft_size,
                min: 2 * filter_size - 1,
            });
        }
        if !w.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig("W contains non-finite entries".into()));
        }
        Ok(Self {
            num_channels,
            filter_size,
            fft_size,
            w,
        })
    }

    pub fn num_channels(&self) -> usize {
        self.num_channels
    }

    pub fn filter_size(&self) -> usize {
        self.filter_size
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.w
    }

    /// The 2-D impulse response of channel `i`.
    pub fn filter(&self, i: usize) -> Array2<f64> {
        filter_from_row(self.w.row(i), self.filter_size).expect("validated at construction")
    }

    /// All channel impulse responses.
    pub fn filters(&self) -> Vec<Array2<f64>> {
        (0..self.num_channels).map(|i| self.filter(i)).collect()
    }

    /// Euclidean norms of the transform rows.
    pub fn row_norms(&self) -> Vec<f64> {
        self.w
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }
}

/// A stack of per-channel coefficient images, all of one shape.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientStack {
    channels: Vec<Array2<f64>>,
}

impl CoefficientStack {
    pub fn new(channels: Vec<Array2<f64>>) -> Result<Self> {
        let first = channels
            .first()
            .ok_or_else(|| Error::DimensionMismatch("empty coefficient stack".into()))?;
        let shape = (first.nrows(), first.ncols());
        if !channels.iter().all(|c| (c.nrows(), c.ncols()) == shape) {
            return Err(Error::DimensionMismatch(
                "coefficient channels differ in shape".into(),
            ));
        }
        Ok(Self { channels })
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.channels[0].nrows(), self.channels[0].ncols())
    }

    pub fn channel(&self, i: usize) -> &Array2<f64> {
        &self.channels[i]
    }

    pub fn channels(&self) -> &[Array2<f64>] {
        &self.channels
    }

    /// Sum of squared entries across all channels.
    pub fn energy(&self) -> f64 {
        self.channels
            .iter()
            .map(|c| c.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    /// Number of nonzero entries across all channels.
    pub fn num_nonzero(&self) -> usize {
        self.channels
            .iter()
            .map(|c| c.iter().filter(|v| **v != 0.0).count())
            .sum()
    }

    /// Inner product with another stack of the same shape.
    pub fn dot(&self, other: &CoefficientStack) -> f64 {
        self.channels
            .iter()
            .zip(other.channels.iter())
            .map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| x * y).sum::<f64>())
            .sum()
    }
}

/// Reshapes a transform row into its 2-D impulse response.
///
/// The row is laid out in flipped raster order (matching the patch matrix),
/// so entry `a*K + b` lands at filter position `(K-1-a, K-1-b)`. This is the
/// only place the flip convention lives.
pub fn filter_from_row(row: ArrayView1<f64>, filter_size: usize) -> Result<Array2<f64>> {
    let k = filter_size;
    if row.len() != k * k {
        return Err(Error::FilterLengthMismatch {
            expected: k * k,
            found: row.len(),
        });
    }
    let mut h = Array2::<f64>::zeros((k, k));
    for a in 0..k {
        for b in 0..k {
            h[[k - 1 - a, k - 1 - b]] = row[a * k + b];
        }
    }
    Ok(h)
}

/// Inverse of [`filter_from_row`]: flattens an impulse response back into a
/// transform row.
pub fn row_from_filter(h: &Array2<f64>) -> Result<Vec<f64>> {
    let k = h.nrows();
    if h.ncols() != k {
        return Err(Error::DimensionMismatch("filter must be square".into()));
    }
    let mut row = vec![0.0; k * k];
    for a in 0..k {
        for b in 0..k {
            row[a * k + b] = h[[k - 1 - a, k - 1 - b]];
        }
    }
    Ok(row)
}

fn check_image_size(transform: &FilterBankTransform, height: usize, width: usize) -> Result<()> {
    let k = transform.filter_size;
    if height < k || width < k {
        return Err(Error::ImageSmallerThanFilter {
            height,
            width,
            filter_size: k,
        });
    }
    Ok(())
}

/// DFT of every channel filter zero-padded to `(rows, cols)`.
fn filter_spectra(
    transform: &FilterBankTransform,
    rows: usize,
    cols: usize,
) -> Vec<Array2<Complex64>> {
    (0..transform.num_channels)
        .map(|i| fft2_padded(&transform.filter(i), rows, cols))
        .collect()
}

/// Unnormalized Gram eigenvalue grid at an arbitrary rectangular size:
/// `lambda[k] = sum_i |DFT(h_i)[k]|^2`.
pub(crate) fn eigen_grid_rect(
    transform: &FilterBankTransform,
    rows: usize,
    cols: usize,
) -> Array2<f64> {
    let mut grid = Array2::<f64>::zeros((rows, cols));
    for spectrum in filter_spectra(transform, rows, cols) {
        grid.zip_mut_with(&spectrum, |g, s| *g += s.norm_sqr());
    }
    grid
}

/// Applies the analysis bank: channel `i` is the cyclic correlation of the
/// image with impulse response `h_i`, computed in the DFT domain.
pub fn analyze(transform: &FilterBankTransform, image: &Image) -> Result<CoefficientStack> {
    check_image_size(transform, image.height(), image.width())?;
    let x_hat = fft2_real(image.samples());
    let channels = filter_spectra(transform, image.height(), image.width())
        .into_iter()
        .map(|spectrum| {
            let mut prod = x_hat.clone();
            prod.zip_mut_with(&spectrum, |p, h| *p *= h.conj());
            ifft2_real_part(prod)
        })
        .collect();
    CoefficientStack::new(channels)
}

/// Applies the adjoint of [`analyze`]: the sum over channels of the cyclic
/// convolution of each coefficient image with its impulse response.
pub fn adjoint(transform: &FilterBankTransform, stack: &CoefficientStack) -> Result<Image> {
    if stack.num_channels() != transform.num_channels {
        return Err(Error::DimensionMismatch(format!(
            "stack has {} channels, transform has {}",
            stack.num_channels(),
            transform.num_channels
        )));
    }
    let (rows, cols) = stack.shape();
    check_image_size(transform, rows, cols)?;
    let mut acc = Array2::<Complex64>::zeros((rows, cols));
    for (spectrum, channel) in filter_spectra(transform, rows, cols)
        .into_iter()
        .zip(stack.channels())
    {
        let y_hat = fft2_real(channel);
        for ((i, j), a) in acc.indexed_iter_mut() {
            *a += spectrum[[i, j]] * y_hat[[i, j]];
        }
    }
    Image::new(ifft2_real_part(acc))
}

/// Solves `(H*H + lambda_r I) x = rhs` exactly in the DFT eigenbasis.
pub(crate) fn solve_gram_plus(
    transform: &FilterBankTransform,
    rhs: &Array2<f64>,
    lambda_r: f64,
) -> Result<Array2<f64>> {
    let (rows, cols) = (rhs.nrows(), rhs.ncols());
    let grid = eigen_grid_rect(transform, rows, cols);
    let lambda_max = grid.iter().cloned().fold(0.0_f64, f64::max);
    let shifted_min = grid.iter().cloned().fold(f64::INFINITY, f64::min) + lambda_r;
    if shifted_min <= PR_TOLERANCE_FACTOR * (lambda_max + lambda_r) {
        return Err(Error::SingularOperator { shifted_min });
    }
    let mut rhs_hat = fft2_real(rhs);
    for ((i, j), v) in rhs_hat.indexed_iter_mut() {
        *v /= grid[[i, j]] + lambda_r;
    }
    Ok(ifft2_real_part(rhs_hat))
}

/// Applies the regularized minimum-norm synthesis bank:
/// `(H*H + lambda_r I)^{-1} H* y`.
///
/// With `lambda_r = 0` this is the pseudoinverse, so
/// `pseudoinverse_apply(H, analyze(H, x), 0)` recovers `x` whenever the bank
/// is perfect reconstruction at the image size.
pub fn pseudoinverse_apply(
    transform: &FilterBankTransform,
    stack: &CoefficientStack,
    lambda_r: f64,
) -> Result<Image> {
    let back = adjoint(transform, stack)?;
    Image::new(solve_gram_plus(transform, back.samples(), lambda_r)?)
}

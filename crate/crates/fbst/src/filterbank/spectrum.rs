//! Gram-operator spectral analysis and perfect-reconstruction certification.
//!
//! The Gram operator of an undecimated cyclic bank is diagonalized by the
//! 2-D DFT; its eigenvalue at frequency bin `k` is the sum over channels of
//! the squared magnitude responses. Everything here reports eigenvalues in
//! the unnormalized-DFT convention (`lambda[k] = sum_i |DFT_N(h_i)[k]|^2`),
//! which makes a single delta filter come out as a flat grid of ones and is
//! the convention the cyclic solves use. Condition numbers are insensitive
//! to that choice.

use crate::error::{Error, Result};
use crate::fft::fft2_real;
use crate::filterbank::{eigen_grid_rect, FilterBankTransform};
use ndarray::Array2;

/// Relative tolerance for declaring an eigenvalue zero: an eigenvalue grid
/// certifies cyclic PR when `lambda_min > PR_TOLERANCE_FACTOR * lambda_max`.
pub const PR_TOLERANCE_FACTOR: f64 = 1e-10;

/// Frame bounds, condition number, and PR verdicts of a bank at one size.
#[derive(Debug, Clone)]
pub struct SpectrumReport {
    /// Gram eigenvalues on the `grid_size x grid_size` DFT grid.
    pub eigenvalue_grid: Array2<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Frequency bin attaining `lambda_min`; pinpoints common zeros.
    pub argmin: (usize, usize),
    /// `lambda_max / lambda_min`, infinite for a singular grid.
    pub condition_number: f64,
    /// Whether the cyclic bank is a frame at this size.
    pub cyclic_pr: bool,
    /// Whether the grid certifies the linear-convolution bank built from the
    /// same filters: requires `condition_number <= grid/(K-1) - 1`.
    pub linear_pr_certified: bool,
    /// The certification threshold `grid/(K-1) - 1` (infinite for K = 1).
    pub certification_threshold: f64,
}

/// Gram eigenvalues of the bank on an `n x n` DFT grid.
///
/// Requires `n >= filter_size` so the zero-padded filters fit the grid.
pub fn gram_eigenvalues(transform: &FilterBankTransform, n: usize) -> Result<Array2<f64>> {
    if n < transform.filter_size() {
        return Err(Error::GridTooSmall {
            grid: n,
            min: transform.filter_size(),
        });
    }
    Ok(eigen_grid_rect(transform, n, n))
}

/// The same spectrum computed through the summed channel autocorrelations.
///
/// The Gram impulse response `sum_i (h_i corr h_i)` has support
/// `(2K-1) x (2K-1)`; sampling its transform on the `n x n` DFT grid must
/// reproduce [`gram_eigenvalues`] exactly. Requires `n >= 2K - 1` so the
/// autocorrelation support fits without aliasing.
pub fn autocorrelation_spectrum(transform: &FilterBankTransform, n: usize) -> Result<Array2<f64>> {
    let k = transform.filter_size();
    if n < 2 * k - 1 {
        return Err(Error::GridTooSmall { grid: n, min: 2 * k - 1 });
    }
    // Dense autocorrelation, summed over channels, laid out cyclically.
    let mut gram_impulse = Array2::<f64>::zeros((n, n));
    for i in 0..transform.num_channels() {
        let h = transform.filter(i);
        for d1 in -(k as isize - 1)..=(k as isize - 1) {
            for d2 in -(k as isize - 1)..=(k as isize - 1) {
                let mut acc = 0.0;
                for l1 in 0..k as isize {
                    for l2 in 0..k as isize {
                        let m1 = l1 - d1;
                        let m2 = l2 - d2;
                        if (0..k as isize).contains(&m1) && (0..k as isize).contains(&m2) {
                            acc += h[[l1 as usize, l2 as usize]] * h[[m1 as usize, m2 as usize]];
                        }
                    }
                }
                let r1 = d1.rem_euclid(n as isize) as usize;
                let r2 = d2.rem_euclid(n as isize) as usize;
                gram_impulse[[r1, r2]] += acc;
            }
        }
    }
    // Its DFT is real and non-negative up to rounding.
    Ok(fft2_real(&gram_impulse).mapv(|v| v.re))
}

/// Frame bounds and PR certification of the bank at image size `n`.
///
/// Requires `n >= 2K - 1`, the sampling density needed for the
/// linear-convolution certificate to be meaningful.
pub fn spectrum_report(transform: &FilterBankTransform, n: usize) -> Result<SpectrumReport> {
    let k = transform.filter_size();
    if n < 2 * k - 1 {
        return Err(Error::GridTooSmall { grid: n, min: 2 * k - 1 });
    }
    let grid = gram_eigenvalues(transform, n)?;
    let mut lambda_min = f64::INFINITY;
    let mut lambda_max = 0.0_f64;
    let mut argmin = (0, 0);
    for ((i, j), &v) in grid.indexed_iter() {
        if v < lambda_min {
            lambda_min = v;
            argmin = (i, j);
        }
        lambda_max = lambda_max.max(v);
    }
    let cyclic_pr = lambda_min > PR_TOLERANCE_FACTOR * lambda_max;
    let condition_number = if lambda_min > 0.0 {
        lambda_max / lambda_min
    } else {
        f64::INFINITY
    };
    let certification_threshold = if k > 1 {
        n as f64 / (k - 1) as f64 - 1.0
    } else {
        f64::INFINITY
    };
    let linear_pr_certified = cyclic_pr && condition_number <= certification_threshold;
    Ok(SpectrumReport {
        eigenvalue_grid: grid,
        lambda_min,
        lambda_max,
        argmin,
        condition_number,
        cyclic_pr,
        linear_pr_certified,
        certification_threshold,
    })
}

/// Largest pairwise coherence between the squared magnitude responses of the
/// channel filters on the bank's own grid, with the attaining pair.
///
/// Returns `None` for single-channel banks. This is the quantity the
/// coherence regularizer penalizes; shifted copies of one filter score 1.
pub fn max_magnitude_coherence(transform: &FilterBankTransform) -> Option<(f64, usize, usize)> {
    let n_c = transform.num_channels();
    if n_c < 2 {
        return None;
    }
    let n = transform.fft_size();
    let mags: Vec<Vec<f64>> = (0..n_c)
        .map(|i| {
            let single = FilterBankTransform::new(
                transform
                    .weights()
                    .row(i)
                    .to_owned()
                    .insert_axis(ndarray::Axis(0)),
                transform.filter_size(),
                n,
            )
            .expect("row of a valid transform");
            eigen_grid_rect(&single, n, n).into_iter().collect()
        })
        .collect();
    let norms: Vec<f64> = mags
        .iter()
        .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mut best = (0.0_f64, 0, 1);
    for i in 0..n_c {
        for j in (i + 1)..n_c {
            if norms[i] == 0.0 || norms[j] == 0.0 {
                continue;
            }
            let dot: f64 = mags[i].iter().zip(mags[j].iter()).map(|(a, b)| a * b).sum();
            let c = dot / (norms[i] * norms[j]);
            if c > best.0 {
                best = (c, i, j);
            }
        }
    }
    Some(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filterbank::row_from_filter;
    use ndarray::Array2;

    fn transform_from_filters(filters: &[Array2<f64>], fft_size: usize) -> FilterBankTransform {
        let k = filters[0].nrows();
        let mut w = Array2::<f64>::zeros((filters.len(), k * k));
        for (i, h) in filters.iter().enumerate() {
            for (j, v) in row_from_filter(h).unwrap().into_iter().enumerate() {
                w[[i, j]] = v;
            }
        }
        FilterBankTransform::new(w, k, fft_size).unwrap()
    }

    fn random_transform(num_channels: usize, k: usize, seed: u64) -> FilterBankTransform {
        let mut sampler = crate::imaging::GaussianSampler::new(seed);
        let w = Array2::from_shape_fn((num_channels, k * k), |_| sampler.next_standard_normal());
        FilterBankTransform::new(w, k, 4 * k).unwrap()
    }

    #[test]
    fn delta_filter_spectrum_is_flat_ones() {
        let mut h = Array2::<f64>::zeros((2, 2));
        h[[0, 0]] = 1.0;
        let t = transform_from_filters(&[h], 8);
        let grid = gram_eigenvalues(&t, 8).unwrap();
        for v in &grid {
            assert!((v - 1.0).abs() < 1e-12);
        }
        let auto = autocorrelation_spectrum(&t, 8).unwrap();
        for v in &auto {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicated_channel_doubles_spectrum() {
        let mut h = Array2::<f64>::zeros((3, 3));
        h[[0, 0]] = 0.5;
        h[[1, 2]] = -1.5;
        h[[2, 1]] = 0.25;
        let single = transform_from_filters(&[h.clone()], 8);
        let double = transform_from_filters(&[h.clone(), h], 8);
        let s1 = autocorrelation_spectrum(&single, 8).unwrap();
        let s2 = autocorrelation_spectrum(&double, 8).unwrap();
        for (a, b) in s1.iter().zip(s2.iter()) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dual_path_spectra_agree() {
        let t = random_transform(4, 3, 71);
        let g = gram_eigenvalues(&t, 12).unwrap();
        let a = autocorrelation_spectrum(&t, 12).unwrap();
        for (x, y) in g.iter().zip(a.iter()) {
            assert!((x - y).abs() < 1e-10, "dual path mismatch: {x} vs {y}");
        }
    }

    #[test]
    fn zero_mean_filters_fail_at_dc() {
        let mut h1 = Array2::<f64>::zeros((2, 2));
        h1[[0, 0]] = 1.0;
        h1[[0, 1]] = -1.0;
        let mut h2 = Array2::<f64>::zeros((2, 2));
        h2[[0, 0]] = 1.0;
        h2[[1, 0]] = -1.0;
        let t = transform_from_filters(&[h1, h2], 8);
        let report = spectrum_report(&t, 16).unwrap();
        assert!(!report.cyclic_pr);
        assert_eq!(report.argmin, (0, 0));
        assert!(report.lambda_min.abs() < 1e-12);
        assert!(report.condition_number.is_infinite());
        assert!(!report.linear_pr_certified);
    }

    /// Two-tap filter [1, t] embedded in a K x K grid; its condition number
    /// on an even grid is exactly ((1+t)/(1-t))^2.
    fn two_tap_bank(k: usize, t: f64) -> FilterBankTransform {
        let mut h = Array2::<f64>::zeros((k, k));
        h[[0, 0]] = 1.0;
        h[[0, 1]] = t;
        transform_from_filters(&[h], 4 * k)
    }

    #[test]
    fn certification_inequality_plug_ins() {
        // kappa = 2 needs (1+t)/(1-t) = sqrt(2).
        let sqrt2 = 2.0_f64.sqrt();
        let t = (sqrt2 - 1.0) / (sqrt2 + 1.0);
        let bank = two_tap_bank(8, t);

        let r256 = spectrum_report(&bank, 256).unwrap();
        assert!((r256.condition_number - 2.0).abs() < 1e-9);
        assert!((r256.certification_threshold - (256.0 / 7.0 - 1.0)).abs() < 1e-12);
        assert!(r256.linear_pr_certified);

        // kappa = 2.9 at N = 32, K = 8: threshold 32/7 - 1 = 3.571...
        let kappa: f64 = 2.9;
        let ratio = kappa.sqrt();
        let t29 = (ratio - 1.0) / (ratio + 1.0);
        let bank29 = two_tap_bank(8, t29);
        let r32 = spectrum_report(&bank29, 32).unwrap();
        assert!((r32.condition_number - 2.9).abs() < 1e-9);
        assert!((r32.certification_threshold - (32.0 / 7.0 - 1.0)).abs() < 1e-12);
        assert!(r32.linear_pr_certified);

        // Same bank fails once kappa exceeds the threshold: N = 16 gives
        // threshold 16/7 - 1 = 1.286 < 2.9.
        let r16 = spectrum_report(&bank29, 16).unwrap();
        assert!(r16.cyclic_pr);
        assert!(!r16.linear_pr_certified);
    }

    #[test]
    fn nested_grid_refinement_tightens_lambda_min() {
        let t = random_transform(2, 3, 73);
        let coarse = spectrum_report(&t, 8).unwrap();
        let fine = spectrum_report(&t, 16).unwrap();
        assert!(fine.lambda_min <= coarse.lambda_min + 1e-12);
        assert!(fine.lambda_max >= coarse.lambda_max - 1e-12);
    }

    #[test]
    fn grid_too_small_rejected() {
        let t = random_transform(1, 4, 79);
        assert!(matches!(
            autocorrelation_spectrum(&t, 6),
            Err(Error::GridTooSmall { min: 7, .. })
        ));
        assert!(matches!(
            gram_eigenvalues(&t, 3),
            Err(Error::GridTooSmall { min: 4, .. })
        ));
    }
}

//! Shared 2-D FFT plumbing on top of `rustfft`.
//!
//! All transforms are unnormalized in the forward direction; the inverse
//! divides by the number of samples, so `ifft2(fft2(x)) == x`.

use ndarray::Array2;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

type PlanKey = (usize, bool);
type PlanMap = HashMap<PlanKey, Arc<dyn Fft<f64>>>;

/// Process-wide plan cache; rustfft plans are cheap to share via Arc.
static PLANS: Mutex<Option<PlanMap>> = Mutex::new(None);

fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    let mut guard = PLANS.lock().unwrap();
    let map = guard.get_or_insert_with(HashMap::new);
    map.entry((len, direction == FftDirection::Forward))
        .or_insert_with(|| FftPlanner::new().plan_fft(len, direction))
        .clone()
}

fn transform_rows(data: &mut Array2<Complex64>, direction: FftDirection) {
    let cols = data.ncols();
    if cols == 1 {
        return;
    }
    let fft = plan(cols, direction);
    for mut row in data.rows_mut() {
        let slice = row.as_slice_mut().expect("row-major layout");
        fft.process(slice);
    }
}

fn transform_cols(data: &mut Array2<Complex64>, direction: FftDirection) {
    let rows = data.nrows();
    if rows == 1 {
        return;
    }
    let fft = plan(rows, direction);
    let mut buf = vec![Complex64::ZERO; rows];
    for j in 0..data.ncols() {
        for i in 0..rows {
            buf[i] = data[[i, j]];
        }
        fft.process(&mut buf);
        for i in 0..rows {
            data[[i, j]] = buf[i];
        }
    }
}

/// In-place unnormalized forward 2-D FFT.
pub fn fft2_inplace(data: &mut Array2<Complex64>) {
    transform_rows(data, FftDirection::Forward);
    transform_cols(data, FftDirection::Forward);
}

/// In-place inverse 2-D FFT, normalized by 1/(rows*cols).
pub fn ifft2_inplace(data: &mut Array2<Complex64>) {
    transform_rows(data, FftDirection::Inverse);
    transform_cols(data, FftDirection::Inverse);
    let scale = 1.0 / (data.nrows() * data.ncols()) as f64;
    data.mapv_inplace(|v| v * scale);
}

/// Forward 2-D FFT of a real array.
pub fn fft2_real(data: &Array2<f64>) -> Array2<Complex64> {
    let mut out = data.mapv(|v| Complex64::new(v, 0.0));
    fft2_inplace(&mut out);
    out
}

/// Inverse 2-D FFT keeping only the real part.
pub fn ifft2_real_part(mut data: Array2<Complex64>) -> Array2<f64> {
    ifft2_inplace(&mut data);
    data.mapv(|v| v.re)
}

/// Forward 2-D FFT of a small real block zero-padded to `(rows, cols)`.
///
/// The block is placed at the origin, which matches the cyclic embedding
/// used for filter impulse responses.
pub fn fft2_padded(block: &Array2<f64>, rows: usize, cols: usize) -> Array2<Complex64> {
    assert!(block.nrows() <= rows && block.ncols() <= cols);
    let mut padded = Array2::<Complex64>::zeros((rows, cols));
    for ((i, j), &v) in block.indexed_iter() {
        padded[[i, j]] = Complex64::new(v, 0.0);
    }
    fft2_inplace(&mut padded);
    padded
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn roundtrip_identity() {
        let x = array![[1.0, -2.0, 3.0], [0.5, 0.0, -1.0]];
        let back = ifft2_real_part(fft2_real(&x));
        for (a, b) in x.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dc_bin_is_sum() {
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        let f = fft2_real(&x);
        assert!((f[[0, 0]].re - 10.0).abs() < 1e-12);
        assert!(f[[0, 0]].im.abs() < 1e-12);
    }

    #[test]
    fn parseval_unnormalized() {
        let x = array![[1.0, -1.0, 0.5, 2.0], [0.0, 1.5, -2.0, 1.0]];
        let f = fft2_real(&x);
        let spatial: f64 = x.iter().map(|v| v * v).sum();
        let spectral: f64 = f.iter().map(|v| v.norm_sqr()).sum();
        assert!((spectral - spatial * 8.0).abs() < 1e-9);
    }
}

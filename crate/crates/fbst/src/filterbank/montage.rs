//! Filter montage rendering for visual inspection.

use crate::error::Result;
use crate::filterbank::FilterBankTransform;
use crate::imaging::Image;
use ndarray::Array2;

/// Tiles the channel impulse responses onto one image.
///
/// Layout: `ceil(sqrt(N_c))` columns with 1-pixel black separators. Each
/// filter is min-max normalized to `[0, 1]` for display only; a constant
/// filter renders as mid-gray.
pub fn filter_montage(transform: &FilterBankTransform) -> Result<Image> {
    let n_c = transform.num_channels();
    let k = transform.filter_size();
    let cols = (n_c as f64).sqrt().ceil() as usize;
    let rows = n_c.div_ceil(cols);
    let height = rows * k + rows - 1;
    let width = cols * k + cols - 1;
    let mut canvas = Array2::<f64>::zeros((height, width));
    for i in 0..n_c {
        let h = transform.filter(i);
        let lo = h.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = h.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        let tile_row = (i / cols) * (k + 1);
        let tile_col = (i % cols) * (k + 1);
        for a in 0..k {
            for b in 0..k {
                let v = if span > 0.0 {
                    (h[[a, b]] - lo) / span
                } else {
                    0.5
                };
                canvas[[tile_row + a, tile_col + b]] = v;
            }
        }
    }
    Image::new(canvas)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn montage_dimensions_and_range() {
        let mut w = Array2::<f64>::zeros((5, 9));
        for i in 0..5 {
            w[[i, i]] = 1.0 + i as f64;
            w[[i, 8 - i]] = -0.5;
        }
        let t = FilterBankTransform::new(w, 3, 12).unwrap();
        let m = filter_montage(&t).unwrap();
        // 5 channels -> 3 columns x 2 rows of 3x3 tiles with separators.
        assert_eq!(m.height(), 2 * 3 + 1);
        assert_eq!(m.width(), 3 * 3 + 2);
        assert!(m.samples().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn constant_filter_renders_mid_gray() {
        let w = Array2::from_elem((1, 4), 0.7);
        let t = FilterBankTransform::new(w, 2, 4).unwrap();
        let m = filter_montage(&t).unwrap();
        assert!(m.samples().iter().all(|v| (v - 0.5).abs() < 1e-12));
    }
}

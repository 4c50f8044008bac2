//! Patch-matrix extraction with periodic boundaries.
//!
//! This is the dense, index-based reference path for the convolutional
//! operators: applying a transform row-by-row to the columns produced here
//! must match the FFT implementation exactly, so everything in this file is
//! deliberately loop-based and free of transforms.

use crate::error::{Error, Result};
use crate::imaging::Image;
use ndarray::Array2;

/// Boundary handling for patch extraction. Only periodic extraction is
/// implemented; it is what cyclic convolution corresponds to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
}

/// All stride-`s` patches of an image, vectorized into columns.
///
/// Column `j1 * ceil(width/s) + j2` holds the `K x K` patch whose top-left
/// corner sits at `(s*j1, s*j2)`, wrapped periodically. Entries are stored in
/// flipped raster order: element `a*K + b` is the patch pixel at
/// `(K-1-a, K-1-b)`, so the patch's top-left pixel is the final element.
#[derive(Debug, Clone)]
pub struct PatchMatrix {
    pub patch_size: usize,
    pub stride: usize,
    pub boundary: Boundary,
    pub data: Array2<f64>,
}

impl PatchMatrix {
    pub fn num_patches(&self) -> usize {
        self.data.ncols()
    }
}

/// Extracts the periodic patch matrix with patch size `patch_size` and
/// stride `stride`.
///
/// The patch grid has `ceil(dim/stride)` rows/columns per axis, which equals
/// `dim/stride` whenever the stride divides the dimension; non-dividing
/// strides simply wrap the trailing patches.
pub fn build_patch_matrix(image: &Image, patch_size: usize, stride: usize) -> Result<PatchMatrix> {
    if patch_size == 0 || stride == 0 {
        return Err(Error::InvalidConfig(
            "patch size and stride must be positive".into(),
        ));
    }
    let (height, width) = (image.height(), image.width());
    if patch_size > height || patch_size > width {
        return Err(Error::ImageSmallerThanFilter {
            height,
            width,
            filter_size: patch_size,
        });
    }
    let rows_of_patches = height.div_ceil(stride);
    let cols_of_patches = width.div_ceil(stride);
    let k = patch_size;
    let samples = image.samples();
    let mut data = Array2::<f64>::zeros((k * k, rows_of_patches * cols_of_patches));
    for j1 in 0..rows_of_patches {
        for j2 in 0..cols_of_patches {
            let col = j1 * cols_of_patches + j2;
            for a in 0..k {
                let row = (stride * j1 + k - 1 - a) % height;
                for b in 0..k {
                    let col_px = (stride * j2 + k - 1 - b) % width;
                    data[[a * k + b, col]] = samples[[row, col_px]];
                }
            }
        }
    }
    Ok(PatchMatrix {
        patch_size,
        stride,
        boundary: Boundary::Periodic,
        data,
    })
}

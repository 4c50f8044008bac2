//! The convolutional analysis operator against its dense patch-matrix twin.
//!
//! Channel i of `analyze` must equal row i of `W * X` where `X` is the
//! unit-stride periodic patch matrix, entry for entry; and the adjoint must
//! satisfy the inner-product identity. Both are checked on random data.
//!
//! Run with: cargo run --example patch_oracle

use fbst::imaging::GaussianSampler;
use fbst::{adjoint, analyze, build_patch_matrix, CoefficientStack, FilterBankTransform, Image};
use ndarray::Array2;

fn main() {
    let mut sampler = GaussianSampler::new(2024);
    let (num_channels, k, rows, cols) = (5, 3, 12, 14);

    let w = Array2::from_shape_fn((num_channels, k * k), |_| sampler.next_standard_normal());
    let bank = FilterBankTransform::new(w.clone(), k, 4 * k).unwrap();
    let image = Image::new(Array2::from_shape_fn((rows, cols), |_| {
        sampler.next_standard_normal()
    }))
    .unwrap();

    // FFT route.
    let stack = analyze(&bank, &image).unwrap();
    // Dense route: multiply the transform into the patch matrix.
    let patches = build_patch_matrix(&image, k, 1).unwrap();
    let wx = w.dot(&patches.data);

    let mut max_err = 0.0_f64;
    for i in 0..num_channels {
        for r in 0..rows {
            for c in 0..cols {
                let diff = (stack.channel(i)[[r, c]] - wx[[i, r * cols + c]]).abs();
                max_err = max_err.max(diff);
            }
        }
    }
    println!("analysis vs dense patch product: max |diff| = {max_err:.3e}");

    // Adjoint identity <Hx, y> = <x, H*y> on random coefficients.
    let y = CoefficientStack::new(
        (0..num_channels)
            .map(|_| Array2::from_shape_fn((rows, cols), |_| sampler.next_standard_normal()))
            .collect(),
    )
    .unwrap();
    let lhs = stack.dot(&y);
    let back = adjoint(&bank, &y).unwrap();
    let rhs: f64 = image
        .samples()
        .iter()
        .zip(back.samples().iter())
        .map(|(a, b)| a * b)
        .sum();
    println!("adjoint identity: <Hx,y> = {lhs:.9}, <x,H*y> = {rhs:.9}");
    println!("relative gap: {:.3e}", ((lhs - rhs) / rhs).abs());
}

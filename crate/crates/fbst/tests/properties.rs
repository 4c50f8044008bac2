//! Property tests for the operator and I/O invariants.

use fbst::imaging::{build_patch_matrix, GaussianSampler};
use fbst::{analyze, adjoint, psnr, CoefficientStack, FilterBankTransform, Image};
use ndarray::Array2;
use proptest::prelude::*;

fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut sampler = GaussianSampler::new(seed);
    Array2::from_shape_fn((rows, cols), |_| sampler.next_standard_normal())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Analysis equals the dense patch-matrix product for any bank shape
    /// with K up to 8 on images up to 16x16.
    #[test]
    fn analysis_equals_patch_product(
        k in 1usize..=8,
        n_c in 1usize..=6,
        extra_rows in 0usize..=8,
        extra_cols in 0usize..=8,
        seed in 0u64..1_000_000,
    ) {
        let rows = (k + extra_rows).min(16);
        let cols = (k + extra_cols).min(16);
        let w = random_matrix(n_c, k * k, seed);
        let bank = FilterBankTransform::new(w.clone(), k, 4 * k).unwrap();
        let image = Image::new(random_matrix(rows, cols, seed ^ 0xabcd)).unwrap();
        let stack = analyze(&bank, &image).unwrap();
        let wx = w.dot(&build_patch_matrix(&image, k, 1).unwrap().data);
        for i in 0..n_c {
            for r in 0..rows {
                for c in 0..cols {
                    let diff = (stack.channel(i)[[r, c]] - wx[[i, r * cols + c]]).abs();
                    prop_assert!(diff < 1e-10, "channel {} pixel ({},{}): {}", i, r, c, diff);
                }
            }
        }
    }

    /// <Hx, y> = <x, H*y> for random banks, images, and stacks.
    #[test]
    fn adjoint_identity(
        k in 1usize..=5,
        n_c in 1usize..=5,
        size in 6usize..=12,
        seed in 0u64..1_000_000,
    ) {
        let bank = FilterBankTransform::new(
            random_matrix(n_c, k * k, seed),
            k,
            4 * k,
        ).unwrap();
        let image = Image::new(random_matrix(size, size, seed ^ 0x1111)).unwrap();
        let stack = CoefficientStack::new(
            (0..n_c).map(|i| random_matrix(size, size, seed ^ (0x2200 + i as u64))).collect(),
        ).unwrap();
        let lhs = analyze(&bank, &image).unwrap().dot(&stack);
        let back = adjoint(&bank, &stack).unwrap();
        let rhs: f64 = image.samples().iter().zip(back.samples().iter()).map(|(a, b)| a * b).sum();
        let scale = lhs.abs().max(rhs.abs()).max(1e-12);
        prop_assert!((lhs - rhs).abs() / scale < 1e-10);
    }

    /// Unit-stride periodic extraction replicates each pixel K^2 times.
    #[test]
    fn unit_stride_patch_energy(
        k in 1usize..=6,
        size in 6usize..=14,
        seed in 0u64..1_000_000,
    ) {
        prop_assume!(k <= size);
        let image = Image::new(random_matrix(size, size, seed)).unwrap();
        let x = build_patch_matrix(&image, k, 1).unwrap();
        let image_energy: f64 = image.samples().iter().map(|v| v * v).sum();
        let patch_energy: f64 = x.data.iter().map(|v| v * v).sum();
        let expected = (k * k) as f64 * image_energy;
        prop_assert!((patch_energy - expected).abs() < 1e-9 * expected.max(1.0));
    }

    /// save -> load is the identity on 8-bit-quantized data.
    #[test]
    fn pgm_roundtrip_identity(
        rows in 1usize..=12,
        cols in 1usize..=12,
        seed in 0u64..1_000_000,
    ) {
        let mut sampler = GaussianSampler::new(seed);
        let img = Image::from_fn(rows, cols, |_, _| {
            let level = ((sampler.next_standard_normal().abs() * 64.0) as usize).min(255);
            level as f64 / 255.0
        }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.pgm");
        fbst::save_pgm(&img, &path).unwrap();
        let back = fbst::load_pgm(&path).unwrap();
        prop_assert_eq!(img, back);
    }

    /// PSNR is invariant to a joint constant shift of both images.
    #[test]
    fn psnr_joint_shift_invariance(
        size in 2usize..=10,
        shift in -0.5f64..0.5,
        seed in 0u64..1_000_000,
    ) {
        let a = Image::new(random_matrix(size, size, seed)).unwrap();
        let b = Image::new(random_matrix(size, size, seed ^ 0x77)).unwrap();
        let a2 = Image::new(a.samples().mapv(|v| v + shift)).unwrap();
        let b2 = Image::new(b.samples().mapv(|v| v + shift)).unwrap();
        let p1 = psnr(&a, &b, 1.0).unwrap();
        let p2 = psnr(&a2, &b2, 1.0).unwrap();
        prop_assert!((p1 - p2).abs() < 1e-9);
    }

    /// Hard thresholding never grows magnitudes and preserves shape.
    #[test]
    fn hard_threshold_is_contractive(
        len in 1usize..=32,
        nu in 0.0f64..2.0,
        seed in 0u64..1_000_000,
    ) {
        let mut sampler = GaussianSampler::new(seed);
        let t: Vec<f64> = (0..len).map(|_| sampler.next_standard_normal()).collect();
        let z = fbst::hard_threshold(&t, nu);
        prop_assert_eq!(z.len(), t.len());
        for (a, b) in t.iter().zip(z.iter()) {
            prop_assert!(*b == 0.0 || b == a);
            prop_assert!(b.abs() <= a.abs());
        }
    }
}

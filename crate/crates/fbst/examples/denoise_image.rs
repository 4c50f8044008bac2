//! Train a bank on one scene, then denoise a different noisy scene with it.
//!
//! Run with: cargo run --example denoise_image

use fbst::learning::TrainingSet;
use fbst::{
    add_gaussian_noise, denoise_iterative, denoise_threshold, learn, normalize_unit_norm, psnr,
    DenoiseConfig, DenoiseMode, Image, LearnConfig,
};

fn scene(n: usize, variant: u8) -> Image {
    let pi = std::f64::consts::PI;
    Image::from_fn(n, n, |i, j| {
        let x = j as f64 / n as f64;
        let y = i as f64 / n as f64;
        let mut v = match variant {
            0 => 0.35 + 0.3 * x + 0.15 * y,
            _ => 0.6 - 0.25 * y + 0.1 * x,
        };
        let (cx, cy, r) = if variant == 0 {
            (0.3, 0.35, 0.18)
        } else {
            (0.6, 0.35, 0.2)
        };
        if ((x - cx).powi(2) + (y - cy).powi(2)).sqrt() < r {
            v = if variant == 0 { 0.85 } else { 0.25 };
        }
        if variant == 0 && x > 0.55 && x < 0.8 && y > 0.15 && y < 0.45 {
            v = 0.2;
        }
        if variant == 1 && x > 0.1 && x < 0.35 && y > 0.55 && y < 0.8 {
            v = 0.8;
        }
        if y > 0.82 {
            v += 0.1 * ((30.0 + 6.0 * variant as f64) * x * pi).sin();
        }
        v.clamp(0.02, 0.98)
    })
    .unwrap()
}

fn main() {
    // Train on one scene at unit norm.
    let (train, _) = normalize_unit_norm(&scene(96, 0)).unwrap();
    let mut config = LearnConfig::new(32, 8);
    config.outer_iterations = 40;
    config.seed = 11;
    println!("training a 32-channel 8x8 bank (a few seconds)...");
    let bank = learn(&TrainingSet::Images(vec![train]), &config)
        .unwrap()
        .transform;

    // Corrupt a held-out scene.
    let clean = scene(96, 1);
    let sigma = 20.0 / 255.0;
    let noisy = add_gaussian_noise(&clean, sigma, 42);
    println!("input PSNR:     {:.2} dB", psnr(&noisy, &clean, 1.0).unwrap());

    // One-pass transform-domain thresholding.
    let config_t = DenoiseConfig::calibrated(DenoiseMode::Threshold, sigma, &bank);
    let thresholded = denoise_threshold(&bank, &noisy, config_t.nu).unwrap();
    println!(
        "threshold mode: {:.2} dB (nu = {:.3})",
        psnr(&thresholded, &clean, 1.0).unwrap(),
        config_t.nu
    );

    // Iterative regularized reconstruction.
    let config_i = DenoiseConfig::calibrated(DenoiseMode::Iterative, sigma, &bank);
    let iterative = denoise_iterative(&bank, &noisy, &config_i).unwrap();
    println!(
        "iterative mode: {:.2} dB ({} iterations, lambda_r = {:.1})",
        psnr(&iterative.image, &clean, 1.0).unwrap(),
        config_i.iterations,
        config_i.lambda_r
    );
}

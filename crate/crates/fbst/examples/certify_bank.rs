//! Frame bounds and perfect-reconstruction certificates for a few banks.
//!
//! Run with: cargo run --example certify_bank

use fbst::{init_transform, spectrum_report, FilterBankTransform, InitMode};
use ndarray::Array2;

fn describe(name: &str, bank: &FilterBankTransform, image_size: usize) {
    let report = spectrum_report(bank, image_size).expect("grid large enough");
    println!("{name} (N = {image_size})");
    println!("  lambda range: [{:.4e}, {:.4e}]", report.lambda_min, report.lambda_max);
    println!("  condition number: {:.4}", report.condition_number);
    println!("  cyclic PR: {}", report.cyclic_pr);
    println!(
        "  linear PR: certified = {} (threshold {:.3})",
        report.linear_pr_certified, report.certification_threshold
    );
    println!();
}

fn main() {
    // A single delta filter: the identity bank, flat spectrum of ones.
    let mut delta = Array2::<f64>::zeros((1, 16));
    delta[[0, 15]] = 1.0;
    let identity = FilterBankTransform::new(delta, 4, 16).unwrap();
    describe("single delta filter", &identity, 64);

    // A two-tap lowpass [1, 0.5]: well conditioned, certifiable.
    let mut lowpass = Array2::<f64>::zeros((1, 16));
    lowpass[[0, 15]] = 1.0;
    lowpass[[0, 14]] = 0.5;
    let lowpass = FilterBankTransform::new(lowpass, 4, 16).unwrap();
    describe("two-tap lowpass", &lowpass, 64);

    // A derivative filter [1, -1]: zero response at DC, so no frame.
    let mut derivative = Array2::<f64>::zeros((1, 16));
    derivative[[0, 15]] = 1.0;
    derivative[[0, 14]] = -1.0;
    let derivative = FilterBankTransform::new(derivative, 4, 16).unwrap();
    describe("horizontal derivative (zero mean)", &derivative, 64);

    // The full 2-D DCT bank: a tight frame, condition number one.
    let dct = init_transform(8, 64, InitMode::Dct, 0, 32).unwrap();
    describe("full 8x8 DCT bank (64 channels)", &dct, 256);
}

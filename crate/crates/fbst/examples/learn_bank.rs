//! Learn a small filter bank from a synthetic image and watch the objective.
//!
//! Run with: cargo run --example learn_bank

use fbst::learning::TrainingSet;
use fbst::{learn, normalize_unit_norm, Image, LearnConfig};

/// A piecewise-smooth scene with edges and an oriented texture band.
fn training_scene(n: usize) -> Image {
    let pi = std::f64::consts::PI;
    Image::from_fn(n, n, |i, j| {
        let x = j as f64 / n as f64;
        let y = i as f64 / n as f64;
        let mut v = 0.35 + 0.3 * x + 0.15 * y;
        if ((x - 0.35).powi(2) + (y - 0.4).powi(2)).sqrt() < 0.2 {
            v = 0.85;
        }
        if x > 0.6 && x < 0.85 && y > 0.15 && y < 0.4 {
            v = 0.2;
        }
        if y > 0.65 {
            v += 0.12 * (30.0 * (x + 0.5 * y) * pi).sin();
        }
        v.clamp(0.02, 0.98)
    })
    .unwrap()
}

fn main() {
    let (image, _) = normalize_unit_norm(&training_scene(64)).unwrap();

    let mut config = LearnConfig::new(16, 4);
    config.outer_iterations = 30;
    config.seed = 7;

    let outcome = learn(&TrainingSet::Images(vec![image]), &config).unwrap();

    println!("iter    total           f        j1        j2  sparsity");
    for row in outcome.trace.iter().step_by(5) {
        let b = row.breakdown;
        println!(
            "{:4}  {:9.4}  {:9.6}  {:8.3}  {:8.4}  {:8.5}",
            row.iteration, b.total, b.sparsification_error, b.j1, b.j2, b.sparsity_penalty
        );
    }

    let norms = outcome.transform.row_norms();
    println!(
        "\nlearned row norms: min {:.3}, max {:.3}",
        norms.iter().cloned().fold(f64::INFINITY, f64::min),
        norms.iter().cloned().fold(0.0_f64, f64::max),
    );
    let report = fbst::spectrum_report(&outcome.transform, 64).unwrap();
    println!(
        "frame bounds at N=64: [{:.1}, {:.1}], condition number {:.3}",
        report.lambda_min, report.lambda_max, report.condition_number
    );
}

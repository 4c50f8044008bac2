//! Transform learning: hard-threshold sparse coding alternated with
//! quasi-Newton updates of the filter matrix.
//!
//! One outer iteration holds the sparse codes fixed and minimizes the
//! regularized sparsification objective over `W` with L-BFGS, then
//! re-codes the training data with the updated bank. Both half-steps are
//! descent steps for the joint objective, so the recorded trace is
//! non-increasing.
//!
//! The sparsity penalty behind hard thresholding at level `nu` is
//! `(nu^2 / 2) * ||Z||_0`: zeroing a coefficient `t` costs `t^2 / 2`,
//! keeping it costs `nu^2 / 2`, so the exact minimizer keeps exactly the
//! coefficients with `t^2 > nu^2`.

mod lbfgs;
mod objective;

pub use lbfgs::{lbfgs_minimize, LbfgsOutcome, LbfgsParams};
pub use objective::{
    cross_moment_from_image, gram_moment_from_image, j1_value_grad, j2_value_grad,
    objective_and_grad, Moments, ObjectiveParts,
};

use crate::error::{Error, Result};
use crate::filterbank::{analyze, spectrum_report, CoefficientStack, FilterBankTransform};
use crate::imaging::{GaussianSampler, Image};
use ndarray::Array2;
use std::time::Instant;

/// Initialization for the filter matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// I.i.d. Gaussian entries of standard deviation `1/K`, resampled until
    /// the bank is a frame on the regularization grid.
    RandomGaussian,
    /// Rows drawn from the orthonormal 2-D DCT basis (raster order). With
    /// `N_c = K^2` this is a tight frame; channels beyond `K^2` fall back to
    /// Gaussian rows.
    Dct,
}

/// All learning hyperparameters.
#[derive(Debug, Clone)]
pub struct LearnConfig {
    pub num_channels: usize,
    pub filter_size: usize,
    /// Weight of the frame regularizer.
    pub mu: f64,
    /// Weight of the coherence regularizer.
    pub lambda: f64,
    /// Hard-threshold level for sparse coding.
    pub nu: f64,
    pub outer_iterations: usize,
    /// Regularization DFT grid; `4K` is ample for condition numbers up to 3.
    pub fft_size: usize,
    pub init: InitMode,
    pub seed: u64,
    pub lbfgs: LbfgsParams,
}

impl LearnConfig {
    /// The standard hyperparameters for a bank of the given shape.
    pub fn new(num_channels: usize, filter_size: usize) -> Self {
        Self {
            num_channels,
            filter_size,
            mu: 3.0,
            lambda: 7e-4,
            nu: 5.5e-3,
            outer_iterations: 1000,
            fft_size: 4 * filter_size,
            init: InitMode::RandomGaussian,
            seed: 0,
            lbfgs: LbfgsParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_channels == 0 || self.filter_size == 0 {
            return Err(Error::InvalidConfig(
                "channels and filter size must be positive".into(),
            ));
        }
        if self.mu.is_nan() || self.mu <= 0.0 || self.lambda < 0.0 || self.nu < 0.0 {
            return Err(Error::InvalidConfig(
                "need mu > 0, lambda >= 0, nu >= 0".into(),
            ));
        }
        if self.outer_iterations == 0 {
            return Err(Error::InvalidConfig(
                "outer_iterations must be positive".into(),
            ));
        }
        if self.fft_size < 2 * self.filter_size - 1 {
            return Err(Error::GridTooSmall {
                grid: self.fft_size,
                min: 2 * self.filter_size - 1,
            });
        }
        self.lbfgs.validate().map_err(Error::InvalidConfig)
    }
}

/// Training data: whole images (FFT moment path) or an explicit matrix of
/// vectorized patch samples (dense moment path).
#[derive(Debug, Clone)]
pub enum TrainingSet {
    Images(Vec<Image>),
    /// `K^2 x P` matrix of vectorized patches in the flipped patch layout.
    PatchSamples(Array2<f64>),
}

/// Per-iteration objective values.
#[derive(Debug, Clone, Copy)]
pub struct ObjectiveBreakdown {
    pub total: f64,
    pub sparsification_error: f64,
    pub j1: f64,
    pub j2: f64,
    /// `(nu^2 / 2) * ||Z||_0`.
    pub sparsity_penalty: f64,
}

/// One row of the learning trace.
#[derive(Debug, Clone, Copy)]
pub struct TraceRow {
    pub iteration: usize,
    pub breakdown: ObjectiveBreakdown,
    /// Seconds elapsed since the start of `learn` when this row was taken.
    pub wall_seconds: f64,
}

/// A learned transform plus its objective trace.
#[derive(Debug, Clone)]
pub struct LearnOutcome {
    pub transform: FilterBankTransform,
    pub trace: Vec<TraceRow>,
    /// Outer iterations whose transform update ended in a failed line search.
    pub line_search_failures: usize,
}

#[inline]
fn threshold_value(t: f64, nu: f64) -> f64 {
    if t * t > nu * nu {
        t
    } else {
        0.0
    }
}

/// Hard thresholding of a vector: keeps entries with `t^2 > nu^2`.
pub fn hard_threshold(values: &[f64], nu: f64) -> Vec<f64> {
    values.iter().map(|&t| threshold_value(t, nu)).collect()
}

/// Hard thresholding of a matrix.
pub fn hard_threshold_matrix(values: &Array2<f64>, nu: f64) -> Array2<f64> {
    values.mapv(|t| threshold_value(t, nu))
}

/// Hard thresholding of every channel of a coefficient stack.
pub fn hard_threshold_stack(stack: &CoefficientStack, nu: f64) -> CoefficientStack {
    CoefficientStack::new(
        stack
            .channels()
            .iter()
            .map(|c| hard_threshold_matrix(c, nu))
            .collect(),
    )
    .expect("shape preserved")
}

/// Sparse coding: the exact minimizer of the thresholded analysis problem,
/// `hard_threshold(analyze(transform, image), nu)`.
pub fn sparse_code(
    transform: &FilterBankTransform,
    image: &Image,
    nu: f64,
) -> Result<CoefficientStack> {
    Ok(hard_threshold_stack(&analyze(transform, image)?, nu))
}

/// Orthonormal 1-D DCT-II basis value `phi_p(a)` on `K` points.
fn dct_basis(p: usize, a: usize, k: usize) -> f64 {
    let scale = if p == 0 {
        (1.0 / k as f64).sqrt()
    } else {
        (2.0 / k as f64).sqrt()
    };
    scale * (std::f64::consts::PI * (2 * a + 1) as f64 * p as f64 / (2 * k) as f64).cos()
}

const MAX_INIT_ATTEMPTS: usize = 64;

/// Builds a feasible initial transform.
///
/// Feasible means no zero rows and a strictly positive Gram spectrum on the
/// `fft_size` grid. Gaussian rows are resampled (a bounded number of times)
/// until feasible; the draw is deterministic for a fixed seed.
pub fn init_transform(
    filter_size: usize,
    num_channels: usize,
    mode: InitMode,
    seed: u64,
    fft_size: usize,
) -> Result<FilterBankTransform> {
    let k = filter_size;
    let k2 = k * k;
    let mut sampler = GaussianSampler::new(seed);
    let scale = 1.0 / k as f64;
    let gaussian_row =
        |sampler: &mut GaussianSampler| -> Vec<f64> {
            (0..k2).map(|_| scale * sampler.next_standard_normal()).collect()
        };

    let mut w = Array2::<f64>::zeros((num_channels, k2));
    match mode {
        InitMode::RandomGaussian => {
            for i in 0..num_channels {
                for (j, v) in gaussian_row(&mut sampler).into_iter().enumerate() {
                    w[[i, j]] = v;
                }
            }
        }
        InitMode::Dct => {
            for i in 0..num_channels {
                if i < k2 {
                    let (p, q) = (i / k, i % k);
                    for a in 0..k {
                        for b in 0..k {
                            w[[i, a * k + b]] = dct_basis(p, a, k) * dct_basis(q, b, k);
                        }
                    }
                } else {
                    for (j, v) in gaussian_row(&mut sampler).into_iter().enumerate() {
                        w[[i, j]] = v;
                    }
                }
            }
        }
    }

    for _ in 0..MAX_INIT_ATTEMPTS {
        let candidate = FilterBankTransform::new(w.clone(), k, fft_size)?;
        let report = spectrum_report(&candidate, fft_size)?;
        let rows_ok = candidate.row_norms().iter().all(|&n| n > 0.0);
        if rows_ok && report.cyclic_pr {
            return Ok(candidate);
        }
        if mode == InitMode::Dct && num_channels <= k2 {
            // A truncated DCT bank is deterministic; resampling cannot help.
            return Err(Error::Infeasible(format!(
                "partial DCT bank ({num_channels} of {k2} rows) has a common spectral zero"
            )));
        }
        for i in 0..num_channels {
            // Keep any DCT block; refresh only the Gaussian rows.
            if mode == InitMode::RandomGaussian || i >= k2 {
                for (j, v) in gaussian_row(&mut sampler).into_iter().enumerate() {
                    w[[i, j]] = v;
                }
            }
        }
    }
    Err(Error::Infeasible(format!(
        "no feasible Gaussian bank after {MAX_INIT_ATTEMPTS} attempts"
    )))
}

/// Internal: sparse codes and moments for the current bank.
struct CodingState {
    moments: Moments,
}

fn code_and_measure(
    transform: &FilterBankTransform,
    training: &TrainingSet,
    gram: &Array2<f64>,
    nu: f64,
) -> Result<CodingState> {
    let k = transform.filter_size();
    let mut moments = Moments::empty(k, transform.num_channels());
    match training {
        TrainingSet::Images(images) => {
            for image in images {
                let codes = sparse_code(transform, image, nu)?;
                let partial = cross_moment_from_image(image, &codes, k)?;
                moments.accumulate(&partial);
            }
        }
        TrainingSet::PatchSamples(x) => {
            let z = hard_threshold_matrix(&transform.weights().dot(x), nu);
            moments.y = x.dot(&z.t());
            moments.zsq = z.iter().map(|v| v * v).sum();
            moments.nonzeros = z.iter().filter(|v| **v != 0.0).count();
        }
    }
    moments.g = gram.clone();
    Ok(CodingState { moments })
}

fn gram_for_training(training: &TrainingSet, filter_size: usize) -> Result<Array2<f64>> {
    match training {
        TrainingSet::Images(images) => {
            if images.is_empty() {
                return Err(Error::InvalidConfig("training set is empty".into()));
            }
            let k2 = filter_size * filter_size;
            let mut g = Array2::<f64>::zeros((k2, k2));
            for image in images {
                g += &gram_moment_from_image(image, filter_size);
            }
            Ok(g)
        }
        TrainingSet::PatchSamples(x) => {
            if x.ncols() == 0 {
                return Err(Error::InvalidConfig("training set is empty".into()));
            }
            if x.nrows() != filter_size * filter_size {
                return Err(Error::DimensionMismatch(format!(
                    "patch samples have {} rows, expected {}",
                    x.nrows(),
                    filter_size * filter_size
                )));
            }
            Ok(x.dot(&x.t()))
        }
    }
}

/// Runs the alternating learning loop.
///
/// The trace has `outer_iterations + 1` rows: the objective at the
/// initialization (after the first sparse-coding step) and one row per
/// completed outer iteration. The total is non-increasing across rows.
pub fn learn(training: &TrainingSet, config: &LearnConfig) -> Result<LearnOutcome> {
    config.validate()?;
    let start = Instant::now();
    let transform = init_transform(
        config.filter_size,
        config.num_channels,
        config.init,
        config.seed,
        config.fft_size,
    )?;
    let gram = gram_for_training(training, config.filter_size)?;
    let mut w = transform.weights().clone();

    let evaluate = |w: &Array2<f64>, moments: &Moments| -> Result<ObjectiveBreakdown> {
        let (parts, _) = objective_and_grad(
            w,
            moments,
            config.mu,
            config.lambda,
            config.filter_size,
            config.fft_size,
        )?;
        let sparsity_penalty = 0.5 * config.nu * config.nu * moments.nonzeros as f64;
        Ok(ObjectiveBreakdown {
            total: parts.total + sparsity_penalty,
            sparsification_error: parts.sparsification_error,
            j1: parts.j1,
            j2: parts.j2,
            sparsity_penalty,
        })
    };

    let mut state = code_and_measure(
        &FilterBankTransform::new(w.clone(), config.filter_size, config.fft_size)?,
        training,
        &gram,
        config.nu,
    )?;
    let mut trace = Vec::with_capacity(config.outer_iterations + 1);
    trace.push(TraceRow {
        iteration: 0,
        breakdown: evaluate(&w, &state.moments)?,
        wall_seconds: start.elapsed().as_secs_f64(),
    });

    let mut line_search_failures = 0;
    for iteration in 1..=config.outer_iterations {
        let moments = state.moments.clone();
        let outcome = lbfgs_minimize(
            |candidate| {
                match objective_and_grad(
                    candidate,
                    &moments,
                    config.mu,
                    config.lambda,
                    config.filter_size,
                    config.fft_size,
                ) {
                    Ok((parts, grad)) => (parts.total, grad),
                    Err(_) => (f64::INFINITY, Array2::zeros(candidate.raw_dim())),
                }
            },
            &w,
            &config.lbfgs,
        );
        if outcome.line_search_failed {
            line_search_failures += 1;
        }
        w = outcome.w;

        let bank = FilterBankTransform::new(w.clone(), config.filter_size, config.fft_size)?;
        state = code_and_measure(&bank, training, &gram, config.nu)?;
        trace.push(TraceRow {
            iteration,
            breakdown: evaluate(&w, &state.moments)?,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
    }

    Ok(LearnOutcome {
        transform: FilterBankTransform::new(w, config.filter_size, config.fft_size)?,
        trace,
        line_search_failures,
    })
}

//! Filter-bank sparsifying transforms for images.
//!
//! This crate learns undecimated 2-D filter banks that sparsify images,
//! certifies their frame and perfect-reconstruction properties through DFT
//! spectral analysis, and applies them to grayscale image denoising.
//!
//! The pipeline, end to end:
//!
//! 1. [`imaging`] loads PGM images, adds calibrated Gaussian noise, and
//!    measures PSNR. It also provides the dense patch-matrix path that the
//!    FFT operators are tested against.
//! 2. [`filterbank`] holds the transform itself: FFT-based analysis and
//!    adjoint operators, Gram-spectrum computation, frame-bound and
//!    perfect-reconstruction certification, and the pseudoinverse synthesis
//!    bank, plus a checksummed binary model format.
//! 3. [`learning`] fits a transform to training images by alternating
//!    hard-threshold sparse coding with quasi-Newton (L-BFGS) filter
//!    updates of a regularized sparsification objective.
//! 4. [`denoise`] restores noisy images with a trained bank, either by a
//!    single analysis-threshold-synthesis pass or by iterating a regularized
//!    reconstruction whose exact solve runs in the DFT eigenbasis.
//!
//! See the `examples/` directory for one runnable program per capability,
//! and the `fbst` binary for the command-line frontend.

pub mod denoise;
pub mod error;
mod fft;
pub mod filterbank;
pub mod imaging;
pub mod learning;
pub mod report;

pub use denoise::{
    denoise_iterative, denoise_threshold, objective_trace, DenoiseConfig, DenoiseMode,
    DenoiseOutcome, THRESHOLD_NOISE_MULTIPLIER,
};
pub use error::{Error, Result};
pub use filterbank::{
    adjoint, analyze, autocorrelation_spectrum, filter_from_row, filter_montage, gram_eigenvalues,
    load_model, pseudoinverse_apply, save_model, spectrum_report, CoefficientStack,
    FilterBankTransform, SpectrumReport,
};
pub use imaging::{
    add_gaussian_noise, build_patch_matrix, load_pgm, normalize_unit_norm, psnr, save_pgm, Image,
    PatchMatrix,
};
pub use learning::{
    hard_threshold, init_transform, learn, sparse_code, InitMode, LbfgsParams, LearnConfig,
    LearnOutcome, ObjectiveBreakdown, TrainingSet,
};

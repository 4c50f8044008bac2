//! Command-line frontend: train, certify, and apply filter-bank transforms.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error (unreadable or corrupt
//! files, shape mismatches), 3 numerical infeasibility (singular operator,
//! non-PR bank, infeasible initialization).

use clap::{Args, Parser, Subcommand, ValueEnum};
use fbst::filterbank::max_magnitude_coherence;
use fbst::learning::TrainingSet;
use fbst::report::{append_csv_row, write_atomic};
use fbst::{
    add_gaussian_noise, denoise_iterative, denoise_threshold, filter_montage, learn, load_model,
    load_pgm, normalize_unit_norm, psnr, save_model, save_pgm, spectrum_report, DenoiseConfig,
    DenoiseMode, Error, Image, InitMode, LearnConfig,
};
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "fbst",
    about = "Filter-bank sparsifying transforms: learn, certify, denoise",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a transform from training images (PGM).
    Learn(LearnArgs),
    /// Report frame bounds and PR certification of a model.
    Analyze(AnalyzeArgs),
    /// Denoise a PGM image with a trained model.
    Denoise(DenoiseArgs),
    /// Peak signal-to-noise ratio between two PGM images.
    Psnr(PsnrArgs),
    /// Render the filter montage of a model as a PGM image.
    Montage(MontageArgs),
    /// Add seeded Gaussian noise to a PGM image.
    Noise(NoiseArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InitArg {
    Random,
    Dct,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Iterative,
    Threshold,
}

#[derive(Args)]
struct LearnArgs {
    /// Training images (binary PGM), each normalized to unit l2 norm.
    #[arg(required = true)]
    images: Vec<PathBuf>,
    /// Output model path.
    #[arg(long, short = 'o', default_value = "model.fbst")]
    model_out: PathBuf,
    /// Objective-trace CSV path [default: <model-out>.trace.csv].
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Filter montage PGM path [default: <model-out>.montage.pgm].
    #[arg(long)]
    montage_out: Option<PathBuf>,
    /// Optional key=value config file; flags take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of filter-bank channels.
    #[arg(long)]
    channels: Option<usize>,
    /// Filter side length K (filters are K x K).
    #[arg(long)]
    filter_size: Option<usize>,
    /// Outer alternation iterations.
    #[arg(long)]
    iters: Option<usize>,
    /// Frame-regularizer weight.
    #[arg(long)]
    mu: Option<f64>,
    /// Coherence-regularizer weight.
    #[arg(long)]
    lambda: Option<f64>,
    /// Sparse-coding hard threshold.
    #[arg(long)]
    nu: Option<f64>,
    /// Regularization DFT grid size [default: 4 * filter-size].
    #[arg(long)]
    fft_size: Option<usize>,
    /// Transform initialization.
    #[arg(long, value_enum)]
    init: Option<InitArg>,
    /// RNG seed (initialization).
    #[arg(long)]
    seed: Option<u64>,
    /// Skip the per-image unit-norm rescaling.
    #[arg(long)]
    no_normalize: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Model file to analyze.
    #[arg(long, short = 'm')]
    model: PathBuf,
    /// Image size N at which to evaluate the spectrum.
    #[arg(long, default_value_t = 256)]
    grid_size: usize,
    /// Optional CSV dump of the eigenvalue grid.
    #[arg(long)]
    grid_csv: Option<PathBuf>,
}

#[derive(Args)]
struct DenoiseArgs {
    /// Trained model file.
    #[arg(long, short = 'm')]
    model: PathBuf,
    /// Noisy input image (PGM).
    #[arg(long, short = 'i')]
    input: PathBuf,
    /// Denoised output image (PGM).
    #[arg(long, short = 'o')]
    output: PathBuf,
    /// Denoising algorithm.
    #[arg(long, value_enum, default_value_t = ModeArg::Iterative)]
    mode: ModeArg,
    /// Noise standard deviation on the 8-bit scale (e.g. 20 for sigma 20/255)
    /// [default: 20].
    #[arg(long)]
    sigma: Option<f64>,
    /// Hard threshold override [default: 2.5 * sigma/255 * rms filter norm].
    #[arg(long)]
    nu: Option<f64>,
    /// Data-fidelity weight override [default: 0.1 / (sigma/255)^2].
    #[arg(long)]
    lambda_r: Option<f64>,
    /// Iteration count override [default: ceil(sigma / 10)].
    #[arg(long)]
    iterations: Option<usize>,
    /// Ground-truth image; prints output PSNR when given.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Optional key=value config file; flags take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct PsnrArgs {
    /// Image under test (PGM).
    image: PathBuf,
    /// Reference image (PGM).
    reference: PathBuf,
    /// Peak value of the PSNR definition.
    #[arg(long, default_value_t = 1.0)]
    peak: f64,
    /// Append the measurement to this CSV (header written once).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Label for the CSV row [default: the image path].
    #[arg(long)]
    label: Option<String>,
}

#[derive(Args)]
struct MontageArgs {
    #[arg(long, short = 'm')]
    model: PathBuf,
    #[arg(long, short = 'o')]
    output: PathBuf,
}

#[derive(Args)]
struct NoiseArgs {
    /// Clean input image (PGM).
    input: PathBuf,
    /// Noisy output image (PGM).
    output: PathBuf,
    /// Noise standard deviation on the 8-bit scale.
    #[arg(long, default_value_t = 20.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

enum CliError {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::InvalidConfig(_) | Error::GridTooSmall { .. } => CliError::Usage(msg),
            Error::SingularOperator { .. }
            | Error::NotPerfectReconstruction { .. }
            | Error::Infeasible(_)
            | Error::ZeroImage => CliError::Numerical(msg),
            _ => CliError::Data(msg),
        }
    }
}

/// `key=value` config file; `#` starts a comment.
fn read_config(path: &Path) -> Result<HashMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("config {}: {e}", path.display())))?;
    let mut map = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!(
                "config {} line {}: expected key=value",
                path.display(),
                lineno + 1
            ))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

/// Flag > config-file > default precedence.
fn resolve<T: std::str::FromStr>(
    flag: Option<T>,
    config: &HashMap<String, String>,
    key: &str,
    default: T,
) -> Result<T, CliError> {
    if let Some(v) = flag {
        return Ok(v);
    }
    match config.get(key) {
        Some(raw) => raw
            .parse::<T>()
            .map_err(|_| CliError::Usage(format!("config key {key}: cannot parse {raw:?}"))),
        None => Ok(default),
    }
}

fn load_image(path: &Path) -> Result<Image, CliError> {
    load_pgm(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn format_db(value: f64) -> String {
    if value.is_infinite() {
        "inf".to_string()
    } else {
        format!("{value:.2}")
    }
}

fn cmd_learn(args: LearnArgs) -> Result<(), CliError> {
    let file_config = match &args.config {
        Some(path) => read_config(path)?,
        None => HashMap::new(),
    };
    let channels = resolve(args.channels, &file_config, "channels", 64)?;
    let filter_size = resolve(args.filter_size, &file_config, "filter-size", 8)?;
    let mut config = LearnConfig::new(channels, filter_size);
    config.outer_iterations = resolve(args.iters, &file_config, "iters", 1000)?;
    config.mu = resolve(args.mu, &file_config, "mu", config.mu)?;
    config.lambda = resolve(args.lambda, &file_config, "lambda", config.lambda)?;
    config.nu = resolve(args.nu, &file_config, "nu", config.nu)?;
    config.fft_size = resolve(args.fft_size, &file_config, "fft-size", config.fft_size)?;
    config.seed = resolve(args.seed, &file_config, "seed", 0)?;
    let init = match (args.init, file_config.get("init").map(String::as_str)) {
        (Some(InitArg::Random), _) | (None, Some("random")) => InitMode::RandomGaussian,
        (Some(InitArg::Dct), _) | (None, Some("dct")) => InitMode::Dct,
        (None, Some(other)) => {
            return Err(CliError::Usage(format!(
                "config key init: expected random|dct, got {other:?}"
            )))
        }
        (None, None) => InitMode::RandomGaussian,
    };
    config.init = init;

    let mut images = Vec::with_capacity(args.images.len());
    for path in &args.images {
        let img = load_image(path)?;
        if args.no_normalize {
            images.push(img);
        } else {
            let (unit, _) = normalize_unit_norm(&img)?;
            images.push(unit);
        }
    }

    let outcome = learn(&TrainingSet::Images(images), &config)?;
    save_model(&outcome.transform, &args.model_out)?;

    let sidecar = vec![
        ("channels".into(), channels.to_string()),
        ("filter_size".into(), filter_size.to_string()),
        ("fft_size".into(), config.fft_size.to_string()),
        ("mu".into(), config.mu.to_string()),
        ("lambda".into(), config.lambda.to_string()),
        ("nu".into(), config.nu.to_string()),
        ("outer_iterations".into(), config.outer_iterations.to_string()),
        (
            "init".into(),
            match config.init {
                InitMode::RandomGaussian => "random".to_string(),
                InitMode::Dct => "dct".to_string(),
            },
        ),
        ("seed".into(), config.seed.to_string()),
        (
            "unit_normalized_inputs".into(),
            (!args.no_normalize).to_string(),
        ),
        (
            "training_images".into(),
            args.images
                .iter()
                .map(|p| p.display().to_string())
                .collect::<Vec<_>>()
                .join(";"),
        ),
    ];
    fbst::filterbank::write_sidecar(&args.model_out, &sidecar)?;

    let trace_path = args
        .trace_out
        .unwrap_or_else(|| with_suffix(&args.model_out, ".trace.csv"));
    let mut csv = String::from("iteration,total,f,j1,j2,sparsity,wall_seconds\n");
    for row in &outcome.trace {
        let b = row.breakdown;
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            row.iteration,
            b.total,
            b.sparsification_error,
            b.j1,
            b.j2,
            b.sparsity_penalty,
            row.wall_seconds
        )
        .unwrap();
    }
    write_atomic(&trace_path, csv.as_bytes())?;

    let montage_path = args
        .montage_out
        .unwrap_or_else(|| with_suffix(&args.model_out, ".montage.pgm"));
    save_pgm(&filter_montage(&outcome.transform)?, &montage_path)?;

    let last = outcome.trace.last().expect("trace is never empty");
    println!(
        "learned {channels} channels of {filter_size}x{filter_size} filters in {} iterations",
        config.outer_iterations
    );
    println!("final objective: {:.6}", last.breakdown.total);
    if outcome.line_search_failures > 0 {
        println!(
            "note: {} transform updates ended with an incomplete line search",
            outcome.line_search_failures
        );
    }
    println!("model: {}", args.model_out.display());
    println!("trace: {}", trace_path.display());
    println!("montage: {}", montage_path.display());
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    name.push_str(suffix);
    path.with_file_name(name)
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), CliError> {
    let transform = load_model(&args.model)?;
    let report = spectrum_report(&transform, args.grid_size)?;
    let k = transform.filter_size();
    println!("model: {}", args.model.display());
    println!(
        "channels: {}, filter size: {}, regularization grid: {}",
        transform.num_channels(),
        k,
        transform.fft_size()
    );
    println!("spectrum grid: {0} x {0}", args.grid_size);
    println!(
        "lambda_min: {:.6e} at bin ({}, {})",
        report.lambda_min, report.argmin.0, report.argmin.1
    );
    println!("lambda_max: {:.6e}", report.lambda_max);
    if report.condition_number.is_finite() {
        println!("condition number: {:.3}", report.condition_number);
    } else {
        println!("condition number: inf");
    }
    println!(
        "cyclic PR: {}",
        if report.cyclic_pr { "yes" } else { "no" }
    );
    if !report.cyclic_pr && report.argmin == (0, 0) {
        println!("note: common spectral zero at DC; the filters sum to zero");
    }
    println!(
        "linear PR certificate: condition number {} threshold N/(K-1)-1 = {:.3} -> {}",
        if report.linear_pr_certified { "<=" } else { ">" },
        report.certification_threshold,
        if report.linear_pr_certified {
            "certified"
        } else {
            "not certified"
        }
    );
    let norms = transform.row_norms();
    let (mut lo, mut hi, mut sum) = (f64::INFINITY, 0.0_f64, 0.0);
    for n in &norms {
        lo = lo.min(*n);
        hi = hi.max(*n);
        sum += n;
    }
    println!(
        "filter norms: min {:.4}, mean {:.4}, max {:.4}",
        lo,
        sum / norms.len() as f64,
        hi
    );
    match max_magnitude_coherence(&transform) {
        Some((c, i, j)) => {
            println!("max magnitude-response coherence: {c:.4} (channels {i}, {j})")
        }
        None => println!("max magnitude-response coherence: n/a (single channel)"),
    }
    if let Some(csv_path) = args.grid_csv {
        let mut csv = String::from("k1,k2,lambda\n");
        for ((i, j), v) in report.eigenvalue_grid.indexed_iter() {
            writeln!(csv, "{i},{j},{v}").unwrap();
        }
        write_atomic(&csv_path, csv.as_bytes())?;
        println!("eigenvalue grid: {}", csv_path.display());
    }
    Ok(())
}

fn cmd_denoise(args: DenoiseArgs) -> Result<(), CliError> {
    let file_config = match &args.config {
        Some(path) => read_config(path)?,
        None => HashMap::new(),
    };
    let transform = load_model(&args.model)?;
    let noisy = load_image(&args.input)?;
    let sigma255 = resolve(args.sigma, &file_config, "sigma", 20.0)?;
    if sigma255 < 0.0 {
        return Err(CliError::Usage("sigma must be non-negative".into()));
    }
    let sigma = sigma255 / 255.0;
    let mode = match args.mode {
        ModeArg::Iterative => DenoiseMode::Iterative,
        ModeArg::Threshold => DenoiseMode::Threshold,
    };
    let mut config = DenoiseConfig::calibrated(mode, sigma, &transform);
    config.nu = resolve(args.nu, &file_config, "nu", config.nu)?;
    config.lambda_r = resolve(args.lambda_r, &file_config, "lambda-r", config.lambda_r)?;
    config.iterations = resolve(args.iterations, &file_config, "iterations", config.iterations)?;

    let output = match mode {
        DenoiseMode::Threshold => denoise_threshold(&transform, &noisy, config.nu).map_err(
            |e| match e {
                Error::NotPerfectReconstruction { .. } => CliError::Numerical(format!(
                    "{e}; run `fbst analyze` on this model to locate the spectral zero"
                )),
                other => other.into(),
            },
        )?,
        DenoiseMode::Iterative => {
            println!("iterations: {}", config.iterations);
            denoise_iterative(&transform, &noisy, &config)?.image
        }
    };
    println!("nu: {:.6}, lambda_r: {:.4}", config.nu, config.lambda_r);
    save_pgm(&output, &args.output)?;
    println!("wrote {}", args.output.display());
    if let Some(truth_path) = args.truth {
        let truth = load_image(&truth_path)?;
        let input_db = psnr(&noisy, &truth, 1.0)?;
        let output_db = psnr(&output, &truth, 1.0)?;
        println!("input PSNR: {} dB", format_db(input_db));
        println!("output PSNR: {} dB", format_db(output_db));
    }
    Ok(())
}

fn cmd_psnr(args: PsnrArgs) -> Result<(), CliError> {
    let image = load_image(&args.image)?;
    let reference = load_image(&args.reference)?;
    let db = psnr(&image, &reference, args.peak)?;
    println!("PSNR: {} dB", format_db(db));
    if let Some(csv_path) = args.csv {
        let label = args
            .label
            .unwrap_or_else(|| args.image.display().to_string());
        append_csv_row(
            &csv_path,
            "label,reference,psnr_db",
            &[
                label,
                args.reference.display().to_string(),
                format_db(db),
            ],
        )?;
    }
    Ok(())
}

fn cmd_montage(args: MontageArgs) -> Result<(), CliError> {
    let transform = load_model(&args.model)?;
    save_pgm(&filter_montage(&transform)?, &args.output)?;
    println!("wrote {}", args.output.display());
    Ok(())
}

fn cmd_noise(args: NoiseArgs) -> Result<(), CliError> {
    if args.sigma < 0.0 {
        return Err(CliError::Usage("sigma must be non-negative".into()));
    }
    let clean = load_image(&args.input)?;
    let noisy = add_gaussian_noise(&clean, args.sigma / 255.0, args.seed);
    save_pgm(&noisy, &args.output)?;
    println!("wrote {}", args.output.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Keep --help/--version on success paths; report usage errors as 1.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Learn(args) => cmd_learn(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Denoise(args) => cmd_denoise(args),
        Command::Psnr(args) => cmd_psnr(args),
        Command::Montage(args) => cmd_montage(args),
        Command::Noise(args) => cmd_noise(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

//! Command-line entry point: feature extraction, gallery classification,
//! and the repeated-split benchmark.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use sselbp::bench::{ingest, load_labeled_features, run_benchmark, SplitProtocol};
use sselbp::classifier::{nnc_predict, LabeledFeature};
use sselbp::descriptor::{
    extract, write_feature_binary, write_feature_json, DescriptorConfig, DEFAULT_LEVELS,
    DEFAULT_P, DEFAULT_RADII, DEFAULT_SIGMA,
};
use sselbp::elbp::RadiusScheme;
use sselbp::imgio::load_grayscale;

#[derive(Parser)]
#[command(
    name = "sselbp",
    version,
    about = "Scale-selective extended local binary pattern texture features"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the feature vector of one image
    Extract(ExtractArgs),
    /// Classify a directory of test features against a training gallery
    Classify(ClassifyArgs),
    /// Run the repeated stratified-split benchmark on a dataset
    Benchmark(BenchmarkArgs),
}

#[derive(Args)]
struct DescriptorArgs {
    /// Sampling radii in pixels, innermost first, comma separated
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_RADII)]
    radii: Vec<f64>,

    /// Sampling points per circle
    #[arg(long, default_value_t = DEFAULT_P)]
    p: u32,

    /// Number of scale-space levels
    #[arg(long, default_value_t = DEFAULT_LEVELS)]
    scales: u32,

    /// Gaussian sigma applied between consecutive levels
    #[arg(long, default_value_t = DEFAULT_SIGMA)]
    sigma: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum FeatureFormat {
    Json,
    Bin,
}

#[derive(Args)]
struct ExtractArgs {
    /// Input image (.png or .pgm)
    #[arg(long)]
    image: PathBuf,

    #[command(flatten)]
    descriptor: DescriptorArgs,

    /// Output encoding
    #[arg(long, value_enum, default_value_t = FeatureFormat::Json)]
    format: FeatureFormat,

    /// Output feature file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Training features: class subdirectories of .json or .bin files
    #[arg(long)]
    train: PathBuf,

    /// Test features in the same layout
    #[arg(long)]
    test: PathBuf,

    /// Output report
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Dataset root: class subdirectories of .png or .pgm images
    #[arg(long)]
    dataset: PathBuf,

    /// Number of random half/half splits
    #[arg(long, default_value_t = 100)]
    repeats: u32,

    /// Seed for the split generator
    #[arg(long, default_value_t = 42)]
    seed: u64,

    #[command(flatten)]
    descriptor: DescriptorArgs,

    /// Directory for cached features, reused across runs
    #[arg(long)]
    cache: Option<PathBuf>,

    /// Output report
    #[arg(long)]
    out: PathBuf,
}

/// Failure with the exit code it maps to: 1 usage, 2 data, 3 internal.
struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl ToString) -> Self {
        CliError {
            code: 1,
            message: message.to_string(),
        }
    }

    fn data(message: impl ToString) -> Self {
        CliError {
            code: 2,
            message: message.to_string(),
        }
    }

    fn internal(message: impl ToString) -> Self {
        CliError {
            code: 3,
            message: message.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let threads = match thread_count() {
        Ok(n) => n,
        Err(message) => {
            eprintln!("error: {message}");
            return ExitCode::from(1);
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot build thread pool: {e}");
            return ExitCode::from(3);
        }
    };
    match pool.install(|| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

/// Worker count from SSELBP_THREADS; 0 or unset means one per core.
fn thread_count() -> Result<usize, String> {
    match std::env::var("SSELBP_THREADS") {
        Err(std::env::VarError::NotPresent) => Ok(0),
        Err(std::env::VarError::NotUnicode(_)) => {
            Err("SSELBP_THREADS is not valid unicode".to_string())
        }
        Ok(raw) => raw
            .trim()
            .parse()
            .map_err(|_| format!("SSELBP_THREADS must be a non-negative integer, got '{raw}'")),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Extract(args) => run_extract(args),
        Command::Classify(args) => run_classify(args),
        Command::Benchmark(args) => run_benchmark_cmd(args),
    }
}

fn build_config(args: &DescriptorArgs) -> Result<DescriptorConfig, CliError> {
    let scheme = RadiusScheme::new(args.p, args.radii.clone()).map_err(CliError::usage)?;
    DescriptorConfig::new(scheme, args.scales, args.sigma).map_err(CliError::usage)
}

fn run_extract(args: ExtractArgs) -> Result<(), CliError> {
    let config = build_config(&args.descriptor)?;
    let img = load_grayscale(&args.image).map_err(CliError::data)?;
    let feature = extract(&img, &config).map_err(CliError::data)?;
    match args.format {
        FeatureFormat::Json => write_feature_json(&args.out, &feature, &config),
        FeatureFormat::Bin => write_feature_binary(&args.out, &feature, &config),
    }
    .map_err(CliError::internal)?;
    println!("wrote {} values to {}", feature.len(), args.out.display());
    Ok(())
}

#[derive(Serialize)]
struct PredictionJson {
    path: String,
    label: String,
    predicted: String,
}

#[derive(Serialize)]
struct ClassifyReport {
    accuracy: f64,
    total: usize,
    correct: usize,
    predictions: Vec<PredictionJson>,
}

fn run_classify(args: ClassifyArgs) -> Result<(), CliError> {
    let train = load_labeled_features(&args.train).map_err(CliError::data)?;
    let test = load_labeled_features(&args.test).map_err(CliError::data)?;
    let train_print = train[0].1.feature.fingerprint();
    let test_print = test[0].1.feature.fingerprint();
    if train_print != test_print {
        return Err(CliError::data(format!(
            "training and test features disagree on config (fingerprints {train_print:016x} vs {test_print:016x})"
        )));
    }
    let gallery: Vec<LabeledFeature> = train.into_iter().map(|(_, item)| item).collect();
    let mut predictions = Vec::with_capacity(test.len());
    let mut correct = 0usize;
    for (path, item) in &test {
        let predicted = nnc_predict(&item.feature, &gallery).map_err(CliError::data)?;
        if predicted == item.label {
            correct += 1;
        }
        let shown = path
            .strip_prefix(&args.test)
            .unwrap_or(path)
            .display()
            .to_string();
        predictions.push(PredictionJson {
            path: shown,
            label: item.label.clone(),
            predicted: predicted.to_string(),
        });
    }
    let total = test.len();
    let report = ClassifyReport {
        accuracy: correct as f64 / total as f64,
        total,
        correct,
        predictions,
    };
    write_json_file(&args.out, &report)?;
    println!(
        "classified {total} features: {correct} correct, accuracy {:.4}",
        report.accuracy
    );
    Ok(())
}

fn run_benchmark_cmd(args: BenchmarkArgs) -> Result<(), CliError> {
    let config = build_config(&args.descriptor)?;
    if args.repeats == 0 {
        return Err(CliError::usage("repeat count must be at least 1"));
    }
    let protocol = SplitProtocol {
        repeats: args.repeats,
        seed: args.seed,
    };
    let ds = ingest(&args.dataset).map_err(CliError::data)?;
    let report =
        run_benchmark(&ds, &config, &protocol, args.cache.as_deref()).map_err(CliError::data)?;
    write_json_file(&args.out, &report)?;
    println!(
        "mean accuracy {:.4} (std {:.4}) over {} repeats on {} classes",
        report.mean_accuracy,
        report.std_accuracy,
        args.repeats,
        ds.classes().len()
    );
    Ok(())
}

fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let file = File::create(path)
        .map_err(|e| CliError::internal(format!("cannot create {}: {e}", path.display())))?;
    let mut writer = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut writer, value)
        .map_err(|e| CliError::internal(format!("cannot encode {}: {e}", path.display())))?;
    writer
        .write_all(b"\n")
        .and_then(|()| writer.flush())
        .map_err(|e| CliError::internal(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

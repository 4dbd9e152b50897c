//! phishvis command line interface.
//!
//! One subcommand per pipeline stage plus the composite `check`:
//! `check`, `visualize`, `train`, `evaluate`, `gen-corpus`. Every command
//! supports `--json` for machine-readable output. Exit codes: 0 success,
//! 2 usage, 10 fetch, 11 store, 12 model/format, 13 degenerate data.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use phishvis::classifier::{
    self, load_model, save_model, train, TrainConfig, TrainSample,
};
use phishvis::corpus::{build_corpus, CorpusConfig};
use phishvis::fetcher::{fetch, normalize_url, FetchConfig};
use phishvis::hilbert::CurveOrder;
use phishvis::metrics::{format_percent, per_category_report};
use phishvis::pipeline::Pipeline;
use phishvis::store::{load_manifest, Sample, Split, Store};
use phishvis::{Error, Label};

#[derive(Parser)]
#[command(
    name = "phishvis",
    version,
    about = "Detect phishing pages by visualizing their bytes and classifying the image"
)]
struct Cli {
    /// Emit machine-readable JSON instead of human output.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check one or more URLs end to end (with URL dedupe caching).
    Check(CheckArgs),
    /// Render a URL or local file to a PNG without classifying it.
    Visualize(VisualizeArgs),
    /// Train a model from a dataset manifest.
    Train(TrainArgs),
    /// Evaluate a model against a dataset manifest.
    Evaluate(EvaluateArgs),
    /// Generate the synthetic training corpus.
    GenCorpus(GenCorpusArgs),
}

#[derive(Args)]
struct CheckArgs {
    /// URLs to check.
    #[arg(required = true)]
    urls: Vec<String>,
    /// Trained model file.
    #[arg(long)]
    model: PathBuf,
    /// Re-fetch and re-classify even if the URL is cached.
    #[arg(long)]
    force: bool,
    /// Fetch timeout in seconds.
    #[arg(long, default_value_t = 10)]
    timeout: u64,
    /// Skip TLS certificate validation (lab use only).
    #[arg(long)]
    insecure: bool,
}

#[derive(Args)]
struct VisualizeArgs {
    /// URL (http/https) or local file path.
    input: String,
    /// Output PNG path.
    #[arg(short, long)]
    output: PathBuf,
    /// Hilbert curve order (7 = 128x128).
    #[arg(long, default_value_t = 7)]
    order: u8,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset manifest (JSON lines).
    #[arg(long)]
    manifest: PathBuf,
    /// Output model file.
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = 4000)]
    steps: usize,
    #[arg(long, default_value_t = 0.005)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 64)]
    input_side: usize,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Dataset manifest (JSON lines).
    #[arg(long)]
    manifest: PathBuf,
    /// Trained model file.
    #[arg(long)]
    model: PathBuf,
    /// Restrict to one split: train, test or all.
    #[arg(long, default_value = "test")]
    split: String,
}

#[derive(Args)]
struct GenCorpusArgs {
    /// Output directory.
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = 250)]
    per_category: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// Error-to-exit-code mapping. Documented in the README; tests pin it.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidUrl(_)
        | Error::UnsupportedScheme(_)
        | Error::NameResolution(_)
        | Error::Timeout
        | Error::HttpStatus(_)
        | Error::BodyTooLarge { .. }
        | Error::TooManyRedirects
        | Error::Transport(_) => 10,
        Error::StoreCorrupt(_)
        | Error::StoreWriteFailed(_)
        | Error::InvalidRecord(_)
        | Error::ManifestParse { .. } => 11,
        Error::ModelFormat(_) | Error::BadShape(_) | Error::ImageFormat(_) => 12,
        Error::EmptyContent | Error::DegenerateDataset | Error::Undefined => 13,
        Error::OutOfRange(_) | Error::InvalidLabel(_) | Error::Io(_) => 1,
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Check(args) => cmd_check(cli, args),
        Command::Visualize(args) => cmd_visualize(cli, args),
        Command::Train(args) => cmd_train(cli, args),
        Command::Evaluate(args) => cmd_evaluate(cli, args),
        Command::GenCorpus(args) => cmd_gen_corpus(cli, args),
    }
}

fn cmd_check(cli: &Cli, args: &CheckArgs) -> Result<(), Error> {
    let model = load_model(&args.model)?;
    let store = Store::open_default()?;
    if store.recovered_truncated_tail() {
        eprintln!("warning: discarded a partial trailing record in the store");
    }
    let fetch_cfg = FetchConfig {
        timeout: std::time::Duration::from_secs(args.timeout),
        verify_tls: !args.insecure,
        ..FetchConfig::default()
    };
    let mut pipeline = Pipeline::new(store, model, fetch_cfg);

    for url in &args.urls {
        let result = pipeline.check_url(url, args.force)?;
        if cli.json {
            println!("{}", serde_json::to_string(&result).expect("serialize result"));
        } else {
            println!(
                "{}  {}  confidence {:.4}  {}  image {}",
                result.url,
                result.label,
                result.confidence,
                if result.cached { "(cached)" } else { "(fresh)" },
                result.image_path,
            );
        }
    }
    Ok(())
}

fn cmd_visualize(cli: &Cli, args: &VisualizeArgs) -> Result<(), Error> {
    let order = CurveOrder::new(args.order)?;
    let bytes = if args.input.starts_with("http://") || args.input.starts_with("https://") {
        let url = normalize_url(&args.input)?;
        fetch(&url, &FetchConfig::default())?.body
    } else {
        std::fs::read(&args.input)?
    };
    let image = phishvis::bytevis::render(&bytes, order)?;
    let png = phishvis::bytevis::encode_png(&image);
    std::fs::write(&args.output, &png)?;
    if cli.json {
        println!(
            "{}",
            serde_json::json!({
                "input": args.input,
                "output": args.output,
                "side": image.side(),
                "bytes_in": bytes.len(),
            })
        );
    } else {
        println!(
            "wrote {} ({}x{} from {} input bytes)",
            args.output.display(),
            image.side(),
            image.side(),
            bytes.len()
        );
    }
    Ok(())
}

/// Keep samples matching the requested split. Manifests without split tags
/// are used whole.
fn filter_split<'a>(samples: &'a [Sample], split: &str) -> Vec<&'a Sample> {
    match split {
        "train" => samples
            .iter()
            .filter(|s| s.split.is_none_or(|sp| sp == Split::Train))
            .collect(),
        "test" => samples
            .iter()
            .filter(|s| s.split.is_none_or(|sp| sp == Split::Test))
            .collect(),
        _ => samples.iter().collect(),
    }
}

fn manifest_dir(path: &Path) -> PathBuf {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn cmd_train(cli: &Cli, args: &TrainArgs) -> Result<(), Error> {
    let manifest = load_manifest(&args.manifest)?;
    let selected = filter_split(&manifest, "train");
    let cfg = TrainConfig {
        learning_rate: args.lr,
        steps: args.steps,
        batch_size: args.batch,
        seed: args.seed,
        input_side: args.input_side,
    };
    let base = manifest_dir(&args.manifest);
    let owned: Vec<Sample> = selected.into_iter().cloned().collect();
    let samples: Vec<TrainSample> = classifier::load_samples(&owned, &base, cfg.input_side)?;
    let (model, log) = train(&samples, &cfg)?;
    save_model(&model, &args.output)?;

    let window = log.losses.len().clamp(1, 100);
    let first: f64 = log.losses.iter().take(100).sum::<f64>() / window as f64;
    let last: f64 = log.losses.iter().rev().take(100).sum::<f64>() / window as f64;
    if cli.json {
        println!(
            "{}",
            serde_json::json!({
                "model": args.output,
                "samples": samples.len(),
                "steps": log.losses.len(),
                "mean_loss_first_100": first,
                "mean_loss_last_100": last,
            })
        );
    } else {
        println!(
            "trained on {} samples for {} steps (mean loss {:.4} -> {:.4}); wrote {}",
            samples.len(),
            log.losses.len(),
            first,
            last,
            args.output.display()
        );
    }
    Ok(())
}

fn cmd_evaluate(cli: &Cli, args: &EvaluateArgs) -> Result<(), Error> {
    let model = load_model(&args.model)?;
    let manifest = load_manifest(&args.manifest)?;
    let selected = filter_split(&manifest, &args.split);
    if selected.is_empty() {
        return Err(Error::Undefined);
    }
    let base = manifest_dir(&args.manifest);

    let mut pairs = Vec::with_capacity(selected.len());
    for sample in &selected {
        let bytes = std::fs::read(base.join(&sample.path))?;
        let image = phishvis::bytevis::decode_png(&bytes)?;
        let small = classifier::downsample(&image, model.input_side())?;
        let verdict = classifier::predict(&model, &small)?;
        pairs.push((verdict.label, sample.label, sample.category.clone()));
    }
    let report = per_category_report(&pairs);

    if cli.json {
        println!("{}", serde_json::to_string(&report).expect("serialize report"));
    } else {
        println!(
            "overall: accuracy {}  precision {}  recall {}  f1 {}  (n={})",
            format_percent(report.overall.accuracy),
            format_percent(report.overall.precision),
            format_percent(report.overall.recall),
            format_percent(report.overall.f1),
            report.overall.counts.total(),
        );
        println!(
            "counts: tp={} tn={} fp={} fn={}",
            report.overall.counts.tp,
            report.overall.counts.tn,
            report.overall.counts.fp,
            report.overall.counts.fn_,
        );
        for cat in &report.per_category {
            println!(
                "  {:<28} accuracy {:>8}  precision {:>9}  n={}",
                cat.name,
                format_percent(cat.accuracy),
                format_percent(cat.precision),
                cat.n
            );
        }
    }
    Ok(())
}

fn cmd_gen_corpus(cli: &Cli, args: &GenCorpusArgs) -> Result<(), Error> {
    let cfg = CorpusConfig {
        per_category: args.per_category,
        seed: args.seed,
        ..CorpusConfig::new(&args.output)
    };
    let manifest = build_corpus(&cfg)?;
    let samples = load_manifest(&manifest)?;
    let train_n = samples
        .iter()
        .filter(|s| s.split == Some(Split::Train))
        .count();
    let phish_n = samples.iter().filter(|s| s.label == Label::Phishing).count();
    if cli.json {
        println!(
            "{}",
            serde_json::json!({
                "manifest": manifest,
                "samples": samples.len(),
                "train": train_n,
                "test": samples.len() - train_n,
                "phishing": phish_n,
                "legitimate": samples.len() - phish_n,
            })
        );
    } else {
        println!(
            "wrote {} samples ({} train / {} test) to {}",
            samples.len(),
            train_n,
            samples.len() - train_n,
            manifest.display()
        );
    }
    Ok(())
}

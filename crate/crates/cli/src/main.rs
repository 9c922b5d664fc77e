//! `topoclass` — persistence diagrams, landscape features and seeded
//! classification experiments for grayscale image datasets.
//!
//! A dataset directory holds either the IDX pair layout
//! (`train-images-idx3-ubyte`, `train-labels-idx1-ubyte`,
//! `t10k-images-idx3-ubyte`, `t10k-labels-idx1-ubyte`) or `train/` and
//! `test/` trees with one subdirectory of PGM (P5) files per class.
//!
//! On failure the process exits nonzero after printing a single JSON
//! error line to stderr.

mod config;

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use topoclass_core::cubical::build_complex;
use topoclass_core::harness::{
    ensemble_evaluate, run_experiment, ExperimentConfig, ExperimentData, Variant,
};
use topoclass_core::imageio::{load_idx, load_image_dir, load_pgm, LabeledImageSet};
use topoclass_core::landscape::{
    featurize_batch, write_features_bin, write_features_csv, LandscapeParams,
};
use topoclass_core::neuralnet::{
    forward, init_model, load_checkpoint, predict_one, save_checkpoint, train, CheckpointMeta,
    Mode, ModelSpec, OptimizerKind, TrainConfig, TrainSet,
};
use topoclass_core::persistence::{compute_diagram, write_diagram_json};

use config::ConfigFile;

#[derive(Parser)]
#[command(name = "topoclass", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute landscape feature vectors for a dataset split.
    Featurize(FeaturizeArgs),
    /// Compute the persistence diagram of a single PGM image.
    Diagram(DiagramArgs),
    /// Train a model and save a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the test split.
    Evaluate(EvaluateArgs),
    /// Combine two logits files with the softmax-sum rule.
    Ensemble(EnsembleArgs),
    /// Run a seeded training-size sweep and write reports.
    Experiment(ExperimentArgs),
}

/// Comma-separated list of training sizes (for example `100,300,1000`).
#[derive(Debug, Clone)]
struct SizeList(Vec<usize>);

impl FromStr for SizeList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let sizes: Result<Vec<usize>, _> = s
            .split(',')
            .map(|part| part.trim().parse::<usize>())
            .collect();
        match sizes {
            Ok(v) if !v.is_empty() => Ok(SizeList(v)),
            _ => Err(format!("bad size list {s:?}")),
        }
    }
}

#[derive(Args)]
struct FeaturizeArgs {
    /// Dataset directory.
    #[arg(long)]
    dataset: PathBuf,
    /// Which split to featurize.
    #[arg(long, default_value = "train")]
    split: String,
    /// Number of landscapes kept per bin.
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Number of bin points.
    #[arg(long, default_value_t = 50)]
    q: usize,
    /// Output file; `.csv` selects the CSV format, anything else binary.
    #[arg(long)]
    out: PathBuf,
    /// Force `bin` or `csv` regardless of the extension.
    #[arg(long)]
    format: Option<String>,
    /// Worker threads for featurization.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct DiagramArgs {
    /// A binary PGM (P5) image.
    image: PathBuf,
    /// Output JSON path.
    #[arg(long)]
    out: PathBuf,
    /// Also dump the filtered complex (cells with dim, value, boundary).
    #[arg(long)]
    complex_out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// baseline | topo | landscape_only
    #[arg(long)]
    variant: Option<Variant>,
    /// Subsample the training split to this many images.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// adam | sgd
    #[arg(long)]
    optimizer: Option<OptimizerKind>,
    #[arg(long)]
    seed: Option<u64>,
    /// Checkpoint prefix; writes `<out>.json` and `<out>.bin`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// key=value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Checkpoint prefix written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Write per-sample raw logits (CSV: index,logits...).
    #[arg(long)]
    logits_out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct EnsembleArgs {
    /// Logits CSV of the backbone network.
    #[arg(long)]
    backbone_logits: PathBuf,
    /// Logits CSV of the landscape network.
    #[arg(long)]
    landscape_logits: PathBuf,
    /// Dataset directory; labels come from its test split.
    #[arg(long)]
    dataset: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// baseline | topo | landscape_only | ensemble
    #[arg(long)]
    variant: Option<Variant>,
    /// Comma-separated training sizes, for example `100,300,500,1000`.
    #[arg(long)]
    sizes: Option<SizeList>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    optimizer: Option<OptimizerKind>,
    /// Report directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// key=value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn main() {
    if let Err(err) = run() {
        eprintln!("{}", serde_json::json!({ "error": format!("{err:#}") }));
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Featurize(args) => featurize_cmd(args),
        Command::Diagram(args) => diagram_cmd(args),
        Command::Train(args) => train_cmd(args),
        Command::Evaluate(args) => evaluate_cmd(args),
        Command::Ensemble(args) => ensemble_cmd(args),
        Command::Experiment(args) => experiment_cmd(args),
    }
}

/// Loads the train and test splits of a dataset directory, auto-detecting
/// the IDX pair layout vs a PGM class tree.
fn load_dataset(dir: &Path) -> Result<(LabeledImageSet, LabeledImageSet)> {
    let idx_train = dir.join("train-images-idx3-ubyte");
    if idx_train.is_file() {
        let train = load_idx(&idx_train, &dir.join("train-labels-idx1-ubyte"))?;
        let test = load_idx(
            &dir.join("t10k-images-idx3-ubyte"),
            &dir.join("t10k-labels-idx1-ubyte"),
        )?;
        return Ok((train, test));
    }
    if dir.join("train").is_dir() {
        let train = load_image_dir(&dir.join("train"))?;
        let test = load_image_dir(&dir.join("test"))?;
        return Ok((train, test));
    }
    bail!(
        "{}: expected IDX files or train/ and test/ class trees",
        dir.display()
    )
}

fn pick_split(dir: &Path, split: &str) -> Result<LabeledImageSet> {
    let (train, test) = load_dataset(dir)?;
    match split {
        "train" => Ok(train),
        "test" => Ok(test),
        other => bail!("unknown split {other:?}, expected train or test"),
    }
}

fn featurize_cmd(args: FeaturizeArgs) -> Result<()> {
    let set = pick_split(&args.dataset, &args.split)?;
    let params = LandscapeParams::over_unit_range(args.k, args.q)?;
    let features = featurize_batch(set.images(), &params, args.workers);
    let format = match &args.format {
        Some(f) => f.clone(),
        None => {
            if args.out.extension().is_some_and(|e| e == "csv") {
                "csv".into()
            } else {
                "bin".into()
            }
        }
    };
    match format.as_str() {
        "bin" => write_features_bin(&args.out, &features, set.labels(), &params)?,
        "csv" => write_features_csv(&args.out, &features, set.labels())?,
        other => bail!("unknown feature format {other:?}, expected bin or csv"),
    }
    println!(
        "{}",
        serde_json::json!({
            "written": args.out,
            "count": features.len(),
            "k": args.k,
            "q": args.q,
            "format": format,
        })
    );
    Ok(())
}

fn diagram_cmd(args: DiagramArgs) -> Result<()> {
    let image = load_pgm(&args.image)?;
    let complex = build_complex(&image);
    let diagram = compute_diagram(&complex);
    write_diagram_json(&args.out, &diagram)?;
    if let Some(path) = &args.complex_out {
        let text = serde_json::to_string_pretty(complex.cells())?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    println!(
        "{}",
        serde_json::json!({
            "written": args.out,
            "d0": diagram.d0.len(),
            "d1": diagram.d1.len(),
        })
    );
    Ok(())
}

fn train_cmd(args: TrainArgs) -> Result<()> {
    let cfg = ConfigFile::load(args.config.as_deref())?;
    let dataset: PathBuf = cfg
        .resolve_opt("dataset", args.dataset)?
        .context("missing --dataset")?;
    let variant = cfg.resolve("variant", args.variant, Variant::Topo)?;
    if variant == Variant::Ensemble {
        bail!("`train` fits a single model; use `experiment --variant ensemble`");
    }
    let k = cfg.resolve("k", args.k, 3)?;
    let q = cfg.resolve("q", args.q, 50)?;
    let seed = cfg.resolve("seed", args.seed, 0)?;
    let workers = cfg.resolve("workers", args.workers, 1)?;
    let out: PathBuf = cfg.resolve_opt("out", args.out)?.context("missing --out")?;
    let train_config = resolve_train_config(
        &cfg,
        variant,
        args.epochs,
        args.lr,
        args.batch_size,
        args.optimizer,
        seed,
    )?;

    let (mut train_set, _) = load_dataset(&dataset)?;
    if let Some(n) = cfg.resolve_opt("n", args.n)? {
        train_set = train_set.subsample(n, seed)?;
    }
    let params = LandscapeParams::over_unit_range(k, q)?;
    let features = variant
        .needs_features()
        .then(|| featurize_batch(train_set.images(), &params, workers));
    let pixels = variant.needs_pixels().then(|| {
        train_set
            .images()
            .iter()
            .map(|i| i.pixels().to_vec())
            .collect::<Vec<_>>()
    });

    let spec = ModelSpec {
        class_count: train_set.class_count(),
        landscape_input: variant
            .needs_features()
            .then_some((params.len(), params.len())),
        pixel_input: variant
            .needs_pixels()
            .then(|| train_set.images()[0].pixels().len()),
    };
    let mut model = init_model(&spec, seed)?;
    let data = TrainSet {
        features,
        pixels,
        labels: train_set.labels().to_vec(),
    };
    let history = train(&mut model, &data, &train_config)?;
    save_checkpoint(
        &model,
        &out,
        &CheckpointMeta {
            seed: Some(seed),
            train: Some(train_config),
            k: Some(k),
            q: Some(q),
        },
    )?;
    let last = history.last().unwrap();
    println!(
        "{}",
        serde_json::json!({
            "checkpoint": out,
            "samples": data.labels.len(),
            "epochs": history.len(),
            "final_loss": last.loss,
            "final_train_accuracy": last.accuracy,
        })
    );
    Ok(())
}

/// Per-variant training defaults: Adam 1e-3 batch 32 for models with a
/// pixel branch, the SGD landscape recipe for the standalone landscape
/// network. Flags and config entries override individual fields.
fn resolve_train_config(
    cfg: &ConfigFile,
    variant: Variant,
    epochs: Option<usize>,
    lr: Option<f64>,
    batch_size: Option<usize>,
    optimizer: Option<OptimizerKind>,
    seed: u64,
) -> Result<TrainConfig> {
    let default = match variant {
        Variant::LandscapeOnly => TrainConfig::landscape_recipe(40, seed),
        _ => TrainConfig::adam(1e-3, 32, 60, seed),
    };
    Ok(TrainConfig {
        optimizer: cfg.resolve("optimizer", optimizer, default.optimizer)?,
        learning_rate: cfg.resolve("lr", lr, default.learning_rate)?,
        batch_size: cfg.resolve("batch-size", batch_size, default.batch_size)?,
        epochs: cfg.resolve("epochs", epochs, default.epochs)?,
        seed,
    })
}

fn evaluate_cmd(args: EvaluateArgs) -> Result<()> {
    let (model, manifest) = load_checkpoint(&args.model)?;
    let (_, test) = load_dataset(&args.dataset)?;

    let features = match &manifest.landscape {
        Some(dims) => {
            let k = dims.k.context("checkpoint does not record k")?;
            let q = dims.q.context("checkpoint does not record q")?;
            let params = LandscapeParams::over_unit_range(k, q)?;
            Some(featurize_batch(test.images(), &params, args.workers))
        }
        None => None,
    };
    let needs_pixels = manifest.pixel.is_some();

    let mut correct = 0usize;
    let mut logits_rows = Vec::new();
    for i in 0..test.len() {
        let feature = features.as_ref().map(|f| &f[i]);
        let pixels = needs_pixels.then(|| test.images()[i].pixels());
        if args.logits_out.is_some() {
            let logits = forward(&model, feature, pixels, Mode::Eval)?;
            let pred = topoclass_core::neuralnet::argmax(&logits);
            logits_rows.push((i, logits));
            if pred == test.labels()[i] {
                correct += 1;
            }
        } else if predict_one(&model, feature, pixels)? == test.labels()[i] {
            correct += 1;
        }
    }
    if let Some(path) = &args.logits_out {
        topoclass_core::neuralnet::write_logits_csv(path, &logits_rows)?;
    }
    println!(
        "{}",
        serde_json::json!({
            "samples": test.len(),
            "accuracy": correct as f64 / test.len() as f64,
        })
    );
    Ok(())
}

fn ensemble_cmd(args: EnsembleArgs) -> Result<()> {
    let (_, test) = load_dataset(&args.dataset)?;
    let accuracy = ensemble_evaluate(&args.backbone_logits, &args.landscape_logits, test.labels())?;
    println!("{}", serde_json::json!({ "accuracy": accuracy }));
    Ok(())
}

fn experiment_cmd(args: ExperimentArgs) -> Result<()> {
    let cfg = ConfigFile::load(args.config.as_deref())?;
    let dataset: PathBuf = cfg
        .resolve_opt("dataset", args.dataset)?
        .context("missing --dataset")?;
    let variant = cfg.resolve("variant", args.variant, Variant::Topo)?;
    let sizes = cfg
        .resolve_opt("sizes", args.sizes)?
        .context("missing --sizes")?;
    let folds = cfg.resolve("folds", args.folds, 10)?;
    let seed = cfg.resolve("seed", args.seed, 0)?;
    let k = cfg.resolve("k", args.k, 3)?;
    let q = cfg.resolve("q", args.q, 50)?;
    let workers = cfg.resolve("workers", args.workers, 1)?;
    let out: PathBuf = cfg.resolve_opt("out", args.out)?.context("missing --out")?;
    let train_config = resolve_train_config(
        &cfg,
        variant,
        args.epochs,
        args.lr,
        args.batch_size,
        args.optimizer,
        seed,
    )?;

    let (train_set, test_set) = load_dataset(&dataset)?;
    let experiment = ExperimentConfig {
        landscape: LandscapeParams::over_unit_range(k, q)?,
        sizes: sizes.0,
        folds,
        variant,
        train: train_config,
        base_seed: seed,
        workers,
        out_dir: Some(out.clone()),
    };
    let reports = run_experiment(
        &ExperimentData {
            train: &train_set,
            test: &test_set,
            test_features: None,
        },
        &experiment,
    )?;
    for report in &reports {
        println!(
            "{}",
            serde_json::json!({
                "variant": report.variant,
                "n": report.n,
                "mean_accuracy": report.mean_accuracy,
                "std_accuracy": report.std_accuracy,
                "completed_folds": report.completed_folds,
                "out": out,
            })
        );
    }
    Ok(())
}

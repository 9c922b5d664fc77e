//! Training-size experiments with seeded, paired folds.
//!
//! For every training size `n` and fold `f`, the subsample seed is derived
//! as `mix(base_seed, n, f)` and the weight-initialization seed as
//! `mix(base_seed, f)`. Derivation is by value, not by position, so adding
//! a new size never perturbs existing folds, and two variants run with the
//! same base seed see identical subsamples and identical initialization of
//! their shared layers. Folds are independent and may run in parallel;
//! reports are assembled in `(variant, n, fold)` order so output bytes do
//! not depend on scheduling.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::imageio::{ImageIoError, LabeledImageSet};
use crate::landscape::{featurize_batch, LandscapeError, LandscapeFeature, LandscapeParams};
use crate::neuralnet::{
    ensemble_combine, forward, init_model, train, Mode, ModelParams, ModelSpec, NeuralNetError,
    TrainConfig, TrainError, TrainSet,
};
use crate::rng::mix;

/// Epochs used for the standalone landscape network inside the ensemble
/// variant (two decay steps of its SGD schedule).
pub const ENSEMBLE_LANDSCAPE_EPOCHS: usize = 40;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Image(#[from] ImageIoError),
    #[error(transparent)]
    Landscape(#[from] LandscapeError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Model(#[from] NeuralNetError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("inconsistent inputs: {0}")]
    Consistency(String),
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Pixel branch + head only.
    Baseline,
    /// Landscape branch next to the pixel branch, trained jointly.
    Topo,
    /// Landscape branch + head only.
    LandscapeOnly,
    /// Baseline backbone and a separately trained landscape network,
    /// combined at inference by summing softmax outputs.
    Ensemble,
}

impl Variant {
    pub fn needs_features(self) -> bool {
        self != Variant::Baseline
    }

    pub fn needs_pixels(self) -> bool {
        self != Variant::LandscapeOnly
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Variant::Baseline => "baseline",
            Variant::Topo => "topo",
            Variant::LandscapeOnly => "landscape_only",
            Variant::Ensemble => "ensemble",
        };
        write!(f, "{name}")
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(Variant::Baseline),
            "topo" => Ok(Variant::Topo),
            "landscape_only" | "landscape-only" => Ok(Variant::LandscapeOnly),
            "ensemble" => Ok(Variant::Ensemble),
            other => Err(format!("unknown variant {other:?}")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub landscape: LandscapeParams,
    pub sizes: Vec<usize>,
    pub folds: usize,
    pub variant: Variant,
    /// Training recipe for the main model (the backbone, for the ensemble
    /// variant; the landscape network always uses its own SGD recipe).
    pub train: TrainConfig,
    pub base_seed: u64,
    pub workers: usize,
    pub out_dir: Option<PathBuf>,
}

/// The datasets an experiment runs on. `test_features` may carry
/// precomputed landscape vectors for the test set (they must match the
/// config's landscape parameters); otherwise they are computed on demand.
#[derive(Debug, Clone, Copy)]
pub struct ExperimentData<'a> {
    pub train: &'a LabeledImageSet,
    pub test: &'a LabeledImageSet,
    pub test_features: Option<&'a [LandscapeFeature]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub subsample_seed: u64,
    pub init_seed: u64,
    /// Test accuracy; absent when the fold failed.
    pub accuracy: Option<f64>,
    pub error: Option<String>,
    /// Row = true class, column = prediction. Empty when the fold failed.
    pub confusion: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FoldReport {
    pub variant: Variant,
    pub n: usize,
    pub folds: usize,
    pub completed_folds: usize,
    /// True when at least one fold failed; the mean then covers fewer runs.
    pub incomplete: bool,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub accuracies: Vec<f64>,
    pub per_class_accuracy: Vec<f64>,
    /// Confusion counts summed over completed folds.
    pub confusion: Vec<Vec<u64>>,
    pub per_fold: Vec<FoldOutcome>,
}

fn population_std(values: &[f64], mean: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64).sqrt()
}

fn flatten_pixels(set: &LabeledImageSet) -> Vec<Vec<f64>> {
    set.images()
        .iter()
        .map(|img| img.pixels().to_vec())
        .collect()
}

/// Eval-mode pass over a whole test set, producing accuracy and the
/// confusion matrix (rows = true class).
fn eval_confusion(
    model: &ModelParams,
    features: Option<&[LandscapeFeature]>,
    pixels: Option<&[Vec<f64>]>,
    labels: &[usize],
    class_count: usize,
) -> Result<(f64, Vec<Vec<u64>>), HarnessError> {
    let mut confusion = vec![vec![0u64; class_count]; class_count];
    let mut correct = 0usize;
    for (i, &label) in labels.iter().enumerate() {
        let logits = forward(
            model,
            features.map(|f| &f[i]),
            pixels.map(|p| p[i].as_slice()),
            Mode::Eval,
        )?;
        let pred = crate::neuralnet::argmax(&logits);
        confusion[label][pred] += 1;
        if pred == label {
            correct += 1;
        }
    }
    Ok((correct as f64 / labels.len() as f64, confusion))
}

struct FoldContext<'a> {
    cfg: &'a ExperimentConfig,
    train_set: &'a LabeledImageSet,
    test_labels: &'a [usize],
    test_features: Option<&'a [LandscapeFeature]>,
    test_pixels: Option<&'a [Vec<f64>]>,
    class_count: usize,
}

fn run_fold(ctx: &FoldContext<'_>, n: usize, fold: usize) -> FoldOutcome {
    let cfg = ctx.cfg;
    let subsample_seed = mix(&[cfg.base_seed, n as u64, fold as u64]);
    let init_seed = mix(&[cfg.base_seed, fold as u64]);
    let train_seed = mix(&[cfg.base_seed, n as u64, fold as u64, 1]);

    let result = (|| -> Result<(f64, Vec<Vec<u64>>), HarnessError> {
        let sub = ctx.train_set.subsample(n, subsample_seed)?;
        let sub_pixels = cfg.variant.needs_pixels().then(|| flatten_pixels(&sub));
        let sub_features = cfg
            .variant
            .needs_features()
            .then(|| featurize_batch(sub.images(), &cfg.landscape, 1));
        let pixel_input = sub.images()[0].pixels().len();
        let feature_len = cfg.landscape.len();
        let mut main_config = cfg.train;
        main_config.seed = train_seed;

        match cfg.variant {
            Variant::Baseline | Variant::Topo | Variant::LandscapeOnly => {
                let spec = ModelSpec {
                    class_count: ctx.class_count,
                    landscape_input: cfg
                        .variant
                        .needs_features()
                        .then_some((feature_len, feature_len)),
                    pixel_input: cfg.variant.needs_pixels().then_some(pixel_input),
                };
                let mut model = init_model(&spec, init_seed)?;
                let data = TrainSet {
                    features: sub_features,
                    pixels: sub_pixels,
                    labels: sub.labels().to_vec(),
                };
                train(&mut model, &data, &main_config)?;
                // ctx carries features/pixels exactly when the variant needs them
                Ok(eval_confusion(
                    &model,
                    ctx.test_features,
                    ctx.test_pixels,
                    ctx.test_labels,
                    ctx.class_count,
                )?)
            }
            Variant::Ensemble => {
                // The backbone is trained exactly like the baseline
                // variant (same seeds), so per-fold comparisons are paired.
                let mut backbone = init_model(
                    &ModelSpec {
                        class_count: ctx.class_count,
                        landscape_input: None,
                        pixel_input: Some(pixel_input),
                    },
                    init_seed,
                )?;
                train(
                    &mut backbone,
                    &TrainSet {
                        features: None,
                        pixels: sub_pixels,
                        labels: sub.labels().to_vec(),
                    },
                    &main_config,
                )?;

                let mut landscape_net = init_model(
                    &ModelSpec {
                        class_count: ctx.class_count,
                        landscape_input: Some((feature_len, feature_len)),
                        pixel_input: None,
                    },
                    init_seed,
                )?;
                let landscape_config = TrainConfig::landscape_recipe(
                    ENSEMBLE_LANDSCAPE_EPOCHS,
                    mix(&[cfg.base_seed, n as u64, fold as u64, 2]),
                );
                train(
                    &mut landscape_net,
                    &TrainSet {
                        features: sub_features,
                        pixels: None,
                        labels: sub.labels().to_vec(),
                    },
                    &landscape_config,
                )?;

                let test_features = ctx.test_features.unwrap();
                let test_pixels = ctx.test_pixels.unwrap();
                let mut confusion = vec![vec![0u64; ctx.class_count]; ctx.class_count];
                let mut correct = 0usize;
                for (i, &label) in ctx.test_labels.iter().enumerate() {
                    let backbone_logits =
                        forward(&backbone, None, Some(&test_pixels[i]), Mode::Eval)?;
                    let landscape_logits =
                        forward(&landscape_net, Some(&test_features[i]), None, Mode::Eval)?;
                    let pred = ensemble_combine(&backbone_logits, &landscape_logits)?;
                    confusion[label][pred] += 1;
                    if pred == label {
                        correct += 1;
                    }
                }
                Ok((correct as f64 / ctx.test_labels.len() as f64, confusion))
            }
        }
    })();

    match result {
        Ok((accuracy, confusion)) => FoldOutcome {
            fold,
            subsample_seed,
            init_seed,
            accuracy: Some(accuracy),
            error: None,
            confusion,
        },
        Err(e) => FoldOutcome {
            fold,
            subsample_seed,
            init_seed,
            accuracy: None,
            error: Some(e.to_string()),
            confusion: Vec::new(),
        },
    }
}

fn assemble_report(
    variant: Variant,
    n: usize,
    folds: usize,
    class_count: usize,
    per_fold: Vec<FoldOutcome>,
) -> FoldReport {
    let accuracies: Vec<f64> = per_fold.iter().filter_map(|o| o.accuracy).collect();
    let completed = accuracies.len();
    let mean = if completed > 0 {
        accuracies.iter().sum::<f64>() / completed as f64
    } else {
        0.0
    };
    let mut confusion = vec![vec![0u64; class_count]; class_count];
    for outcome in &per_fold {
        if outcome.accuracy.is_some() {
            for (row, src) in confusion.iter_mut().zip(&outcome.confusion) {
                for (cell, v) in row.iter_mut().zip(src) {
                    *cell += v;
                }
            }
        }
    }
    let per_class_accuracy = confusion
        .iter()
        .enumerate()
        .map(|(c, row)| {
            let total: u64 = row.iter().sum();
            if total == 0 {
                0.0
            } else {
                row[c] as f64 / total as f64
            }
        })
        .collect();
    FoldReport {
        variant,
        n,
        folds,
        completed_folds: completed,
        incomplete: completed < folds,
        mean_accuracy: mean,
        std_accuracy: population_std(&accuracies, mean),
        accuracies,
        per_class_accuracy,
        confusion,
        per_fold,
    }
}

/// Runs the training-size sweep for one variant: for every size, `folds`
/// seeded subsample/train/evaluate rounds against the fixed test set.
/// Failed folds are recorded in the report, never dropped. When
/// `cfg.out_dir` is set, one JSON report per size plus a flat CSV of
/// per-fold accuracies are written there.
pub fn run_experiment(
    data: &ExperimentData<'_>,
    cfg: &ExperimentConfig,
) -> Result<Vec<FoldReport>, HarnessError> {
    if cfg.folds == 0 {
        return Err(HarnessError::InvalidConfig("folds must be >= 1".into()));
    }
    if cfg.sizes.is_empty() {
        return Err(HarnessError::InvalidConfig(
            "no training sizes given".into(),
        ));
    }
    if let Some(&bad) = cfg.sizes.iter().find(|&&n| n == 0 || n > data.train.len()) {
        return Err(HarnessError::InvalidConfig(format!(
            "training size {bad} outside 1..={}",
            data.train.len()
        )));
    }
    if data.test.is_empty() {
        return Err(HarnessError::InvalidConfig("test set is empty".into()));
    }
    if data.train.class_count() != data.test.class_count() {
        return Err(HarnessError::Consistency(format!(
            "train has {} classes, test has {}",
            data.train.class_count(),
            data.test.class_count()
        )));
    }
    if let Some(tf) = data.test_features {
        if tf.len() != data.test.len() {
            return Err(HarnessError::Consistency(
                "test feature count does not match test set".into(),
            ));
        }
        if tf[0].v0.len() != cfg.landscape.len() {
            return Err(HarnessError::Consistency(
                "test features were computed with different landscape parameters".into(),
            ));
        }
    }

    let computed_features = if cfg.variant.needs_features() && data.test_features.is_none() {
        Some(featurize_batch(
            data.test.images(),
            &cfg.landscape,
            cfg.workers,
        ))
    } else {
        None
    };
    let test_features = cfg.variant.needs_features().then(|| {
        data.test_features
            .unwrap_or_else(|| computed_features.as_deref().unwrap())
    });
    let test_pixels = cfg
        .variant
        .needs_pixels()
        .then(|| flatten_pixels(data.test));

    let ctx = FoldContext {
        cfg,
        train_set: data.train,
        test_labels: data.test.labels(),
        test_features,
        test_pixels: test_pixels.as_deref(),
        class_count: data.train.class_count(),
    };

    let mut reports = Vec::with_capacity(cfg.sizes.len());
    for &n in &cfg.sizes {
        let per_fold: Vec<FoldOutcome> = (0..cfg.folds)
            .into_par_iter()
            .map(|f| run_fold(&ctx, n, f))
            .collect();
        reports.push(assemble_report(
            cfg.variant,
            n,
            cfg.folds,
            ctx.class_count,
            per_fold,
        ));
    }

    if let Some(dir) = &cfg.out_dir {
        write_reports(&reports, dir)?;
    }
    Ok(reports)
}

/// Writes one pretty-printed JSON report per `(variant, n)` and a flat
/// CSV of per-fold accuracies. Output is byte-deterministic for a fixed
/// input.
pub fn write_reports(reports: &[FoldReport], dir: &Path) -> Result<(), HarnessError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| HarnessError::Io {
            path: path.clone(),
            source,
        }
    };
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    for report in reports {
        let path = dir.join(format!("report_{}_{}.json", report.variant, report.n));
        let text = serde_json::to_string_pretty(report).expect("report serializes");
        std::fs::write(&path, text + "\n").map_err(io_err(&path))?;
    }
    if let Some(variant) = reports.first().map(|r| r.variant) {
        let path = dir.join(format!("folds_{variant}.csv"));
        let mut csv = String::from("variant,n,fold,accuracy\n");
        for report in reports {
            for outcome in &report.per_fold {
                let acc = outcome.accuracy.map(|a| a.to_string()).unwrap_or_default();
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    report.variant, report.n, outcome.fold, acc
                ));
            }
        }
        std::fs::write(&path, csv).map_err(io_err(&path))?;
    }
    Ok(())
}

/// Elementwise difference of the two reports' summed confusion matrices
/// (topological variant minus baseline). Positive diagonal entries mean
/// the topological variant gained correct predictions.
pub fn confusion_delta(
    report_topo: &FoldReport,
    report_base: &FoldReport,
) -> Result<Vec<Vec<i64>>, HarnessError> {
    if report_topo.confusion.len() != report_base.confusion.len() {
        return Err(HarnessError::Consistency(
            "reports have different class counts".into(),
        ));
    }
    let total = |r: &FoldReport| -> u64 { r.confusion.iter().flatten().sum() };
    if total(report_topo) != total(report_base) {
        return Err(HarnessError::Consistency(
            "reports cover different numbers of classified samples".into(),
        ));
    }
    Ok(report_topo
        .confusion
        .iter()
        .zip(&report_base.confusion)
        .map(|(t, b)| {
            t.iter()
                .zip(b)
                .map(|(&x, &y)| x as i64 - y as i64)
                .collect()
        })
        .collect())
}

/// Per-class accuracy difference in percentage points (topological variant
/// minus baseline).
pub fn per_class_gain(
    report_topo: &FoldReport,
    report_base: &FoldReport,
) -> Result<Vec<f64>, HarnessError> {
    if report_topo.per_class_accuracy.len() != report_base.per_class_accuracy.len() {
        return Err(HarnessError::Consistency(
            "reports have different class counts".into(),
        ));
    }
    Ok(report_topo
        .per_class_accuracy
        .iter()
        .zip(&report_base.per_class_accuracy)
        .map(|(t, b)| (t - b) * 100.0)
        .collect())
}

/// Combines two logits files (CSV rows of `sample_index,logits...`) with
/// the softmax-sum rule and scores against the labels. Both files must
/// cover exactly the same sample indices.
pub fn ensemble_evaluate(
    backbone_logits: &Path,
    landscape_logits: &Path,
    labels: &[usize],
) -> Result<f64, HarnessError> {
    let mut a = crate::neuralnet::read_logits_csv(backbone_logits)?;
    let mut b = crate::neuralnet::read_logits_csv(landscape_logits)?;
    a.sort_by_key(|(i, _)| *i);
    b.sort_by_key(|(i, _)| *i);
    if a.len() != b.len() || a.iter().zip(&b).any(|((i, _), (j, _))| i != j) {
        return Err(HarnessError::Consistency(
            "logits files cover different sample indices".into(),
        ));
    }
    if a.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(HarnessError::Consistency(
            "duplicate sample index in logits file".into(),
        ));
    }
    let mut correct = 0usize;
    for ((index, la), (_, lb)) in a.iter().zip(&b) {
        let label = *labels.get(*index).ok_or_else(|| {
            HarnessError::Consistency(format!("sample index {index} outside label range"))
        })?;
        if ensemble_combine(la, lb)? == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / a.len() as f64)
}

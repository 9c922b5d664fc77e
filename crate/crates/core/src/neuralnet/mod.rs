//! A minimal, manually differentiated classifier stack.
//!
//! Two optional branches feed a linear head:
//!
//! * the landscape branch runs each homology dimension's landscape vector
//!   through its own linear layer, batch norm and ReLU, then concatenates
//!   the two activations;
//! * the pixel branch is a two-layer perceptron over flattened pixels.
//!
//! A model with only the pixel branch is the baseline; adding the
//! landscape branch gives its topological counterpart; a landscape-only
//! model is the standalone landscape network used for ensembling.
//! Gradients are hand-derived and checked against finite differences.

pub mod batchnorm;
pub mod linear;
mod train;

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use batchnorm::{BatchNorm, BnCache, BnGrad};
pub use linear::{Linear, LinearGrad};
pub use train::{
    batch_gradients, batch_loss, train, EpochStats, OptimizerKind, TrainConfig, TrainError,
    TrainSet,
};

use crate::landscape::LandscapeFeature;
use crate::rng::{mix, SplitMix64};

/// Hidden width of each landscape-branch linear layer.
pub const LANDSCAPE_HIDDEN: usize = 64;
/// Pixel-branch widths: input -> 128 -> 64.
pub const PIXEL_HIDDEN1: usize = 128;
pub const PIXEL_HIDDEN2: usize = 64;
pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPSILON: f64 = 1e-5;
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;
/// Step decay applied to the SGD learning rate every [`SGD_DECAY_EVERY`] epochs.
pub const SGD_DECAY_FACTOR: f64 = 0.5;
pub const SGD_DECAY_EVERY: usize = 20;

// Per-tensor seed tags: layers shared between architectures draw from the
// same stream, so a baseline and its topological counterpart initialized
// from one seed get identical pixel-branch weights.
const TAG_LANDSCAPE_L0: u64 = 0x11;
const TAG_LANDSCAPE_L1: u64 = 0x12;
const TAG_PIXEL_A: u64 = 0x21;
const TAG_PIXEL_B: u64 = 0x22;
const TAG_HEAD: u64 = 0x31;

#[derive(Debug, thiserror::Error)]
pub enum NeuralNetError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {detail}")]
    Format { path: PathBuf, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Landscape branch: one linear + batch norm per homology dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeBranch {
    pub linear0: Linear,
    pub bn0: BatchNorm,
    pub linear1: Linear,
    pub bn1: BatchNorm,
}

/// Pixel branch: two-layer perceptron with ReLU after each layer.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelBranch {
    pub linear_a: Linear,
    pub linear_b: Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub landscape: Option<LandscapeBranch>,
    pub pixel: Option<PixelBranch>,
    pub head: Linear,
}

/// Architecture description used to initialize a model.
#[derive(Debug, Clone, Copy)]
pub struct ModelSpec {
    pub class_count: usize,
    /// Lengths of the two landscape vectors (`k*q` each), if the branch exists.
    pub landscape_input: Option<(usize, usize)>,
    /// Flattened pixel count, if the branch exists.
    pub pixel_input: Option<usize>,
}

impl ModelSpec {
    pub fn head_input(&self) -> usize {
        self.landscape_input.map_or(0, |_| 2 * LANDSCAPE_HIDDEN)
            + self.pixel_input.map_or(0, |_| PIXEL_HIDDEN2)
    }
}

/// Initializes a model. Each tensor draws from its own seeded stream, so
/// layers shared between two architectures (same seed, same shape) start
/// from identical weights.
pub fn init_model(spec: &ModelSpec, seed: u64) -> Result<ModelParams, NeuralNetError> {
    if spec.landscape_input.is_none() && spec.pixel_input.is_none() {
        return Err(NeuralNetError::InvalidModel(
            "model needs at least one input branch".into(),
        ));
    }
    if spec.class_count < 2 {
        return Err(NeuralNetError::InvalidModel(
            "need at least two classes".into(),
        ));
    }
    let layer_rng = |tag: u64| SplitMix64::new(mix(&[seed, tag]));
    let landscape = spec.landscape_input.map(|(in0, in1)| LandscapeBranch {
        linear0: Linear::glorot(in0, LANDSCAPE_HIDDEN, &mut layer_rng(TAG_LANDSCAPE_L0)),
        bn0: BatchNorm::new(LANDSCAPE_HIDDEN, BN_MOMENTUM, BN_EPSILON),
        linear1: Linear::glorot(in1, LANDSCAPE_HIDDEN, &mut layer_rng(TAG_LANDSCAPE_L1)),
        bn1: BatchNorm::new(LANDSCAPE_HIDDEN, BN_MOMENTUM, BN_EPSILON),
    });
    let pixel = spec.pixel_input.map(|input| PixelBranch {
        linear_a: Linear::glorot(input, PIXEL_HIDDEN1, &mut layer_rng(TAG_PIXEL_A)),
        linear_b: Linear::glorot(PIXEL_HIDDEN1, PIXEL_HIDDEN2, &mut layer_rng(TAG_PIXEL_B)),
    });
    let head = Linear::glorot(
        spec.head_input(),
        spec.class_count,
        &mut layer_rng(TAG_HEAD),
    );
    Ok(ModelParams {
        landscape,
        pixel,
        head,
    })
}

impl ModelParams {
    pub fn class_count(&self) -> usize {
        self.head.out_dim
    }

    /// Trainable tensors in canonical order (matching
    /// [`ModelGrads::tensors`]). Batch-norm running statistics are state,
    /// not parameters, and are excluded.
    pub fn param_tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out: Vec<&mut Vec<f64>> = Vec::new();
        if let Some(ls) = &mut self.landscape {
            out.push(&mut ls.linear0.weights);
            out.push(&mut ls.linear0.bias);
            out.push(&mut ls.bn0.gamma);
            out.push(&mut ls.bn0.beta);
            out.push(&mut ls.linear1.weights);
            out.push(&mut ls.linear1.bias);
            out.push(&mut ls.bn1.gamma);
            out.push(&mut ls.bn1.beta);
        }
        if let Some(px) = &mut self.pixel {
            out.push(&mut px.linear_a.weights);
            out.push(&mut px.linear_a.bias);
            out.push(&mut px.linear_b.weights);
            out.push(&mut px.linear_b.bias);
        }
        out.push(&mut self.head.weights);
        out.push(&mut self.head.bias);
        out
    }

    /// Full state in serialization order: parameters plus batch-norm
    /// running statistics.
    fn state_tensors(&self) -> Vec<&Vec<f64>> {
        let mut out: Vec<&Vec<f64>> = Vec::new();
        if let Some(ls) = &self.landscape {
            out.extend([
                &ls.linear0.weights,
                &ls.linear0.bias,
                &ls.bn0.gamma,
                &ls.bn0.beta,
                &ls.bn0.running_mean,
                &ls.bn0.running_var,
                &ls.linear1.weights,
                &ls.linear1.bias,
                &ls.bn1.gamma,
                &ls.bn1.beta,
                &ls.bn1.running_mean,
                &ls.bn1.running_var,
            ]);
        }
        if let Some(px) = &self.pixel {
            out.extend([
                &px.linear_a.weights,
                &px.linear_a.bias,
                &px.linear_b.weights,
                &px.linear_b.bias,
            ]);
        }
        out.extend([&self.head.weights, &self.head.bias]);
        out
    }

    fn state_tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out: Vec<&mut Vec<f64>> = Vec::new();
        if let Some(ls) = &mut self.landscape {
            out.push(&mut ls.linear0.weights);
            out.push(&mut ls.linear0.bias);
            out.push(&mut ls.bn0.gamma);
            out.push(&mut ls.bn0.beta);
            out.push(&mut ls.bn0.running_mean);
            out.push(&mut ls.bn0.running_var);
            out.push(&mut ls.linear1.weights);
            out.push(&mut ls.linear1.bias);
            out.push(&mut ls.bn1.gamma);
            out.push(&mut ls.bn1.beta);
            out.push(&mut ls.bn1.running_mean);
            out.push(&mut ls.bn1.running_var);
        }
        if let Some(px) = &mut self.pixel {
            out.push(&mut px.linear_a.weights);
            out.push(&mut px.linear_a.bias);
            out.push(&mut px.linear_b.weights);
            out.push(&mut px.linear_b.bias);
        }
        out.push(&mut self.head.weights);
        out.push(&mut self.head.bias);
        out
    }
}

fn relu(v: f64) -> f64 {
    v.max(0.0)
}

fn relu_vec(xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|&v| relu(v)).collect()
}

fn relu_batch(xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    xs.iter().map(|x| relu_vec(x)).collect()
}

impl LandscapeBranch {
    fn check_input(&self, v0: &[f64], v1: &[f64]) -> Result<(), NeuralNetError> {
        if v0.len() != self.linear0.in_dim || v1.len() != self.linear1.in_dim {
            return Err(NeuralNetError::Shape(format!(
                "landscape inputs ({}, {}) do not match layer dims ({}, {})",
                v0.len(),
                v1.len(),
                self.linear0.in_dim,
                self.linear1.in_dim
            )));
        }
        Ok(())
    }

    /// Branch output for a batch: per dimension linear + batch norm +
    /// ReLU, concatenated. Train mode uses batch statistics and folds them
    /// into the running statistics; eval mode uses the running statistics
    /// and leaves the branch untouched.
    pub fn forward(
        &mut self,
        v0s: &[Vec<f64>],
        v1s: &[Vec<f64>],
        mode: Mode,
    ) -> Result<Vec<Vec<f64>>, NeuralNetError> {
        if v0s.len() != v1s.len() {
            return Err(NeuralNetError::Shape("v0/v1 batch lengths differ".into()));
        }
        if v0s.is_empty() {
            return Ok(Vec::new());
        }
        self.check_input(&v0s[0], &v1s[0])?;
        match mode {
            Mode::Train => {
                let (out, cache0, cache1) = self.forward_train_pure(v0s, v1s);
                self.bn0.update_running(&cache0);
                self.bn1.update_running(&cache1);
                Ok(out)
            }
            Mode::Eval => Ok(v0s
                .iter()
                .zip(v1s)
                .map(|(v0, v1)| self.forward_eval_one(v0, v1))
                .collect()),
        }
    }

    /// Train-mode forward without mutating running statistics.
    fn forward_train_pure(
        &self,
        v0s: &[Vec<f64>],
        v1s: &[Vec<f64>],
    ) -> (Vec<Vec<f64>>, BnCache, BnCache) {
        let z0 = self.linear0.forward_batch(v0s);
        let (b0, cache0) = self.bn0.forward_train(&z0);
        let z1 = self.linear1.forward_batch(v1s);
        let (b1, cache1) = self.bn1.forward_train(&z1);
        let out = b0
            .iter()
            .zip(&b1)
            .map(|(a, b)| {
                let mut row = relu_vec(a);
                row.extend(relu_vec(b));
                row
            })
            .collect();
        (out, cache0, cache1)
    }

    fn forward_eval_one(&self, v0: &[f64], v1: &[f64]) -> Vec<f64> {
        let mut out = relu_vec(&self.bn0.forward_eval_one(&self.linear0.forward_one(v0)));
        out.extend(relu_vec(
            &self.bn1.forward_eval_one(&self.linear1.forward_one(v1)),
        ));
        out
    }
}

/// The landscape-layer operation on its own: feeds the two landscape
/// vectors through the branch and returns the concatenated activations.
pub fn landscape_layer_forward(
    branch: &mut LandscapeBranch,
    v0s: &[Vec<f64>],
    v1s: &[Vec<f64>],
    mode: Mode,
) -> Result<Vec<Vec<f64>>, NeuralNetError> {
    branch.forward(v0s, v1s, mode)
}

impl PixelBranch {
    fn forward_one(&self, pixels: &[f64]) -> Vec<f64> {
        relu_vec(
            &self
                .linear_b
                .forward_one(&relu_vec(&self.linear_a.forward_one(pixels))),
        )
    }
}

/// Logits for one sample. The feature is required exactly when the model
/// has a landscape branch, the pixels exactly when it has a pixel branch.
/// Train mode normalizes by single-sample batch statistics and is only
/// useful for contract tests; eval mode uses running statistics.
pub fn forward(
    model: &ModelParams,
    feature: Option<&LandscapeFeature>,
    pixels: Option<&[f64]>,
    mode: Mode,
) -> Result<Vec<f64>, NeuralNetError> {
    let mut head_in: Vec<f64> = Vec::with_capacity(model.head.in_dim);
    match (&model.landscape, feature) {
        (Some(branch), Some(f)) => {
            branch.check_input(&f.v0, &f.v1)?;
            match mode {
                Mode::Eval => head_in.extend(branch.forward_eval_one(&f.v0, &f.v1)),
                Mode::Train => {
                    let (out, _, _) = branch.forward_train_pure(
                        std::slice::from_ref(&f.v0),
                        std::slice::from_ref(&f.v1),
                    );
                    head_in.extend(out.into_iter().next().unwrap());
                }
            }
        }
        (None, None) => {}
        (Some(_), None) => {
            return Err(NeuralNetError::Shape(
                "model has a landscape branch but no feature was given".into(),
            ))
        }
        (None, Some(_)) => {
            return Err(NeuralNetError::Shape(
                "feature given but model has no landscape branch".into(),
            ))
        }
    }
    match (&model.pixel, pixels) {
        (Some(branch), Some(px)) => {
            if px.len() != branch.linear_a.in_dim {
                return Err(NeuralNetError::Shape(format!(
                    "pixel input {} does not match layer dim {}",
                    px.len(),
                    branch.linear_a.in_dim
                )));
            }
            head_in.extend(branch.forward_one(px));
        }
        (None, None) => {}
        (Some(_), None) => {
            return Err(NeuralNetError::Shape(
                "model has a pixel branch but no image was given".into(),
            ))
        }
        (None, Some(_)) => {
            return Err(NeuralNetError::Shape(
                "image given but model has no pixel branch".into(),
            ))
        }
    }
    Ok(model.head.forward_one(&head_in))
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Eval-mode class prediction for one sample.
pub fn predict_one(
    model: &ModelParams,
    feature: Option<&LandscapeFeature>,
    pixels: Option<&[f64]>,
) -> Result<usize, NeuralNetError> {
    Ok(argmax(&forward(model, feature, pixels, Mode::Eval)?))
}

/// Eval-mode predictions for a whole set; independent of batch
/// composition by construction (running statistics only).
pub fn predict(
    model: &ModelParams,
    features: Option<&[LandscapeFeature]>,
    pixels: Option<&[Vec<f64>]>,
) -> Result<Vec<usize>, NeuralNetError> {
    let n = features
        .map(<[LandscapeFeature]>::len)
        .or(pixels.map(<[Vec<f64>]>::len))
        .unwrap_or(0);
    (0..n)
        .map(|i| {
            predict_one(
                model,
                features.map(|f| &f[i]),
                pixels.map(|p| p[i].as_slice()),
            )
        })
        .collect()
}

/// Combines two classifiers' raw logits: argmax of the sum of their
/// softmax vectors, ties to the lowest index.
pub fn ensemble_combine(logits1: &[f64], logits2: &[f64]) -> Result<usize, NeuralNetError> {
    if logits1.len() != logits2.len() {
        return Err(NeuralNetError::Shape(format!(
            "ensemble logit lengths differ: {} vs {}",
            logits1.len(),
            logits2.len()
        )));
    }
    let (p1, p2) = (softmax(logits1), softmax(logits2));
    let combined: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| a + b).collect();
    Ok(argmax(&combined))
}

// ---------------------------------------------------------------------------
// Checkpoints: JSON manifest next to a little-endian f64 blob.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LandscapeDims {
    pub input0: usize,
    pub input1: usize,
    pub hidden: usize,
    pub k: Option<usize>,
    pub q: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PixelDims {
    pub input: usize,
    pub hidden1: usize,
    pub hidden2: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub version: u32,
    pub class_count: usize,
    pub landscape: Option<LandscapeDims>,
    pub pixel: Option<PixelDims>,
    pub bn_momentum: f64,
    pub bn_epsilon: f64,
    pub seed: Option<u64>,
    pub train: Option<TrainConfig>,
    pub blob_len: usize,
}

/// Extra provenance stored in the manifest.
#[derive(Debug, Clone, Default)]
pub struct CheckpointMeta {
    pub seed: Option<u64>,
    pub train: Option<TrainConfig>,
    pub k: Option<usize>,
    pub q: Option<usize>,
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> NeuralNetError + '_ {
    move |source| NeuralNetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `<prefix>.json` (manifest) and `<prefix>.bin` (weights).
pub fn save_checkpoint(
    model: &ModelParams,
    prefix: &Path,
    meta: &CheckpointMeta,
) -> Result<(), NeuralNetError> {
    let tensors = model.state_tensors();
    let blob_len: usize = tensors.iter().map(|t| t.len()).sum();
    let manifest = CheckpointManifest {
        version: 1,
        class_count: model.class_count(),
        landscape: model.landscape.as_ref().map(|ls| LandscapeDims {
            input0: ls.linear0.in_dim,
            input1: ls.linear1.in_dim,
            hidden: ls.linear0.out_dim,
            k: meta.k,
            q: meta.q,
        }),
        pixel: model.pixel.as_ref().map(|px| PixelDims {
            input: px.linear_a.in_dim,
            hidden1: px.linear_a.out_dim,
            hidden2: px.linear_b.out_dim,
        }),
        bn_momentum: BN_MOMENTUM,
        bn_epsilon: BN_EPSILON,
        seed: meta.seed,
        train: meta.train,
        blob_len,
    };
    let json_path = prefix.with_extension("json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&json_path, text + "\n").map_err(io_err(&json_path))?;

    let bin_path = prefix.with_extension("bin");
    let mut blob = Vec::with_capacity(blob_len * 8);
    for tensor in tensors {
        for v in tensor {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(&bin_path, blob).map_err(io_err(&bin_path))
}

/// Loads a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(prefix: &Path) -> Result<(ModelParams, CheckpointManifest), NeuralNetError> {
    let json_path = prefix.with_extension("json");
    let text = std::fs::read_to_string(&json_path).map_err(io_err(&json_path))?;
    let manifest: CheckpointManifest =
        serde_json::from_str(&text).map_err(|e| NeuralNetError::Format {
            path: json_path.clone(),
            detail: e.to_string(),
        })?;
    if manifest.version != 1 {
        return Err(NeuralNetError::Format {
            path: json_path.clone(),
            detail: format!("unsupported checkpoint version {}", manifest.version),
        });
    }

    let mut model = ModelParams {
        landscape: manifest.landscape.as_ref().map(|d| LandscapeBranch {
            linear0: Linear {
                in_dim: d.input0,
                out_dim: d.hidden,
                weights: vec![0.0; d.input0 * d.hidden],
                bias: vec![0.0; d.hidden],
            },
            bn0: BatchNorm::new(d.hidden, manifest.bn_momentum, manifest.bn_epsilon),
            linear1: Linear {
                in_dim: d.input1,
                out_dim: d.hidden,
                weights: vec![0.0; d.input1 * d.hidden],
                bias: vec![0.0; d.hidden],
            },
            bn1: BatchNorm::new(d.hidden, manifest.bn_momentum, manifest.bn_epsilon),
        }),
        pixel: manifest.pixel.as_ref().map(|d| PixelBranch {
            linear_a: Linear {
                in_dim: d.input,
                out_dim: d.hidden1,
                weights: vec![0.0; d.input * d.hidden1],
                bias: vec![0.0; d.hidden1],
            },
            linear_b: Linear {
                in_dim: d.hidden1,
                out_dim: d.hidden2,
                weights: vec![0.0; d.hidden1 * d.hidden2],
                bias: vec![0.0; d.hidden2],
            },
        }),
        head: Linear {
            in_dim: manifest.landscape.as_ref().map_or(0, |d| 2 * d.hidden)
                + manifest.pixel.as_ref().map_or(0, |d| d.hidden2),
            out_dim: manifest.class_count,
            weights: vec![
                0.0;
                (manifest.landscape.as_ref().map_or(0, |d| 2 * d.hidden)
                    + manifest.pixel.as_ref().map_or(0, |d| d.hidden2))
                    * manifest.class_count
            ],
            bias: vec![0.0; manifest.class_count],
        },
    };

    let bin_path = prefix.with_extension("bin");
    let blob = std::fs::read(&bin_path).map_err(io_err(&bin_path))?;
    if blob.len() != manifest.blob_len * 8 {
        return Err(NeuralNetError::Format {
            path: bin_path.clone(),
            detail: format!(
                "weight blob has {} bytes, manifest says {}",
                blob.len(),
                manifest.blob_len * 8
            ),
        });
    }
    let mut offset = 0usize;
    for tensor in model.state_tensors_mut() {
        for v in tensor.iter_mut() {
            *v = f64::from_le_bytes(blob[offset..offset + 8].try_into().unwrap());
            offset += 8;
        }
    }
    if offset != blob.len() {
        return Err(NeuralNetError::Format {
            path: bin_path,
            detail: "weight blob size does not match model dimensions".into(),
        });
    }
    Ok((model, manifest))
}

// ---------------------------------------------------------------------------
// Logits exchange files: CSV with one row per sample, index then raw logits.
// ---------------------------------------------------------------------------

pub fn write_logits_csv(path: &Path, rows: &[(usize, Vec<f64>)]) -> Result<(), NeuralNetError> {
    let mut file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut line = String::new();
    for (index, logits) in rows {
        line.clear();
        line.push_str(&index.to_string());
        for l in logits {
            line.push(',');
            line.push_str(&l.to_string());
        }
        line.push('\n');
        file.write_all(line.as_bytes()).map_err(io_err(path))?;
    }
    Ok(())
}

pub fn read_logits_csv(path: &Path) -> Result<Vec<(usize, Vec<f64>)>, NeuralNetError> {
    let fmt_err = |detail: String| NeuralNetError::Format {
        path: path.to_path_buf(),
        detail,
    };
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let index: usize = fields
            .next()
            .unwrap()
            .trim()
            .parse()
            .map_err(|_| fmt_err(format!("line {}: bad sample index", lineno + 1)))?;
        let logits: Result<Vec<f64>, _> = fields.map(|f| f.trim().parse::<f64>()).collect();
        let logits =
            logits.map_err(|_| fmt_err(format!("line {}: bad logit value", lineno + 1)))?;
        if logits.is_empty() {
            return Err(fmt_err(format!("line {}: no logits", lineno + 1)));
        }
        rows.push((index, logits));
    }
    Ok(rows)
}

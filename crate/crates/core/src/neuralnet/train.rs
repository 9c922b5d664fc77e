//! Mini-batch training with hand-derived gradients.
//!
//! The backward pass mirrors the forward pass exactly; every parameter
//! gradient is covered by finite-difference checks in the test suites.
//! Training is single-threaded and bit-reproducible for a fixed
//! `(seed, dataset, config)`: batch order comes from a seeded shuffle and
//! all summations run in a fixed order.

use serde::{Deserialize, Serialize};

use super::batchnorm::{BnCache, BnGrad};
use super::linear::LinearGrad;
use super::{
    relu_batch, softmax, ModelParams, NeuralNetError, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON,
    SGD_DECAY_EVERY, SGD_DECAY_FACTOR,
};
use crate::landscape::LandscapeFeature;
use crate::rng::{mix, shuffle, SplitMix64};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] NeuralNetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

impl std::str::FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" => Ok(OptimizerKind::Sgd),
            other => Err(format!("unknown optimizer {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl TrainConfig {
    /// Adam with the standard moment constants; the default recipe for
    /// joint models.
    pub fn adam(learning_rate: f64, batch_size: usize, epochs: usize, seed: u64) -> Self {
        TrainConfig {
            optimizer: OptimizerKind::Adam,
            learning_rate,
            batch_size,
            epochs,
            seed,
        }
    }

    /// The standalone landscape-network recipe: SGD starting at 0.01 with
    /// the learning rate halved every [`SGD_DECAY_EVERY`] epochs.
    pub fn landscape_recipe(epochs: usize, seed: u64) -> Self {
        TrainConfig {
            optimizer: OptimizerKind::Sgd,
            learning_rate: 0.01,
            batch_size: 32,
            epochs,
            seed,
        }
    }

    fn validate(&self) -> Result<(), TrainError> {
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(TrainError::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("batch size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Aligned training inputs. `features` must be present exactly when the
/// model has a landscape branch, `pixels` exactly when it has a pixel
/// branch.
#[derive(Debug, Clone)]
pub struct TrainSet {
    pub features: Option<Vec<LandscapeFeature>>,
    pub pixels: Option<Vec<Vec<f64>>>,
    pub labels: Vec<usize>,
}

impl TrainSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn validate_for(&self, model: &ModelParams) -> Result<(), TrainError> {
        if self.is_empty() {
            return Err(TrainError::InvalidConfig("dataset is empty".into()));
        }
        match (&model.landscape, &self.features) {
            (Some(_), Some(f)) if f.len() == self.len() => {}
            (None, None) => {}
            _ => {
                return Err(TrainError::Model(NeuralNetError::Shape(
                    "features do not match the model's landscape branch".into(),
                )))
            }
        }
        match (&model.pixel, &self.pixels) {
            (Some(_), Some(p)) if p.len() == self.len() => {}
            (None, None) => {}
            _ => {
                return Err(TrainError::Model(NeuralNetError::Shape(
                    "pixels do not match the model's pixel branch".into(),
                )))
            }
        }
        if let Some(&bad) = self.labels.iter().find(|&&l| l >= model.class_count()) {
            return Err(TrainError::InvalidConfig(format!(
                "label {bad} out of range for {} classes",
                model.class_count()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochStats {
    pub loss: f64,
    pub accuracy: f64,
}

/// Gradients for every trainable tensor, in the same canonical order as
/// [`ModelParams::param_tensors_mut`].
#[derive(Debug, Clone)]
pub struct ModelGrads {
    pub landscape: Option<(LinearGrad, BnGrad, LinearGrad, BnGrad)>,
    pub pixel: Option<(LinearGrad, LinearGrad)>,
    pub head: LinearGrad,
}

impl ModelGrads {
    pub fn tensors(&self) -> Vec<&Vec<f64>> {
        let mut out: Vec<&Vec<f64>> = Vec::new();
        if let Some((l0, bn0, l1, bn1)) = &self.landscape {
            out.extend([&l0.weights, &l0.bias, &bn0.gamma, &bn0.beta]);
            out.extend([&l1.weights, &l1.bias, &bn1.gamma, &bn1.beta]);
        }
        if let Some((la, lb)) = &self.pixel {
            out.extend([&la.weights, &la.bias, &lb.weights, &lb.bias]);
        }
        out.extend([&self.head.weights, &self.head.bias]);
        out
    }
}

struct BatchData {
    v0: Vec<Vec<f64>>,
    v1: Vec<Vec<f64>>,
    px: Vec<Vec<f64>>,
    labels: Vec<usize>,
}

fn gather(data: &TrainSet, indices: &[usize]) -> BatchData {
    BatchData {
        v0: data
            .features
            .as_ref()
            .map(|fs| indices.iter().map(|&i| fs[i].v0.clone()).collect())
            .unwrap_or_default(),
        v1: data
            .features
            .as_ref()
            .map(|fs| indices.iter().map(|&i| fs[i].v1.clone()).collect())
            .unwrap_or_default(),
        px: data
            .pixels
            .as_ref()
            .map(|ps| indices.iter().map(|&i| ps[i].clone()).collect())
            .unwrap_or_default(),
        labels: indices.iter().map(|&i| data.labels[i]).collect(),
    }
}

struct LandscapeCache {
    bn0: BnCache,
    bn1: BnCache,
    pre_relu0: Vec<Vec<f64>>,
    pre_relu1: Vec<Vec<f64>>,
}

struct PixelCache {
    pre_relu_a: Vec<Vec<f64>>,
    post_relu_a: Vec<Vec<f64>>,
    pre_relu_b: Vec<Vec<f64>>,
}

struct ForwardCache {
    landscape: Option<LandscapeCache>,
    pixel: Option<PixelCache>,
    head_in: Vec<Vec<f64>>,
}

/// Train-mode batch forward. Pure: running statistics are not touched.
fn forward_train(model: &ModelParams, batch: &BatchData) -> (Vec<Vec<f64>>, ForwardCache) {
    let m = batch.labels.len();
    let mut head_in: Vec<Vec<f64>> = vec![Vec::with_capacity(model.head.in_dim); m];

    let landscape = model.landscape.as_ref().map(|ls| {
        let z0 = ls.linear0.forward_batch(&batch.v0);
        let (b0, bn0) = ls.bn0.forward_train(&z0);
        let z1 = ls.linear1.forward_batch(&batch.v1);
        let (b1, bn1) = ls.bn1.forward_train(&z1);
        for s in 0..m {
            head_in[s].extend(b0[s].iter().map(|&v| v.max(0.0)));
            head_in[s].extend(b1[s].iter().map(|&v| v.max(0.0)));
        }
        LandscapeCache {
            bn0,
            bn1,
            pre_relu0: b0,
            pre_relu1: b1,
        }
    });

    let pixel = model.pixel.as_ref().map(|px| {
        let za = px.linear_a.forward_batch(&batch.px);
        let ha = relu_batch(&za);
        let zb = px.linear_b.forward_batch(&ha);
        for s in 0..m {
            head_in[s].extend(zb[s].iter().map(|&v| v.max(0.0)));
        }
        PixelCache {
            pre_relu_a: za,
            post_relu_a: ha,
            pre_relu_b: zb,
        }
    });

    let logits = model.head.forward_batch(&head_in);
    (
        logits,
        ForwardCache {
            landscape,
            pixel,
            head_in,
        },
    )
}

fn relu_backward(pre: &[Vec<f64>], dpost: &[Vec<f64>]) -> Vec<Vec<f64>> {
    pre.iter()
        .zip(dpost)
        .map(|(z, d)| {
            z.iter()
                .zip(d)
                .map(|(&zv, &dv)| if zv > 0.0 { dv } else { 0.0 })
                .collect()
        })
        .collect()
}

fn backward(
    model: &ModelParams,
    batch: &BatchData,
    cache: &ForwardCache,
    dlogits: &[Vec<f64>],
) -> ModelGrads {
    let (head_grad, dhead_in) = model.head.backward_batch(&cache.head_in, dlogits);

    let mut offset = 0usize;
    let landscape = model.landscape.as_ref().map(|ls| {
        let c = cache.landscape.as_ref().unwrap();
        let h = ls.linear0.out_dim;
        let slice0: Vec<Vec<f64>> = dhead_in
            .iter()
            .map(|d| d[offset..offset + h].to_vec())
            .collect();
        let slice1: Vec<Vec<f64>> = dhead_in
            .iter()
            .map(|d| d[offset + h..offset + 2 * h].to_vec())
            .collect();
        offset += 2 * h;
        let db0 = relu_backward(&c.pre_relu0, &slice0);
        let (bn0_grad, dz0) = ls.bn0.backward(&c.bn0, &db0);
        let (l0_grad, _) = ls.linear0.backward_batch(&batch.v0, &dz0);
        let db1 = relu_backward(&c.pre_relu1, &slice1);
        let (bn1_grad, dz1) = ls.bn1.backward(&c.bn1, &db1);
        let (l1_grad, _) = ls.linear1.backward_batch(&batch.v1, &dz1);
        (l0_grad, bn0_grad, l1_grad, bn1_grad)
    });

    let pixel = model.pixel.as_ref().map(|px| {
        let c = cache.pixel.as_ref().unwrap();
        let h = px.linear_b.out_dim;
        let slice: Vec<Vec<f64>> = dhead_in
            .iter()
            .map(|d| d[offset..offset + h].to_vec())
            .collect();
        let dzb = relu_backward(&c.pre_relu_b, &slice);
        let (lb_grad, dha) = px.linear_b.backward_batch(&c.post_relu_a, &dzb);
        let dza = relu_backward(&c.pre_relu_a, &dha);
        let (la_grad, _) = px.linear_a.backward_batch(&batch.px, &dza);
        (la_grad, lb_grad)
    });

    ModelGrads {
        landscape,
        pixel,
        head: head_grad,
    }
}

/// Mean cross-entropy and the matching logit gradients.
fn loss_and_dlogits(logits: &[Vec<f64>], labels: &[usize]) -> (f64, Vec<Vec<f64>>, usize) {
    let m = labels.len();
    let mut loss = 0.0;
    let mut correct = 0;
    let mut dlogits = Vec::with_capacity(m);
    for (row, &label) in logits.iter().zip(labels) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_sum: f64 = row.iter().map(|&l| (l - max).exp()).sum::<f64>().ln() + max;
        loss += log_sum - row[label];
        if super::argmax(row) == label {
            correct += 1;
        }
        let mut d: Vec<f64> = softmax(row);
        d[label] -= 1.0;
        d.iter_mut().for_each(|v| *v /= m as f64);
        dlogits.push(d);
    }
    (loss / m as f64, dlogits, correct)
}

/// Mean train-mode cross-entropy over the given samples. Pure; used by
/// the finite-difference gradient checks.
pub fn batch_loss(
    model: &ModelParams,
    data: &TrainSet,
    indices: &[usize],
) -> Result<f64, TrainError> {
    data.validate_for(model)?;
    let batch = gather(data, indices);
    let (logits, _) = forward_train(model, &batch);
    Ok(loss_and_dlogits(&logits, &batch.labels).0)
}

/// Train-mode loss and parameter gradients for the given samples. Pure.
pub fn batch_gradients(
    model: &ModelParams,
    data: &TrainSet,
    indices: &[usize],
) -> Result<(f64, ModelGrads), TrainError> {
    data.validate_for(model)?;
    let batch = gather(data, indices);
    let (logits, cache) = forward_train(model, &batch);
    let (loss, dlogits, _) = loss_and_dlogits(&logits, &batch.labels);
    let grads = backward(model, &batch, &cache, &dlogits);
    Ok((loss, grads))
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl Adam {
    fn new(shapes: &[usize]) -> Self {
        Adam {
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [&mut Vec<f64>], grads: &[&Vec<f64>], lr: f64) {
        self.t += 1;
        let bias1 = 1.0 - ADAM_BETA1.powi(self.t);
        let bias2 = 1.0 - ADAM_BETA2.powi(self.t);
        for ((tensor, grad), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for i in 0..tensor.len() {
                let g = grad[i];
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                tensor[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
            }
        }
    }
}

/// Trains the model in place, returning per-epoch loss/accuracy measured
/// on the training batches. A non-finite loss aborts with the offending
/// epoch.
pub fn train(
    model: &mut ModelParams,
    data: &TrainSet,
    config: &TrainConfig,
) -> Result<Vec<EpochStats>, TrainError> {
    config.validate()?;
    data.validate_for(model)?;

    let n = data.len();
    let mut adam = match config.optimizer {
        OptimizerKind::Adam => {
            let shapes: Vec<usize> = model.param_tensors_mut().iter().map(|t| t.len()).collect();
            Some(Adam::new(&shapes))
        }
        OptimizerKind::Sgd => None,
    };

    let mut history = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..config.epochs {
        let mut rng = SplitMix64::new(mix(&[config.seed, epoch as u64]));
        shuffle(&mut order, &mut rng);
        let lr = match config.optimizer {
            OptimizerKind::Adam => config.learning_rate,
            OptimizerKind::Sgd => {
                config.learning_rate * SGD_DECAY_FACTOR.powi((epoch / SGD_DECAY_EVERY) as i32)
            }
        };

        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let batch = gather(data, chunk);
            let (logits, cache) = forward_train(model, &batch);
            let (loss, dlogits, batch_correct) = loss_and_dlogits(&logits, &batch.labels);
            if !loss.is_finite() {
                return Err(TrainError::Diverged { epoch });
            }
            let grads = backward(model, &batch, &cache, &dlogits);

            {
                let grad_tensors = grads.tensors();
                let mut params = model.param_tensors_mut();
                debug_assert_eq!(params.len(), grad_tensors.len());
                match &mut adam {
                    Some(state) => state.step(&mut params, &grad_tensors, lr),
                    None => {
                        for (tensor, grad) in params.iter_mut().zip(&grad_tensors) {
                            for (w, g) in tensor.iter_mut().zip(grad.iter()) {
                                *w -= lr * g;
                            }
                        }
                    }
                }
            }

            if let (Some(ls), Some(c)) = (&mut model.landscape, &cache.landscape) {
                ls.bn0.update_running(&c.bn0);
                ls.bn1.update_running(&c.bn1);
            }

            loss_sum += loss * batch.labels.len() as f64;
            correct += batch_correct;
        }
        history.push(EpochStats {
            loss: loss_sum / n as f64,
            accuracy: correct as f64 / n as f64,
        });
    }
    Ok(history)
}

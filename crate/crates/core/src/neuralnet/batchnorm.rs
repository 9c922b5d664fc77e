//! Batch normalization with explicit train/eval paths.
//!
//! Train mode normalizes by the batch mean and population variance
//! (division by `m`, also used for the running-variance update so
//! single-sample batches stay finite); eval mode uses the running
//! statistics and is a pure per-sample function. The forward pass never
//! mutates state: the running update is a separate step applied by the
//! training loop.

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone)]
pub struct BnGrad {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

/// Forward-pass byproducts needed for the backward pass and the running
/// statistics update.
#[derive(Debug, Clone)]
pub struct BnCache {
    pub xhat: Vec<Vec<f64>>,
    pub inv_std: Vec<f64>,
    pub batch_mean: Vec<f64>,
    pub batch_var: Vec<f64>,
}

impl BatchNorm {
    pub fn new(features: usize, momentum: f64, epsilon: f64) -> Self {
        BatchNorm {
            gamma: vec![1.0; features],
            beta: vec![0.0; features],
            running_mean: vec![0.0; features],
            running_var: vec![1.0; features],
            momentum,
            epsilon,
        }
    }

    pub fn features(&self) -> usize {
        self.gamma.len()
    }

    pub fn forward_train(&self, xs: &[Vec<f64>]) -> (Vec<Vec<f64>>, BnCache) {
        let m = xs.len();
        let f = self.features();
        debug_assert!(m > 0);
        let mut mean = vec![0.0; f];
        for x in xs {
            for (acc, v) in mean.iter_mut().zip(x) {
                *acc += v;
            }
        }
        for acc in &mut mean {
            *acc /= m as f64;
        }
        let mut var = vec![0.0; f];
        for x in xs {
            for ((acc, v), mu) in var.iter_mut().zip(x).zip(&mean) {
                let d = v - mu;
                *acc += d * d;
            }
        }
        for acc in &mut var {
            *acc /= m as f64;
        }
        let inv_std: Vec<f64> = var
            .iter()
            .map(|&v| 1.0 / (v + self.epsilon).sqrt())
            .collect();

        let mut xhat = vec![vec![0.0; f]; m];
        let mut ys = vec![vec![0.0; f]; m];
        for (s, x) in xs.iter().enumerate() {
            for i in 0..f {
                let xh = (x[i] - mean[i]) * inv_std[i];
                xhat[s][i] = xh;
                ys[s][i] = self.gamma[i] * xh + self.beta[i];
            }
        }
        (
            ys,
            BnCache {
                xhat,
                inv_std,
                batch_mean: mean,
                batch_var: var,
            },
        )
    }

    pub fn forward_eval_one(&self, x: &[f64]) -> Vec<f64> {
        (0..self.features())
            .map(|i| {
                let xh =
                    (x[i] - self.running_mean[i]) / (self.running_var[i] + self.epsilon).sqrt();
                self.gamma[i] * xh + self.beta[i]
            })
            .collect()
    }

    /// Folds the batch statistics of a training forward pass into the
    /// running statistics.
    pub fn update_running(&mut self, cache: &BnCache) {
        for i in 0..self.features() {
            self.running_mean[i] =
                (1.0 - self.momentum) * self.running_mean[i] + self.momentum * cache.batch_mean[i];
            self.running_var[i] =
                (1.0 - self.momentum) * self.running_var[i] + self.momentum * cache.batch_var[i];
        }
    }

    pub fn backward(&self, cache: &BnCache, dys: &[Vec<f64>]) -> (BnGrad, Vec<Vec<f64>>) {
        let m = dys.len();
        let f = self.features();
        let mut dgamma = vec![0.0; f];
        let mut dbeta = vec![0.0; f];
        for (s, dy) in dys.iter().enumerate() {
            for i in 0..f {
                dgamma[i] += dy[i] * cache.xhat[s][i];
                dbeta[i] += dy[i];
            }
        }
        let mut dxs = vec![vec![0.0; f]; m];
        for (s, dy) in dys.iter().enumerate() {
            for i in 0..f {
                dxs[s][i] = self.gamma[i]
                    * cache.inv_std[i]
                    * (dy[i] - dbeta[i] / m as f64 - cache.xhat[s][i] * dgamma[i] / m as f64);
            }
        }
        (
            BnGrad {
                gamma: dgamma,
                beta: dbeta,
            },
            dxs,
        )
    }
}

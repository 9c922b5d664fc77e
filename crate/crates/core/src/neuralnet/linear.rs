//! Fully connected layer with hand-written forward/backward passes.

use crate::rng::SplitMix64;

/// Weights are row-major `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LinearGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Linear {
    /// Glorot-uniform initialization: weights in
    /// `+/- sqrt(6 / (fan_in + fan_out))`, bias zero.
    pub fn glorot(in_dim: usize, out_dim: usize, rng: &mut SplitMix64) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weights = (0..in_dim * out_dim)
            .map(|_| (rng.next_f64() * 2.0 - 1.0) * limit)
            .collect();
        Linear {
            in_dim,
            out_dim,
            weights,
            bias: vec![0.0; out_dim],
        }
    }

    pub fn forward_one(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.in_dim);
        let mut y = self.bias.clone();
        for (o, out) in y.iter_mut().enumerate() {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            *out += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
        y
    }

    pub fn forward_batch(&self, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        xs.iter().map(|x| self.forward_one(x)).collect()
    }

    /// Returns the parameter gradients and the gradient with respect to
    /// the inputs, given the inputs of the forward pass and the gradient
    /// with respect to the outputs.
    pub fn backward_batch(&self, xs: &[Vec<f64>], dys: &[Vec<f64>]) -> (LinearGrad, Vec<Vec<f64>>) {
        debug_assert_eq!(xs.len(), dys.len());
        let mut dw = vec![0.0; self.weights.len()];
        let mut db = vec![0.0; self.out_dim];
        let mut dxs = vec![vec![0.0; self.in_dim]; xs.len()];
        for (s, (x, dy)) in xs.iter().zip(dys).enumerate() {
            for o in 0..self.out_dim {
                let g = dy[o];
                db[o] += g;
                let row = o * self.in_dim;
                for i in 0..self.in_dim {
                    dw[row + i] += g * x[i];
                    dxs[s][i] += g * self.weights[row + i];
                }
            }
        }
        (
            LinearGrad {
                weights: dw,
                bias: db,
            },
            dxs,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_is_affine() {
        let layer = Linear {
            in_dim: 2,
            out_dim: 2,
            weights: vec![1.0, 2.0, 3.0, 4.0],
            bias: vec![0.5, -0.5],
        };
        assert_eq!(layer.forward_one(&[1.0, 1.0]), vec![3.5, 6.5]);
    }

    #[test]
    fn glorot_respects_fan_limit_and_seed() {
        let mut rng = SplitMix64::new(1);
        let a = Linear::glorot(10, 20, &mut rng);
        let limit = (6.0 / 30.0_f64).sqrt();
        assert!(a.weights.iter().all(|w| w.abs() <= limit));
        assert!(a.bias.iter().all(|&b| b == 0.0));
        let mut rng = SplitMix64::new(1);
        let b = Linear::glorot(10, 20, &mut rng);
        assert_eq!(a, b);
    }
}

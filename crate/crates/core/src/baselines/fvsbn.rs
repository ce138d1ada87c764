use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{ensure_len, Result};
use crate::math::{log_bernoulli, sigmoid};
use crate::nade::check_binary;
use crate::ordering::Ordering;
use crate::params::{BlockRole, BlockSpec, ParamBlocks};
use crate::training::{mean_over, Trainable};

/// Fully visible sigmoid belief network: one logistic regression per position,
/// seeing only the dimensions earlier in the ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct FvsbnParams {
    pub ordering: Ordering,
    /// Packed lower triangle: position `d` owns `w[d(d-1)/2 .. d(d-1)/2 + d]`,
    /// one weight per predecessor `o_0..o_{d-1}`.
    pub w: Vec<f64>,
    /// Bias per position.
    pub bias: Vec<f64>,
}

fn offset(d: usize) -> usize {
    d * d.saturating_sub(1) / 2
}

impl FvsbnParams {
    pub fn zeros(ordering: Ordering) -> Self {
        let d = ordering.len();
        FvsbnParams {
            w: vec![0.0; offset(d)],
            bias: vec![0.0; d],
            ordering,
        }
    }

    pub fn dim(&self) -> usize {
        self.bias.len()
    }

    pub fn weights(&self, pos: usize) -> &[f64] {
        &self.w[offset(pos)..offset(pos) + pos]
    }

    pub fn check_shapes(&self) -> Result<()> {
        let d = self.ordering.len();
        ensure_len("FVSBN biases", d, self.bias.len())?;
        ensure_len("FVSBN weights", offset(d), self.w.len())
    }

    /// `p(x_{o_d} = 1 | x_{o_<d})` for every position `d`.
    pub fn conditionals(&self, x: &[f64]) -> Vec<f64> {
        let o = self.ordering.as_slice();
        (0..self.dim())
            .map(|d| {
                let a = self.bias[d]
                    + self
                        .weights(d)
                        .iter()
                        .zip(&o[..d])
                        .map(|(w, &j)| w * x[j])
                        .sum::<f64>();
                sigmoid(a)
            })
            .collect()
    }

    pub fn log_prob(&self, x: &[f64]) -> Result<f64> {
        ensure_len("input", self.dim(), x.len())?;
        check_binary(x)?;
        let p = self.conditionals(x);
        Ok(self
            .ordering
            .iter()
            .zip(&p)
            .map(|(i, &pd)| log_bernoulli(x[i], pd))
            .sum())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let o = self.ordering.as_slice();
        let mut x = vec![0.0; self.dim()];
        for d in 0..self.dim() {
            let a = self.bias[d] + self.weights(d).iter().zip(&o[..d]).map(|(w, &j)| w * x[j]).sum::<f64>();
            x[o[d]] = if rng.random::<f64>() < sigmoid(a) { 1.0 } else { 0.0 };
        }
        x
    }
}

impl ParamBlocks for FvsbnParams {
    fn block_specs(&self) -> Vec<BlockSpec> {
        vec![
            BlockSpec::new("w", self.w.len(), BlockRole::Other),
            BlockSpec::new("bias", self.bias.len(), BlockRole::Other),
        ]
    }
    fn blocks(&self) -> Vec<&[f64]> {
        vec![&self.w, &self.bias]
    }
    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.w, &mut self.bias]
    }
}

impl Trainable for FvsbnParams {
    type Grad = FvsbnParams;

    fn zero_grad(&self) -> FvsbnParams {
        FvsbnParams::zeros(self.ordering.clone())
    }

    fn accumulate_grad(&self, x: &[f64], weight: f64, _rng: &mut ChaCha8Rng, grad: &mut FvsbnParams) -> Result<f64> {
        ensure_len("input", self.dim(), x.len())?;
        check_binary(x)?;
        let o = self.ordering.as_slice();
        let p = self.conditionals(x);
        let mut nll = 0.0;
        for d in 0..self.dim() {
            let xd = x[o[d]];
            nll -= log_bernoulli(xd, p[d]);
            let g = weight * (p[d] - xd);
            grad.bias[d] += g;
            let off = offset(d);
            for (k, &j) in o[..d].iter().enumerate() {
                grad.w[off + k] += g * x[j];
            }
        }
        Ok(nll)
    }

    fn validation_score(&self, rows: &[Vec<f64>], _eval_seed: u64) -> Result<f64> {
        mean_over(rows, |_, x| self.log_prob(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ordering::all_binary_vectors;
    use crate::training::{train_sgd, TrainConfig};
    use rand::SeedableRng;

    #[test]
    fn zero_weights_give_uniform() {
        let f = FvsbnParams::zeros(Ordering::from_seed(6, 1));
        let lp = f.log_prob(&[1.0, 0.0, 1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((lp + 6.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn normalized_with_random_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut f = FvsbnParams::zeros(Ordering::from_seed(8, 3));
        for v in f.w.iter_mut().chain(f.bias.iter_mut()) {
            *v = rng.random_range(-2.0..2.0);
        }
        let total: f64 = all_binary_vectors(8).unwrap().iter().map(|x| f.log_prob(x).unwrap().exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn learns_a_copy() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data: Vec<Vec<f64>> = (0..1000)
            .map(|_| {
                let a = rng.random_range(0..2) as f64;
                vec![a, a]
            })
            .collect();
        let cfg = TrainConfig {
            batch_size: 10,
            epochs: 30,
            lr: 0.5,
            patience: None,
            ..TrainConfig::default()
        };
        let f = train_sgd(FvsbnParams::zeros(Ordering::identity(2)), &data, None, &cfg).unwrap().model;
        assert!(f.conditionals(&[1.0, 0.0])[1] >= 0.99);
    }
}

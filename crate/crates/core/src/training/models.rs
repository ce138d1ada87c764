//! Training adapters binding each neural estimator to [`Trainable`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::trainer::Trainable;
use crate::deepnade::{accumulate_example_grad, example_loss, sample_prefix, LayerStack, Mask};
use crate::error::Result;
use crate::nade::{NadeGrad, NadeParams};
use crate::ordering::Ordering;
use crate::params::{BlockSpec, ParamBlocks};
use crate::rnade::RnadeParams;

/// Mean of `f` over rows, evaluated in parallel and summed in row order.
pub(crate) fn mean_over<F>(rows: &[Vec<f64>], f: F) -> Result<f64>
where
    F: Fn(usize, &[f64]) -> Result<f64> + Sync,
{
    let vals = rows
        .par_iter()
        .enumerate()
        .map(|(i, x)| f(i, x))
        .collect::<Result<Vec<f64>>>()?;
    Ok(vals.iter().sum::<f64>() / vals.len().max(1) as f64)
}

/// Fixed-order NADE together with its ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct NadeModel {
    pub params: NadeParams,
    pub ordering: Ordering,
}

impl ParamBlocks for NadeModel {
    fn block_specs(&self) -> Vec<BlockSpec> {
        self.params.block_specs()
    }
    fn blocks(&self) -> Vec<&[f64]> {
        self.params.blocks()
    }
    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        self.params.blocks_mut()
    }
}

impl Trainable for NadeModel {
    type Grad = NadeGrad;

    fn zero_grad(&self) -> NadeGrad {
        NadeGrad::zeros_like(&self.params)
    }

    fn accumulate_grad(
        &self,
        x: &[f64],
        weight: f64,
        _rng: &mut ChaCha8Rng,
        grad: &mut NadeGrad,
    ) -> Result<f64> {
        let trace = self
            .params
            .accumulate_grad_nll(&self.ordering, x, weight, grad)?;
        Ok(-trace.logp)
    }

    fn validation_score(&self, rows: &[Vec<f64>], _eval_seed: u64) -> Result<f64> {
        mean_over(rows, |_, x| self.params.log_density(&self.ordering, x))
    }
}

/// RNADE with its ordering and the location-gradient scaling flag.
#[derive(Debug, Clone, PartialEq)]
pub struct RnadeModel {
    pub params: RnadeParams,
    pub ordering: Ordering,
    pub scale_mean_grad: bool,
}

impl ParamBlocks for RnadeModel {
    fn block_specs(&self) -> Vec<BlockSpec> {
        self.params.block_specs()
    }
    fn blocks(&self) -> Vec<&[f64]> {
        self.params.blocks()
    }
    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        self.params.blocks_mut()
    }
}

impl Trainable for RnadeModel {
    type Grad = RnadeParams;

    fn zero_grad(&self) -> RnadeParams {
        self.params.zeros_like()
    }

    fn accumulate_grad(
        &self,
        x: &[f64],
        weight: f64,
        _rng: &mut ChaCha8Rng,
        grad: &mut RnadeParams,
    ) -> Result<f64> {
        let trace = self.params.accumulate_grad_nll(
            &self.ordering,
            x,
            self.scale_mean_grad,
            weight,
            grad,
        )?;
        Ok(-trace.logp)
    }

    fn validation_score(&self, rows: &[Vec<f64>], _eval_seed: u64) -> Result<f64> {
        mean_over(rows, |_, x| self.params.log_density(&self.ordering, x))
    }
}

impl Trainable for LayerStack {
    type Grad = LayerStack;

    fn zero_grad(&self) -> LayerStack {
        self.zeros_like()
    }

    fn accumulate_grad(
        &self,
        x: &[f64],
        weight: f64,
        rng: &mut ChaCha8Rng,
        grad: &mut LayerStack,
    ) -> Result<f64> {
        let (_, prefix) = sample_prefix(self.dim, rng);
        accumulate_example_grad(self, x, &Mask::from_prefix(self.dim, &prefix), weight, grad)
    }

    /// Negated stochastic estimator loss, one fixed-seed prefix per row.
    fn validation_score(&self, rows: &[Vec<f64>], eval_seed: u64) -> Result<f64> {
        mean_over(rows, |i, x| {
            let mut rng = ChaCha8Rng::seed_from_u64(eval_seed.wrapping_add(i as u64));
            let (_, prefix) = sample_prefix(self.dim, &mut rng);
            Ok(-example_loss(self, x, &Mask::from_prefix(self.dim, &prefix))?)
        })
    }
}

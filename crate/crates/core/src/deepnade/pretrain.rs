use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::stack::{Layer, LayerStack};
use crate::error::{Error, Result};
use crate::math::Activation;
use crate::training::{train_sgd, TrainConfig};

/// Training epochs run after each new hidden layer is added.
pub const PRETRAIN_ITERATIONS: usize = 20;

/// Greedy layer-wise pretraining of an `n`-hidden-layer stack.
///
/// `hidden` gives the width of each layer and must have at least `n` entries.
/// Depth 1 is a random one-hidden-layer stack. Each deeper stage drops the
/// output layer of the previous stage, appends a fresh hidden layer and a fresh
/// output layer, and trains all parameters for [`PRETRAIN_ITERATIONS`] epochs
/// without early stopping. `cfg.seed` drives initialization and minibatches.
pub fn pretrain(
    n: usize,
    hidden: &[usize],
    activation: Activation,
    mask_concat: bool,
    train: &[Vec<f64>],
    cfg: &TrainConfig,
) -> Result<LayerStack> {
    if n == 0 {
        return Err(Error::Contract("pretraining depth must be at least 1".into()));
    }
    if hidden.len() < n {
        return Err(Error::dim("pretraining hidden widths", n, hidden.len()));
    }
    let dim = train
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::Dataset("empty training set".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut stack = LayerStack::init(dim, &hidden[..1], activation, mask_concat, &mut rng);
    let mut stage_cfg = cfg.clone();
    stage_cfg.epochs = PRETRAIN_ITERATIONS;
    stage_cfg.patience = None;
    for (depth, &width) in hidden.iter().enumerate().take(n).skip(1) {
        stack.layers.pop();
        let prev = stack.layers.last().map(Layer::outputs).unwrap_or(stack.input_width());
        stack.layers.push(Layer::init(prev, width, activation, &mut rng));
        stack.layers.push(Layer::init(width, dim, Activation::Sigmoid, &mut rng));
        stage_cfg.seed = cfg.seed.wrapping_add(depth as u64);
        stack = train_sgd(stack, train, None, &stage_cfg)?.model;
    }
    Ok(stack)
}

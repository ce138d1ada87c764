//! Order-agnostic deep NADE: one masked feed-forward network that provides
//! every conditional `p(x_i | x_S)`, trained on the ordering-sampled loss.

mod ops;
mod pretrain;
mod stack;

pub use ops::{
    accumulate_example_grad, ensemble_logprob, example_loss, impute, logprob_ordering, loss_minibatch,
    loss_scale, marginal_logprob, sample, sample_prefix, OrderingPrefixSampler,
};
pub use pretrain::{pretrain, PRETRAIN_ITERATIONS};
pub use stack::{Layer, LayerStack, Mask, StackTrace};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::stack::{Autoregressor, LayerStack, Mask};
use crate::error::{ensure_len, Error, Result};
use crate::math::{clamp_prob, log_bernoulli, logsumexp};
use crate::nade::check_binary;
use crate::ordering::Ordering;

/// Draws `(d, o_<d)`: `d` uniform on `1..=D`, then a uniformly random ordered
/// subset of `d - 1` dimensions.
#[derive(Debug, Clone)]
pub struct OrderingPrefixSampler {
    dim: usize,
    rng: ChaCha8Rng,
}

impl OrderingPrefixSampler {
    pub fn new(dim: usize, seed: u64) -> Self {
        OrderingPrefixSampler {
            dim,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Returns the 1-based position `d` and the prefix `o_<d`.
    pub fn sample_prefix(&mut self) -> (usize, Vec<usize>) {
        sample_prefix(self.dim, &mut self.rng)
    }

    pub fn sample_mask(&mut self) -> Mask {
        let (_, prefix) = self.sample_prefix();
        Mask::from_prefix(self.dim, &prefix)
    }
}

/// `d` uniform on `1..=dim` and a uniformly random ordered `(d - 1)`-subset.
pub fn sample_prefix<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> (usize, Vec<usize>) {
    let d = rng.random_range(1..=dim);
    let mut perm: Vec<usize> = (0..dim).collect();
    let (prefix, _) = perm.partial_shuffle(rng, d - 1);
    (d, prefix.to_vec())
}

/// Scale `D / (D - d + 1)` applied to the masked cross-entropy.
pub fn loss_scale(dim: usize, d: usize) -> f64 {
    dim as f64 / (dim - d + 1) as f64
}

/// Scaled cross-entropy over unobserved dimensions for one example and mask.
pub fn example_loss(stack: &LayerStack, x: &[f64], mask: &Mask) -> Result<f64> {
    check_binary(x)?;
    let out = stack.forward(x, mask)?;
    Ok(masked_loss(&out, x, mask))
}

fn masked_loss(out: &[f64], x: &[f64], mask: &Mask) -> f64 {
    let scale = loss_scale(mask.len(), mask.next_position());
    let ce: f64 = (0..mask.len())
        .filter(|&i| !mask.is_observed(i))
        .map(|i| -log_bernoulli(x[i], out[i]))
        .sum();
    scale * ce
}

/// Adds `weight * ∇ loss` into `grad`; returns the loss.
pub fn accumulate_example_grad(
    stack: &LayerStack,
    x: &[f64],
    mask: &Mask,
    weight: f64,
    grad: &mut LayerStack,
) -> Result<f64> {
    check_binary(x)?;
    let trace = stack.forward_trace(x, mask)?;
    let out = trace.output();
    let loss = masked_loss(out, x, mask);
    let scale = weight * loss_scale(mask.len(), mask.next_position());
    let d_out = (0..stack.dim)
        .map(|i| {
            if mask.is_observed(i) {
                0.0
            } else {
                scale * (out[i] - x[i])
            }
        })
        .collect();
    stack.backward(&trace, d_out, grad);
    Ok(loss)
}

/// Mean estimator loss over a batch with freshly sampled prefixes, and its gradient.
pub fn loss_minibatch(
    stack: &LayerStack,
    batch: &[Vec<f64>],
    sampler: &mut OrderingPrefixSampler,
) -> Result<(f64, LayerStack)> {
    if batch.is_empty() {
        return Err(Error::Contract("empty minibatch".into()));
    }
    let mut grad = stack.zeros_like();
    let w = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for x in batch {
        let mask = sampler.sample_mask();
        total += accumulate_example_grad(stack, x, &mask, w, &mut grad)?;
    }
    Ok((total * w, grad))
}

/// `log p(x | o)` with the stack providing every conditional; D incremental steps.
pub fn logprob_ordering(stack: &LayerStack, x: &[f64], o: &Ordering) -> Result<f64> {
    ensure_len("ordering", stack.dim, o.len())?;
    check_binary(x)?;
    stack.check_io(x, &Mask::empty(stack.dim))?;
    let mut ar = Autoregressor::new(stack, x, &Mask::empty(stack.dim));
    let mut lp = 0.0;
    for i in o.iter() {
        lp += log_bernoulli(x[i], ar.predict(i));
        ar.reveal(i, x[i]);
    }
    Ok(lp)
}

/// Log of the average probability over the given orderings.
pub fn ensemble_logprob(stack: &LayerStack, x: &[f64], orderings: &[Ordering]) -> Result<f64> {
    if orderings.is_empty() {
        return Err(Error::Contract("ensemble needs at least one ordering".into()));
    }
    let lps = orderings
        .iter()
        .map(|o| logprob_ordering(stack, x, o))
        .collect::<Result<Vec<_>>>()?;
    if lps.len() == 1 {
        return Ok(lps[0]);
    }
    Ok(logsumexp(&lps) - (lps.len() as f64).ln())
}

/// Log-probability of the observed block, summing conditionals of observed
/// dimensions placed first in a random order.
pub fn marginal_logprob<R: Rng + ?Sized>(
    stack: &LayerStack,
    x: &[f64],
    observed: &Mask,
    rng: &mut R,
) -> Result<f64> {
    stack.check_io(x, observed)?;
    let mut obs = observed.observed();
    for &i in &obs {
        if x[i] != 0.0 && x[i] != 1.0 {
            return Err(Error::Domain(format!("observed entry {i} = {} is not binary", x[i])));
        }
    }
    obs.shuffle(rng);
    let mut ar = Autoregressor::new(stack, x, &Mask::empty(stack.dim));
    let mut lp = 0.0;
    for i in obs {
        lp += log_bernoulli(x[i], ar.predict(i));
        ar.reveal(i, x[i]);
    }
    Ok(lp)
}

/// Completes missing entries by ancestral sampling in a fresh random order per sample.
pub fn impute<R: Rng + ?Sized>(
    stack: &LayerStack,
    x_obs: &[f64],
    observed: &Mask,
    rng: &mut R,
    n_samples: usize,
) -> Result<Vec<Vec<f64>>> {
    stack.check_io(x_obs, observed)?;
    let missing = observed.missing();
    if missing.is_empty() {
        return Ok(vec![x_obs.to_vec(); n_samples]);
    }
    let mut out = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let mut x = x_obs.to_vec();
        for &i in &missing {
            x[i] = 0.0;
        }
        let mut order = missing.clone();
        order.shuffle(rng);
        let mut ar = Autoregressor::new(stack, &x, observed);
        for i in order {
            let p = clamp_prob(ar.predict(i));
            x[i] = if rng.random::<f64>() < p { 1.0 } else { 0.0 };
            ar.reveal(i, x[i]);
        }
        out.push(x);
    }
    Ok(out)
}

/// Ancestral sample under ordering `o`.
pub fn sample<R: Rng + ?Sized>(stack: &LayerStack, o: &Ordering, rng: &mut R) -> Result<Vec<f64>> {
    ensure_len("ordering", stack.dim, o.len())?;
    let mut x = vec![0.0; stack.dim];
    let mut ar = Autoregressor::new(stack, &x, &Mask::empty(stack.dim));
    for i in o.iter() {
        let p = clamp_prob(ar.predict(i));
        x[i] = if rng.random::<f64>() < p { 1.0 } else { 0.0 };
        ar.reveal(i, x[i]);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Activation;
    use crate::ordering::all_binary_vectors;

    fn random_stack(d: usize, hidden: &[usize], concat: bool, seed: u64) -> LayerStack {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = LayerStack::init(d, hidden, Activation::Relu, concat, &mut rng);
        for l in &mut s.layers {
            for b in &mut l.b {
                *b = rng.random_range(-0.5..0.5);
            }
        }
        s
    }

    #[test]
    fn scale_factor_arithmetic() {
        assert_eq!(loss_scale(784, 1), 1.0);
        assert!((loss_scale(784, 392) - 784.0 / 393.0).abs() < 1e-15);
        assert!((loss_scale(784, 392) - 1.99491).abs() < 1e-5);
    }

    #[test]
    fn zero_stack_outputs_half() {
        let s = LayerStack::zeros(5, &[4], Activation::Relu, true);
        let out = s.forward(&[1.0, 0.0, 1.0, 1.0, 0.0], &Mask::from_prefix(5, &[0, 2])).unwrap();
        assert!(out.iter().all(|&p| p == 0.5));
        let lp = logprob_ordering(&s, &[1.0, 0.0, 1.0, 1.0, 0.0], &Ordering::identity(5)).unwrap();
        assert!((lp + 5.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn fully_masked_output_is_constant_in_x() {
        let s = random_stack(6, &[5, 4], true, 1);
        let m = Mask::empty(6);
        let a = s.forward(&[1.0; 6], &m).unwrap();
        let b = s.forward(&[0.0; 6], &m).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn incremental_logprob_matches_full_forward_passes() {
        for (hidden, concat) in [(vec![7], true), (vec![6, 5], false), (vec![], true)] {
            let s = random_stack(6, &hidden, concat, 4);
            let o = Ordering::from_seed(6, 9);
            let x = [1.0, 0.0, 0.0, 1.0, 1.0, 0.0];
            let mut direct = 0.0;
            for d in 0..6 {
                let mask = Mask::from_prefix(6, &o.as_slice()[..d]);
                let out = s.forward(&x, &mask).unwrap();
                direct += log_bernoulli(x[o.at(d)], out[o.at(d)]);
            }
            let inc = logprob_ordering(&s, &x, &o).unwrap();
            assert!((direct - inc).abs() < 1e-12, "{hidden:?}: {direct} vs {inc}");
        }
    }

    #[test]
    fn sampler_prefix_distribution() {
        let mut s = OrderingPrefixSampler::new(4, 3);
        let mut counts = [0usize; 5];
        for _ in 0..40_000 {
            let (d, prefix) = s.sample_prefix();
            assert_eq!(prefix.len(), d - 1);
            counts[d] += 1;
        }
        for &c in &counts[1..] {
            assert!((c as f64 / 40_000.0 - 0.25).abs() < 0.01);
        }
    }

    #[test]
    fn ensemble_of_one_is_single_ordering() {
        let s = random_stack(5, &[6], true, 2);
        let o = Ordering::from_seed(5, 1);
        let x = [0.0, 1.0, 1.0, 0.0, 1.0];
        assert_eq!(
            ensemble_logprob(&s, &x, std::slice::from_ref(&o)).unwrap(),
            logprob_ordering(&s, &x, &o).unwrap()
        );
        assert!(ensemble_logprob(&s, &x, &[]).is_err());
    }

    #[test]
    fn impute_all_observed_is_identity() {
        let s = random_stack(4, &[3], true, 2);
        let x = vec![1.0, 0.0, 1.0, 1.0];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = impute(&s, &x, &Mask::new(vec![true; 4]), &mut rng, 3).unwrap();
        assert_eq!(out, vec![x; 3]);
    }

    #[test]
    fn per_ordering_normalization() {
        let s = random_stack(5, &[6, 4], true, 8);
        let o = Ordering::from_seed(5, 2);
        let total: f64 = all_binary_vectors(5)
            .unwrap()
            .iter()
            .map(|x| logprob_ordering(&s, x, &o).unwrap().exp())
            .sum();
        assert!((total - 1.0).abs() < 1e-9);
    }
}

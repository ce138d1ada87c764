mod common;

use common::*;
use nadekit::deepnade::{
    accumulate_example_grad, ensemble_logprob, example_loss, impute, logprob_ordering, marginal_logprob,
    sample, sample_prefix, LayerStack, Mask,
};
use nadekit::math::{clamp_prob, log_bernoulli, Activation};
use nadekit::ordering::{all_binary_vectors, all_orderings, Ordering};
use nadekit::params::ParamBlocks;
use nadekit::training::{train_sgd, TrainConfig};
use proptest::prelude::*;
use rand::Rng;

/// Every `(d, ordered prefix)` the sampler can produce, with its probability.
fn prefix_distribution(dim: usize) -> Vec<(f64, Vec<usize>)> {
    let mut out = Vec::new();
    for d in 1..=dim {
        let k = d - 1;
        let mut prefixes: Vec<Vec<usize>> = vec![Vec::new()];
        for _ in 0..k {
            let mut next = Vec::new();
            for p in &prefixes {
                for i in (0..dim).filter(|i| !p.contains(i)) {
                    let mut q = p.clone();
                    q.push(i);
                    next.push(q);
                }
            }
            prefixes = next;
        }
        let prob = 1.0 / (dim as f64 * prefixes.len() as f64);
        out.extend(prefixes.into_iter().map(|p| (prob, p)));
    }
    out
}

#[test]
fn stochastic_loss_is_unbiased_for_the_ordering_average() {
    let dist = prefix_distribution(3);
    assert_eq!(dist.len(), 1 + 3 + 6);
    assert!((dist.iter().map(|(p, _)| p).sum::<f64>() - 1.0).abs() < 1e-15);
    for seed in 0..5u64 {
        let stack = random_stack(3, &[4, 3], Activation::Relu, true, seed);
        for x in all_binary_vectors(3).unwrap() {
            let expected: f64 = dist
                .iter()
                .map(|(p, prefix)| p * example_loss(&stack, &x, &Mask::from_prefix(3, prefix)).unwrap())
                .sum();
            let orders = all_orderings(3);
            let exact = -orders.iter().map(|o| logprob_ordering(&stack, &x, o).unwrap()).sum::<f64>()
                / orders.len() as f64;
            assert!((expected - exact).abs() <= 1e-12, "{expected} vs {exact}");
        }
    }
}

#[test]
fn sampler_visits_prefixes_with_the_enumerated_frequencies() {
    let dist = prefix_distribution(3);
    let mut r = rng(3);
    let n = 120_000;
    let mut counts = vec![0usize; dist.len()];
    for _ in 0..n {
        let (d, prefix) = sample_prefix(3, &mut r);
        assert_eq!(prefix.len(), d - 1);
        counts[dist.iter().position(|(_, p)| *p == prefix).unwrap()] += 1;
    }
    let probs: Vec<f64> = dist.iter().map(|(p, _)| *p).collect();
    assert!(total_variation(&counts, &probs) < 0.01);
}

#[test]
fn gradients_match_finite_differences_for_a_fixed_mask() {
    let mut worst: f64 = 0.0;
    for inst in 0..20u64 {
        let hidden: &[usize] = [&[4][..], &[3, 4][..], &[5, 3, 2][..]][inst as usize % 3];
        let act = if inst % 2 == 0 { Activation::Sigmoid } else { Activation::Relu };
        let stack = random_stack(5, hidden, act, inst % 4 != 3, 60 + inst);
        let mut r = rng(inst);
        let x = random_binary(5, &mut r);
        let (_, prefix) = sample_prefix(5, &mut r);
        let mask = Mask::from_prefix(5, &prefix);
        let mut g = stack.zeros_like();
        accumulate_example_grad(&stack, &x, &mask, 1.0, &mut g).unwrap();
        let fd = finite_differences(&stack, 1e-5, |s| example_loss(s, &x, &mask).unwrap());
        worst = worst.max(max_rel_err(&g.to_flat(), &fd, 1e-6));
    }
    assert!(worst < 1e-4, "worst relative error {worst:e}");
}

#[test]
fn without_the_mask_channel_an_observed_zero_looks_missing() {
    let x = vec![0.0, 1.0, 0.0, 1.0];
    let observed = Mask::from_prefix(4, &[0, 1]);
    let fewer = Mask::from_prefix(4, &[1]);
    let plain = random_stack(4, &[6], Activation::Sigmoid, false, 1);
    assert_eq!(plain.forward(&x, &observed).unwrap(), plain.forward(&x, &fewer).unwrap());
    let concat = random_stack(4, &[6], Activation::Sigmoid, true, 1);
    assert_ne!(concat.forward(&x, &observed).unwrap(), concat.forward(&x, &fewer).unwrap());
}

/// One-hidden-layer stack reproducing a fixed-order NADE.
fn embed_nade(p: &nadekit::nade::NadeParams) -> LayerStack {
    let (d, h) = (p.dim(), p.hidden());
    let mut s = LayerStack::zeros(d, &[h], p.activation, true);
    let w = p.w();
    for k in 0..h {
        for i in 0..d {
            s.layers[0].w.set(k, i, w.get(k, i));
        }
    }
    s.layers[0].b = p.c.clone();
    s.layers[1].w = p.v.clone();
    s.layers[1].b = p.b.clone();
    s
}

#[test]
fn embedded_nade_weights_reproduce_the_fixed_order_model() {
    for seed in 0..5u64 {
        let p = random_nade(7, 5, Activation::Sigmoid, seed);
        let s = embed_nade(&p);
        let o = Ordering::from_seed(7, seed + 10);
        for x in all_binary_vectors(7).unwrap() {
            let a = p.log_density(&o, &x).unwrap();
            let b = logprob_ordering(&s, &x, &o).unwrap();
            assert!((a - b).abs() <= 1e-9);
        }
    }
}

fn toy_data(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let a = r.random_bool(0.5);
            (0..6)
                .map(|i| {
                    let flip = r.random_bool(if i % 2 == 0 { 0.1 } else { 0.3 });
                    ((a ^ flip) as u8) as f64
                })
                .collect()
        })
        .collect()
}

fn trained_toy_stack() -> LayerStack {
    let train = toy_data(300, 1);
    let mut cfg = TrainConfig::default();
    cfg.epochs = 30;
    cfg.batch_size = 20;
    cfg.lr = 0.05;
    cfg.momentum = 0.9;
    cfg.patience = None;
    let init = LayerStack::init(6, &[16], Activation::Relu, true, &mut rng(2));
    train_sgd(init, &train, None, &cfg).unwrap().model
}

#[test]
fn ensemble_is_never_below_the_mean_member_on_held_out_points() {
    let stack = trained_toy_stack();
    let test = toy_data(200, 99);
    let orderings: Vec<Ordering> = (0..16).map(|i| Ordering::from_seed(6, 500 + i)).collect();
    for x in &test {
        let members: Vec<f64> = orderings.iter().map(|o| logprob_ordering(&stack, x, o).unwrap()).collect();
        let mean = members.iter().sum::<f64>() / members.len() as f64;
        let ens = ensemble_logprob(&stack, x, &orderings).unwrap();
        assert!(ens >= mean - 1e-12, "{ens} < {mean}");
    }
}

/// Exact imputation law: missing entries drawn in a uniformly random order.
fn exact_imputation(stack: &LayerStack, x: &[f64], observed: &Mask) -> Vec<(Vec<f64>, f64)> {
    let missing = observed.missing();
    let orders = all_orderings(missing.len());
    let mut out = Vec::new();
    for fill in all_binary_vectors(missing.len()).unwrap() {
        let mut full = x.to_vec();
        for (k, &i) in missing.iter().enumerate() {
            full[i] = fill[k];
        }
        let mut prob = 0.0;
        for o in &orders {
            let mut mask = observed.clone();
            let mut lp = 0.0;
            for pos in o.iter() {
                let i = missing[pos];
                lp += log_bernoulli(full[i], clamp_prob(stack.forward(&full, &mask).unwrap()[i]));
                mask.set(i, true);
            }
            prob += lp.exp() / orders.len() as f64;
        }
        out.push((full, prob));
    }
    out
}

#[test]
fn imputations_follow_the_exact_conditional() {
    let stack = random_stack(6, &[8, 5], Activation::Relu, true, 17);
    let x = vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0];
    let observed = Mask::new(vec![true, false, true, true, false, true]);
    let exact = exact_imputation(&stack, &x, &observed);
    assert!((exact.iter().map(|(_, p)| p).sum::<f64>() - 1.0).abs() < 1e-12);
    let samples = impute(&stack, &x, &observed, &mut rng(5), 50_000).unwrap();
    let mut counts = vec![0usize; exact.len()];
    for s in &samples {
        for i in observed.observed() {
            assert_eq!(s[i], x[i]);
        }
        counts[exact.iter().position(|(f, _)| f == s).unwrap()] += 1;
    }
    let probs: Vec<f64> = exact.iter().map(|(_, p)| *p).collect();
    let tv = total_variation(&counts, &probs);
    assert!(tv <= 0.02, "TV {tv}");
}

#[test]
fn ancestral_samples_follow_the_single_ordering_model() {
    let stack = random_stack(4, &[6], Activation::Sigmoid, true, 23);
    let o = Ordering::from_seed(4, 1);
    let probs: Vec<f64> = all_binary_vectors(4)
        .unwrap()
        .iter()
        .map(|x| logprob_ordering(&stack, x, &o).unwrap().exp())
        .collect();
    let mut r = rng(4);
    let mut counts = vec![0usize; 16];
    for _ in 0..60_000 {
        counts[binary_index(&sample(&stack, &o, &mut r).unwrap())] += 1;
    }
    assert!(total_variation(&counts, &probs) <= 0.02);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn each_ordering_defines_a_normalized_distribution(
        d in 1usize..=8,
        depth in 1usize..=3,
        concat in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let hidden: Vec<usize> = (0..depth).map(|l| 2 + (seed as usize >> l) % 4).collect();
        let stack = random_stack(d, &hidden, Activation::Relu, concat, seed);
        let o = Ordering::from_seed(d, seed);
        let mass: f64 = all_binary_vectors(d)
            .unwrap()
            .iter()
            .map(|x| logprob_ordering(&stack, x, &o).unwrap().exp())
            .sum();
        prop_assert!((mass - 1.0).abs() <= 1e-9, "mass {}", mass);
    }

    #[test]
    fn outputs_ignore_values_at_unobserved_positions(
        seed in any::<u64>(),
        bits in prop::collection::vec(0u8..2, 6),
        noise in prop::collection::vec(-5.0f64..5.0, 6),
        observed in prop::collection::vec(any::<bool>(), 6),
    ) {
        let stack = random_stack(6, &[5, 4], Activation::Relu, true, seed);
        let x: Vec<f64> = bits.iter().map(|&b| b as f64).collect();
        let mask = Mask::new(observed.clone());
        let mut y = x.clone();
        for i in 0..6 {
            if !observed[i] {
                y[i] = noise[i];
            }
        }
        prop_assert_eq!(stack.forward(&x, &mask).unwrap(), stack.forward(&y, &mask).unwrap());
    }

    #[test]
    fn marginals_of_an_observed_block_sum_to_one(seed in any::<u64>(), observed in prop::collection::vec(any::<bool>(), 5)) {
        let stack = random_stack(5, &[6], Activation::Sigmoid, true, seed);
        let mask = Mask::new(observed);
        let mass: f64 = all_binary_vectors(5)
            .unwrap()
            .iter()
            .filter(|x| mask.missing().iter().all(|&i| x[i] == 0.0))
            .map(|x| marginal_logprob(&stack, x, &mask, &mut rng(seed)).unwrap().exp())
            .sum();
        prop_assert!((mass - 1.0).abs() <= 1e-9, "mass {}", mass);
    }
}

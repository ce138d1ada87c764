#![allow(dead_code)]

use nadekit::deepnade::LayerStack;
use nadekit::math::{Activation, Matrix};
use nadekit::nade::NadeParams;
use nadekit::params::ParamBlocks;
use nadekit::rnade::{ConditionalFamily, RnadeParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Fills every parameter uniformly in `[-scale, scale]`.
pub fn randomize<P: ParamBlocks>(p: &mut P, scale: f64, rng: &mut ChaCha8Rng) {
    for b in p.blocks_mut() {
        for v in b.iter_mut() {
            *v = rng.random_range(-scale..scale);
        }
    }
}

pub fn random_nade(d: usize, h: usize, act: Activation, seed: u64) -> NadeParams {
    let mut r = rng(seed);
    let mut p = NadeParams::zeros(d, h).with_activation(act);
    randomize(&mut p, 1.0, &mut r);
    p
}

pub fn random_rnade(d: usize, h: usize, family: ConditionalFamily, seed: u64) -> RnadeParams {
    let mut r = rng(seed);
    let mut p = RnadeParams::zeros(d, h, family).with_activation(Activation::Sigmoid);
    randomize(&mut p, 0.5, &mut r);
    p
}

pub fn random_stack(d: usize, hidden: &[usize], act: Activation, concat: bool, seed: u64) -> LayerStack {
    let mut r = rng(seed);
    let mut s = LayerStack::zeros(d, hidden, act, concat);
    randomize(&mut s, 0.8, &mut r);
    s
}

pub fn random_binary(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(0..2) as f64).collect()
}

/// Central finite differences of `f` with respect to every parameter of `p`.
pub fn finite_differences<P: ParamBlocks + Clone>(p: &P, eps: f64, f: impl Fn(&P) -> f64) -> Vec<f64> {
    let n = p.num_params();
    (0..n)
        .map(|i| {
            let mut plus = p.clone();
            *plus.flat_get_mut(i).unwrap() += eps;
            let mut minus = p.clone();
            *minus.flat_get_mut(i).unwrap() -= eps;
            (f(&plus) - f(&minus)) / (2.0 * eps)
        })
        .collect()
}

/// Largest relative error `|a-b| / max(|a|, |b|, floor)` over coordinates.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Total-variation distance between empirical counts and a probability table.
pub fn total_variation(counts: &[usize], probs: &[f64]) -> f64 {
    let n: usize = counts.iter().sum();
    0.5 * counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| (c as f64 / n as f64 - p).abs())
        .sum::<f64>()
}

/// Index of a binary vector whose bit `j` is `x[j]`.
pub fn binary_index(x: &[f64]) -> usize {
    x.iter().enumerate().map(|(j, &v)| (v as usize) << j).sum()
}

pub fn matrix_from(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> f64) -> Matrix {
    Matrix::from_fn(rows, cols, f)
}

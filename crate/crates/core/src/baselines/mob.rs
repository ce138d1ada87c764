use rand::Rng;

use crate::error::{ensure_len, Error, Result};
use crate::math::{log_bernoulli, logsumexp};
use crate::nade::check_binary;
use crate::params::{BlockRole, BlockSpec, ParamBlocks};

/// Clamp applied to M-step means.
pub const MOB_EPS: f64 = 1e-6;

/// Mixture of multivariate Bernoullis.
#[derive(Debug, Clone, PartialEq)]
pub struct MobParams {
    pub weights: Vec<f64>,
    /// `K * D`, row `k` holds component `k`'s means.
    pub means: Vec<f64>,
    pub dim: usize,
}

#[derive(Debug, Clone)]
pub struct MobFit {
    pub params: MobParams,
    /// Mean training log-likelihood after each iteration (index 0 is the initialization).
    pub train_ll: Vec<f64>,
    /// Mean validation log-likelihood after each iteration, when a validation set is given.
    pub valid_ll: Vec<f64>,
    /// Iteration whose parameters were returned.
    pub best_iter: usize,
}

impl MobParams {
    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn mean(&self, k: usize) -> &[f64] {
        &self.means[k * self.dim..(k + 1) * self.dim]
    }

    pub fn check_shapes(&self) -> Result<()> {
        ensure_len("MoB means", self.weights.len() * self.dim, self.means.len())?;
        if self.weights.is_empty() {
            return Err(Error::Contract("MoB needs at least one component".into()));
        }
        Ok(())
    }

    fn component_logs(&self, x: &[f64]) -> Vec<f64> {
        (0..self.components())
            .map(|k| {
                self.weights[k].ln()
                    + self
                        .mean(k)
                        .iter()
                        .zip(x)
                        .map(|(&m, &xi)| log_bernoulli(xi, m))
                        .sum::<f64>()
            })
            .collect()
    }

    pub fn log_prob(&self, x: &[f64]) -> Result<f64> {
        ensure_len("input", self.dim, x.len())?;
        check_binary(x)?;
        Ok(logsumexp(&self.component_logs(x)))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut k = self.components() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                k = i;
                break;
            }
        }
        self.mean(k)
            .iter()
            .map(|&m| if rng.random::<f64>() < m { 1.0 } else { 0.0 })
            .collect()
    }
}

impl ParamBlocks for MobParams {
    fn block_specs(&self) -> Vec<BlockSpec> {
        vec![
            BlockSpec::new("weights", self.weights.len(), BlockRole::Other),
            BlockSpec::new("means", self.means.len(), BlockRole::Other),
        ]
    }
    fn blocks(&self) -> Vec<&[f64]> {
        vec![&self.weights, &self.means]
    }
    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.weights, &mut self.means]
    }
}

fn mean_ll(p: &MobParams, rows: &[Vec<f64>]) -> f64 {
    rows.iter().map(|x| logsumexp(&p.component_logs(x))).sum::<f64>() / rows.len() as f64
}

/// EM for a `k`-component mixture. Means start uniform in `[0.25, 0.75]`.
///
/// With a validation set, iterations stop after `patience` non-improving
/// iterations and the best-validation parameters are returned.
pub fn mob_fit_em<R: Rng + ?Sized>(
    data: &[Vec<f64>],
    k: usize,
    max_iters: usize,
    valid: Option<&[Vec<f64>]>,
    patience: Option<usize>,
    rng: &mut R,
) -> Result<MobFit> {
    let dim = data.first().map(Vec::len).ok_or_else(|| Error::Dataset("empty training set".into()))?;
    if k == 0 {
        return Err(Error::Contract("MoB needs at least one component".into()));
    }
    for x in data.iter().chain(valid.unwrap_or(&[]).iter()) {
        ensure_len("input", dim, x.len())?;
        check_binary(x)?;
    }
    let mut p = MobParams {
        weights: vec![1.0 / k as f64; k],
        means: (0..k * dim).map(|_| rng.random_range(0.25..0.75)).collect(),
        dim,
    };
    let valid = valid.filter(|v| !v.is_empty());
    let mut train_ll = vec![mean_ll(&p, data)];
    let mut valid_ll: Vec<f64> = valid.map(|v| vec![mean_ll(&p, v)]).unwrap_or_default();
    let mut best = (0usize, p.clone());
    let mut since = 0usize;
    let n = data.len() as f64;
    for it in 1..=max_iters {
        let mut nk = vec![0.0; k];
        let mut sums = vec![0.0; k * dim];
        for x in data {
            let logs = p.component_logs(x);
            let z = logsumexp(&logs);
            for c in 0..k {
                let r = (logs[c] - z).exp();
                nk[c] += r;
                for (s, &xi) in sums[c * dim..(c + 1) * dim].iter_mut().zip(x) {
                    *s += r * xi;
                }
            }
        }
        for c in 0..k {
            p.weights[c] = nk[c] / n;
            if nk[c] > 0.0 {
                for j in 0..dim {
                    p.means[c * dim + j] = (sums[c * dim + j] / nk[c]).clamp(MOB_EPS, 1.0 - MOB_EPS);
                }
            }
        }
        train_ll.push(mean_ll(&p, data));
        if let Some(v) = valid {
            let s = mean_ll(&p, v);
            valid_ll.push(s);
            if s > valid_ll[best.0] {
                best = (it, p.clone());
                since = 0;
            } else {
                since += 1;
                if patience.is_some_and(|pt| since >= pt) {
                    break;
                }
            }
        } else {
            best = (it, p.clone());
        }
    }
    Ok(MobFit {
        params: best.1,
        train_ll,
        valid_ll,
        best_iter: best.0,
    })
}

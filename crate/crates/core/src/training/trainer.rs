use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::TrainConfig;
use super::sgd::Sgd;
use crate::error::{Error, Result};
use crate::eval::fmt_f64;
use crate::params::ParamBlocks;

/// Examples per parallel work unit; reduction over units is in fixed order.
const GRAD_CHUNK: usize = 8;

/// A model trainable by minibatch gradient descent on a per-example loss.
pub trait Trainable: ParamBlocks + Clone + Send + Sync {
    type Grad: ParamBlocks + Send;

    fn zero_grad(&self) -> Self::Grad;

    /// Adds `weight * ∇loss(x)` into `grad` and returns `loss(x)`.
    ///
    /// `rng` is private to this example and derived deterministically from the
    /// training seed, so stochastic losses are reproducible under any thread count.
    fn accumulate_grad(
        &self,
        x: &[f64],
        weight: f64,
        rng: &mut ChaCha8Rng,
        grad: &mut Self::Grad,
    ) -> Result<f64>;

    /// Score on held-out rows (higher is better), typically mean log-likelihood.
    fn validation_score(&self, rows: &[Vec<f64>], eval_seed: u64) -> Result<f64>;

    /// Optional hook run before each epoch (e.g. to toggle training heuristics).
    fn on_epoch_start(&mut self, _epoch: usize) {}
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_score: Option<f64>,
    pub lr: f64,
}

/// Per-epoch training history.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub records: Vec<EpochRecord>,
}

impl History {
    /// CSV with header `epoch,train_loss,valid_score,lr`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,valid_score,lr\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.epoch,
                fmt_f64(r.train_loss),
                r.valid_score.map(fmt_f64).unwrap_or_default(),
                fmt_f64(r.lr)
            ));
        }
        out
    }

    pub fn best_valid(&self) -> Option<(usize, f64)> {
        self.records
            .iter()
            .filter_map(|r| r.valid_score.map(|s| (r.epoch, s)))
            .fold(None, |best, (e, s)| match best {
                Some((_, b)) if b >= s => best,
                _ => Some((e, s)),
            })
    }
}

/// Best-so-far bookkeeping for early stopping.
#[derive(Debug, Clone)]
pub struct EarlyStopState<M> {
    pub best_score: f64,
    pub best_snapshot: Option<M>,
    pub best_epoch: Option<usize>,
    pub epochs_since_improvement: usize,
}

impl<M: Clone> EarlyStopState<M> {
    pub fn new() -> Self {
        EarlyStopState {
            best_score: f64::NEG_INFINITY,
            best_snapshot: None,
            best_epoch: None,
            epochs_since_improvement: 0,
        }
    }

    /// Records a score; returns true if it improved on the best.
    pub fn observe(&mut self, epoch: usize, score: f64, model: &M) -> bool {
        if score > self.best_score {
            self.best_score = score;
            self.best_snapshot = Some(model.clone());
            self.best_epoch = Some(epoch);
            self.epochs_since_improvement = 0;
            true
        } else {
            self.epochs_since_improvement += 1;
            false
        }
    }
}

impl<M: Clone> Default for EarlyStopState<M> {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Completed,
    EarlyStopped,
    /// The caller-provided predicate ended training.
    TargetReached,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<M> {
    pub model: M,
    pub history: History,
    pub stop: StopReason,
    /// Epoch whose parameters were returned (`None` if no epoch ran).
    pub best_epoch: Option<usize>,
    pub updates: usize,
}

/// Mixes training seed, update index and example index into one stream seed.
fn example_seed(seed: u64, step: usize, index: usize) -> u64 {
    let mut z = seed ^ (step as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (index as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mean loss and mean gradient over a minibatch, computed in parallel with a
/// fixed-order reduction.
pub fn minibatch_gradient<M: Trainable>(
    model: &M,
    batch: &[&[f64]],
    seed: u64,
    step: usize,
) -> Result<(f64, M::Grad)> {
    let weight = 1.0 / batch.len() as f64;
    let partials: Vec<Result<(f64, M::Grad)>> = batch
        .par_chunks(GRAD_CHUNK)
        .enumerate()
        .map(|(ci, chunk)| {
            let mut g = model.zero_grad();
            let mut loss = 0.0;
            for (j, x) in chunk.iter().enumerate() {
                let mut rng = ChaCha8Rng::seed_from_u64(example_seed(seed, step, ci * GRAD_CHUNK + j));
                loss += model.accumulate_grad(x, weight, &mut rng, &mut g)?;
            }
            Ok((loss, g))
        })
        .collect();
    let mut iter = partials.into_iter();
    let (mut loss, mut grad) = iter.next().expect("non-empty batch")?;
    for part in iter {
        let (l, g) = part?;
        loss += l;
        for (dst, src) in grad.blocks_mut().into_iter().zip(g.blocks()) {
            crate::math::axpy(1.0, src, dst);
        }
    }
    Ok((loss * weight, grad))
}

/// Minibatch SGD with per-epoch validation and early stopping.
///
/// Returns the best-validation snapshot when `valid` is given, otherwise the
/// final parameters.
pub fn train_sgd<M: Trainable>(
    init: M,
    train: &[Vec<f64>],
    valid: Option<&[Vec<f64>]>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<M>> {
    train_sgd_until(init, train, valid, cfg, |_, _| false)
}

/// As [`train_sgd`], additionally stopping after any epoch for which
/// `stop(epoch, mean_train_loss)` returns true.
pub fn train_sgd_until<M: Trainable>(
    init: M,
    train: &[Vec<f64>],
    valid: Option<&[Vec<f64>]>,
    cfg: &TrainConfig,
    mut stop: impl FnMut(usize, f64) -> bool,
) -> Result<TrainOutcome<M>> {
    if train.is_empty() {
        return Err(Error::Dataset("empty training set".into()));
    }
    let mut model = init;
    let mut history = History::default();
    if cfg.epochs == 0 {
        return Ok(TrainOutcome {
            model,
            history,
            stop: StopReason::Completed,
            best_epoch: None,
            updates: 0,
        });
    }
    let updates_per_epoch = cfg.updates_for(train.len());
    let schedule = cfg.schedule_for(updates_per_epoch * cfg.epochs);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(&mut shuffle_rng);
    let mut cursor = 0usize;
    let mut opt = Sgd::new();
    let mut early = EarlyStopState::new();
    let mut t = 0usize;
    let mut reason = StopReason::Completed;
    let diverged = |history: &History, step: usize, what: String| Error::Diverged {
        step,
        what,
        history: history.clone(),
    };

    for epoch in 0..cfg.epochs {
        model.on_epoch_start(epoch);
        let momentum = if epoch >= cfg.momentum_start_epoch {
            cfg.momentum
        } else {
            0.0
        };
        let mut loss_sum = 0.0;
        for _ in 0..updates_per_epoch {
            let mut batch: Vec<&[f64]> = Vec::with_capacity(cfg.batch_size);
            while batch.len() < cfg.batch_size.min(train.len()) {
                if cursor == order.len() {
                    order.shuffle(&mut shuffle_rng);
                    cursor = 0;
                }
                batch.push(&train[order[cursor]]);
                cursor += 1;
            }
            let (loss, grad) = minibatch_gradient(&model, &batch, cfg.seed, t)?;
            if !loss.is_finite() {
                return Err(diverged(&history, t, format!("loss = {loss}")));
            }
            let lr = schedule.lr_at(t);
            if let Err(e) = opt.step(&mut model, &grad, lr, momentum, cfg.weight_decay, t) {
                return Err(match e {
                    Error::NonFinite { step, what } => diverged(&history, step, what),
                    other => other,
                });
            }
            if !model.all_finite() {
                return Err(diverged(&history, t, "non-finite parameters".into()));
            }
            loss_sum += loss;
            t += 1;
        }
        let train_loss = loss_sum / updates_per_epoch as f64;
        let valid_score = match valid {
            Some(v) if !v.is_empty() => Some(model.validation_score(v, cfg.eval_seed)?),
            _ => None,
        };
        history.records.push(EpochRecord {
            epoch,
            train_loss,
            valid_score,
            lr: schedule.lr_at(t),
        });
        if let Some(score) = valid_score {
            if !score.is_finite() {
                return Err(diverged(&history, t, format!("validation score = {score}")));
            }
            early.observe(epoch, score, &model);
            if let Some(p) = cfg.patience {
                if early.epochs_since_improvement >= p {
                    reason = StopReason::EarlyStopped;
                    break;
                }
            }
        }
        if stop(epoch, train_loss) {
            reason = StopReason::TargetReached;
            break;
        }
    }

    let last_epoch = history.records.last().map(|r| r.epoch);
    let (model, best_epoch) = match (reason, early.best_snapshot) {
        (StopReason::TargetReached, _) | (_, None) => (model, last_epoch),
        (_, Some(best)) => (best, early.best_epoch),
    };
    Ok(TrainOutcome {
        model,
        history,
        stop: reason,
        best_epoch,
        updates: t,
    })
}

//! Name-keyed registry of estimators.
//!
//! Every estimator is reached through two trait objects: a [`ModelFactory`]
//! that trains and decodes it, and the [`DensityModel`] it produces.

mod bench;
mod models;

use std::collections::BTreeMap;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::container::ModelContainer;
use crate::data::{DataKind, Dataset};
use crate::error::{Error, Result};
use crate::params::ParamBlocks;
use crate::training::{History, TrainConfig};

pub use bench::{
    ordering_spread, parse_recipe, run_recipe, BenchRow, OrderingSpread, Recipe, RecipeRun, BENCH_CSV_HEADER,
};
pub use models::{
    ChowLiuFactory, DeepNadeFactory, DeepNadeModel, FvsbnFactory, GaussianFactory, MobFactory, NadeFactory,
    RnadeFactory,
};

/// A trained, tractable density over fixed-width vectors.
pub trait DensityModel: Send + Sync {
    fn kind(&self) -> &'static str;

    fn dim(&self) -> usize;

    fn data_kind(&self) -> DataKind;

    /// Exact `log p(x)` in nats.
    fn log_prob(&self, x: &[f64]) -> Result<f64>;

    /// `log p(x)` averaged in probability over `k` orderings; models without
    /// an ordering ensemble accept only `k = 1`.
    fn log_prob_ensemble(&self, x: &[f64], k: usize) -> Result<f64> {
        if k == 1 {
            self.log_prob(x)
        } else {
            Err(Error::Unsupported {
                op: "ensemble evaluation",
                kind: self.kind().into(),
            })
        }
    }

    fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>>;

    /// Completes entries with `observed[i] == false`, `n` times.
    fn impute(&self, _x: &[f64], _observed: &[bool], _n: usize, _rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
        Err(Error::Unsupported {
            op: "imputation",
            kind: self.kind().into(),
        })
    }

    fn to_container(&self) -> ModelContainer;
}

/// Result of a training run.
pub struct Trained {
    pub model: Box<dyn DensityModel>,
    pub history: Option<History>,
    /// Validation score of the returned model, if a validation split was used.
    pub valid_score: Option<f64>,
}

/// Trains and decodes one estimator family.
pub trait ModelFactory: Send + Sync {
    fn name(&self) -> &'static str;

    /// Model-specific configuration keys accepted in `TrainConfig::hyper`.
    fn hyper_keys(&self) -> &'static [&'static str];

    fn train(&self, data: &Dataset, cfg: &TrainConfig) -> Result<Trained>;

    fn decode(&self, c: &ModelContainer) -> Result<Box<dyn DensityModel>>;
}

pub struct Registry {
    factories: BTreeMap<&'static str, Box<dyn ModelFactory>>,
}

impl Registry {
    pub fn empty() -> Self {
        Registry {
            factories: BTreeMap::new(),
        }
    }

    /// Registry holding every built-in estimator.
    pub fn builtin() -> Self {
        let mut r = Registry::empty();
        r.register(Box::new(NadeFactory));
        r.register(Box::new(RnadeFactory));
        r.register(Box::new(DeepNadeFactory));
        r.register(Box::new(MobFactory));
        r.register(Box::new(ChowLiuFactory));
        r.register(Box::new(FvsbnFactory));
        r.register(Box::new(GaussianFactory));
        r
    }

    pub fn register(&mut self, f: Box<dyn ModelFactory>) {
        self.factories.insert(f.name(), f);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.factories.keys().copied().collect()
    }

    pub fn get(&self, name: &str) -> Result<&dyn ModelFactory> {
        self.factories
            .get(name)
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::UnknownModel(name.into()))
    }

    pub fn train(&self, name: &str, data: &Dataset, cfg: &TrainConfig) -> Result<Trained> {
        let f = self.get(name)?;
        cfg.check_hyper_keys(name, f.hyper_keys())?;
        f.train(data, cfg)
    }

    pub fn decode(&self, c: &ModelContainer) -> Result<Box<dyn DensityModel>> {
        self.get(&c.kind)?.decode(c)
    }

    pub fn load(&self, path: &Path) -> Result<Box<dyn DensityModel>> {
        self.decode(&ModelContainer::load(path)?)
    }
}

/// Per-row log-likelihoods, evaluated in parallel, returned in row order.
pub fn evaluate(model: &dyn DensityModel, rows: &[Vec<f64>], ensemble: usize) -> Result<Vec<f64>> {
    if ensemble == 0 {
        return Err(Error::Contract("ensemble size must be at least 1".into()));
    }
    rows.par_iter()
        .map(|x| model.log_prob_ensemble(x, ensemble))
        .collect()
}

/// Writes every block of `p` into `c` under its block name.
pub(crate) fn put_blocks<P: ParamBlocks>(c: &mut ModelContainer, p: &P) {
    for (spec, data) in p.block_specs().into_iter().zip(p.blocks()) {
        c.push_block(&spec.name, data.to_vec());
    }
}

/// Fills every block of `p` (already shaped) from `c`, checking names and lengths.
pub(crate) fn get_blocks<P: ParamBlocks>(c: &ModelContainer, p: &mut P) -> Result<()> {
    let specs = p.block_specs();
    for (spec, dst) in specs.iter().zip(p.blocks_mut()) {
        dst.copy_from_slice(&c.block_len(&spec.name, spec.len)?);
    }
    if c.blocks.len() != specs.len() {
        return Err(Error::Format(format!(
            "expected {} parameter blocks, found {}",
            specs.len(),
            c.blocks.len()
        )));
    }
    if !p.all_finite() {
        return Err(Error::Format("non-finite parameter in model file".into()));
    }
    Ok(())
}

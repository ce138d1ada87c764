//! Experiment recipes: a dataset, a protocol and a list of runs, each a model
//! with a configuration grid selected on validation and scored on test.
//!
//! ```text
//! name=adult
//! data=adult            # directory with train/valid/test files
//! kind=binary
//! protocol=splits       # or `uci` for a raw table split into folds
//!
//! [nade]
//! model=nade
//! hidden=500
//! lr=0.05|0.005|0.0005  # `|` separates grid values
//! gamma=0|0.001
//! ```

use std::path::{Path, PathBuf};

use super::{evaluate, Registry};
use crate::data::{load_dataset, load_raw_table, uci_preprocess, DataKind, Dataset, UciOptions};
use crate::error::{Error, Result};
use crate::eval::{fmt_f64, MeanSe};
use crate::training::{expand_grid, select_best, TrainConfig};

pub const BENCH_CSV_HEADER: &str = "recipe,run,model,folds,valid_score,test_mean,test_se,ci95,n,selected";

#[derive(Debug, Clone, PartialEq)]
pub struct RecipeRun {
    pub label: String,
    pub model: String,
    pub ensemble: usize,
    /// Fixed `key=value` settings.
    pub fixed: Vec<(String, String)>,
    /// Grid axes, each with at least two values.
    pub axes: Vec<(String, Vec<String>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recipe {
    pub name: String,
    pub data: PathBuf,
    pub kind: DataKind,
    pub protocol: String,
    pub uci: UciOptions,
    pub runs: Vec<RecipeRun>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub recipe: String,
    pub run: String,
    pub model: String,
    pub folds: usize,
    /// Mean over folds of the selected configuration's validation score.
    pub valid_score: Option<f64>,
    /// Test log-likelihood; across folds, the standard error is that of the fold means.
    pub test: MeanSe,
    /// Selected grid values per fold.
    pub selected: Vec<String>,
}

impl BenchRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.recipe,
            self.run,
            self.model,
            self.folds,
            self.valid_score.map(fmt_f64).unwrap_or_default(),
            fmt_f64(self.test.mean),
            fmt_f64(self.test.se),
            fmt_f64(self.test.ci95()),
            self.test.n,
            self.selected.join("/")
        )
    }
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let path = Path::new(p);
    if path.is_absolute() {
        return path.to_path_buf();
    }
    if let Some(dir) = std::env::var_os("NADE_DATA_DIR") {
        let candidate = Path::new(&dir).join(path);
        if candidate.exists() {
            return candidate;
        }
    }
    base.join(path)
}

/// Parses recipe text; relative data paths resolve against `NADE_DATA_DIR`
/// when the file exists there, otherwise against `base`.
pub fn parse_recipe(text: &str, base: &Path) -> Result<Recipe> {
    let mut name = String::from("recipe");
    let mut data = None;
    let mut kind = DataKind::Binary;
    let mut protocol = String::from("splits");
    let mut uci = UciOptions::default();
    let mut runs: Vec<RecipeRun> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Config(format!("recipe line {}: {msg}", n + 1));
        if let Some(label) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            runs.push(RecipeRun {
                label: label.trim().to_string(),
                model: String::new(),
                ensemble: 1,
                fixed: Vec::new(),
                axes: Vec::new(),
            });
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| err("expected key=value".into()))?;
        let (k, v) = (k.trim(), v.trim());
        match runs.last_mut() {
            None => match k {
                "name" => name = v.to_string(),
                "data" => data = Some(resolve(base, v)),
                "kind" => kind = v.parse()?,
                "protocol" => protocol = v.to_string(),
                "folds" => uci.folds = v.parse().map_err(|_| err(format!("invalid folds `{v}`")))?,
                "split_seed" => uci.seed = v.parse().map_err(|_| err(format!("invalid seed `{v}`")))?,
                "corr_threshold" => {
                    uci.corr_threshold = v.parse().map_err(|_| err(format!("invalid threshold `{v}`")))?
                }
                "discrete_max_levels" => {
                    uci.discrete_max_levels = v.parse().map_err(|_| err(format!("invalid level count `{v}`")))?
                }
                "drop" => {
                    uci.drop = v
                        .split(',')
                        .map(|t| t.trim().parse().map_err(|_| err(format!("invalid column `{t}`"))))
                        .collect::<Result<_>>()?
                }
                _ => return Err(err(format!("unknown recipe key `{k}`"))),
            },
            Some(run) => match k {
                "model" => run.model = v.to_string(),
                "ensemble" => run.ensemble = v.parse().map_err(|_| err(format!("invalid ensemble `{v}`")))?,
                _ if v.contains('|') => run
                    .axes
                    .push((k.to_string(), v.split('|').map(|s| s.trim().to_string()).collect())),
                _ => run.fixed.push((k.to_string(), v.to_string())),
            },
        }
    }
    let data = data.ok_or_else(|| Error::Config("recipe has no `data` entry".into()))?;
    if !matches!(protocol.as_str(), "splits" | "uci") {
        return Err(Error::Config(format!("unknown protocol `{protocol}` (splits or uci)")));
    }
    if let Some(r) = runs.iter().find(|r| r.model.is_empty()) {
        return Err(Error::Config(format!("run `{}` has no model", r.label)));
    }
    Ok(Recipe {
        name,
        data,
        kind,
        protocol,
        uci,
        runs,
    })
}

fn datasets(recipe: &Recipe) -> Result<Vec<Dataset>> {
    match recipe.protocol.as_str() {
        "uci" => uci_preprocess(&recipe.name, &load_raw_table(&recipe.data)?, &recipe.uci),
        _ => Ok(vec![load_dataset(&recipe.data, recipe.kind)?]),
    }
}

/// Trains every grid point on one dataset and returns
/// `(selected-values, valid score, per-example test log-likelihoods)`.
pub fn run_on_dataset(
    registry: &Registry,
    run: &RecipeRun,
    data: &Dataset,
) -> Result<(String, Option<f64>, Vec<f64>)> {
    if data.test.is_empty() {
        return Err(Error::Dataset(format!("{} has no test split", data.name)));
    }
    let mut base = TrainConfig::default();
    for (k, v) in &run.fixed {
        base.set(k, v)?;
    }
    let grid = expand_grid(&base, &run.axes)?;
    let mut trained = Vec::with_capacity(grid.len());
    for cfg in &grid {
        trained.push(registry.train(&run.model, data, cfg)?);
    }
    let scores: Vec<f64> = trained
        .iter()
        .map(|t| t.valid_score.unwrap_or(f64::NEG_INFINITY))
        .collect();
    let best = select_best(&scores).unwrap_or(0);
    let selected = run
        .axes
        .iter()
        .map(|(k, _)| {
            let v = grid[best]
                .hyper_str(k)
                .map(str::to_string)
                .unwrap_or_else(|| axis_value(&grid[best], k));
            format!("{k}={v}")
        })
        .collect::<Vec<_>>()
        .join(";");
    let lls = evaluate(trained[best].model.as_ref(), &data.test, run.ensemble)?;
    Ok((selected, trained[best].valid_score, lls))
}

fn axis_value(cfg: &TrainConfig, key: &str) -> String {
    cfg.to_text()
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")).map(str::to_string))
        .unwrap_or_default()
}

/// Runs every entry of the recipe, calling `on_row` as each run finishes.
pub fn run_recipe(registry: &Registry, recipe: &Recipe, mut on_row: impl FnMut(&BenchRow)) -> Result<Vec<BenchRow>> {
    let sets = datasets(recipe)?;
    let mut rows = Vec::new();
    for run in &recipe.runs {
        let mut fold_stats = Vec::new();
        let mut valid = Vec::new();
        let mut selected = Vec::new();
        for ds in &sets {
            let (sel, v, lls) = run_on_dataset(registry, run, ds)?;
            fold_stats.push(MeanSe::of(&lls));
            valid.extend(v);
            selected.push(sel);
        }
        let test = if fold_stats.len() == 1 {
            fold_stats[0]
        } else {
            MeanSe::across(&fold_stats)
        };
        let row = BenchRow {
            recipe: recipe.name.clone(),
            run: run.label.clone(),
            model: run.model.clone(),
            folds: sets.len(),
            valid_score: (!valid.is_empty()).then(|| valid.iter().sum::<f64>() / valid.len() as f64),
            test,
            selected,
        };
        on_row(&row);
        rows.push(row);
    }
    Ok(rows)
}

/// Test log-likelihood of one model retrained under several orderings.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderingSpread {
    pub seeds: Vec<u64>,
    /// Mean test log-likelihood of each retrained model.
    pub means: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation of `means` (0 for a single run).
    pub std: f64,
}

/// Retrains `model` once per `ordering_seed` and reports the spread of its test score.
pub fn ordering_spread(
    registry: &Registry,
    model: &str,
    data: &Dataset,
    base: &TrainConfig,
    seeds: &[u64],
) -> Result<OrderingSpread> {
    if seeds.is_empty() {
        return Err(Error::Contract("ordering spread needs at least one seed".into()));
    }
    let mut means = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut cfg = base.clone();
        cfg.set("ordering_seed", &seed.to_string())?;
        let trained = registry.train(model, data, &cfg)?;
        means.push(MeanSe::of(&evaluate(trained.model.as_ref(), &data.test, 1)?).mean);
    }
    let n = means.len() as f64;
    let mean = means.iter().sum::<f64>() / n;
    let std = if means.len() > 1 {
        (means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(OrderingSpread {
        seeds: seeds.to_vec(),
        means,
        mean,
        std,
    })
}

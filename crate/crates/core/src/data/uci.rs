use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::{DataKind, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct UciOptions {
    /// Drop one column of every pair whose absolute Pearson correlation exceeds this.
    pub corr_threshold: f64,
    /// A column is discrete if all values are integers and it has at most this many levels.
    pub discrete_max_levels: usize,
    /// Columns (0-based) dropped unconditionally.
    pub drop: Vec<usize>,
    pub folds: usize,
    pub seed: u64,
}

impl Default for UciOptions {
    fn default() -> Self {
        UciOptions {
            corr_threshold: 0.98,
            discrete_max_levels: 20,
            drop: Vec::new(),
            folds: 10,
            seed: 0,
        }
    }
}

fn column(raw: &[Vec<f64>], j: usize) -> Vec<f64> {
    raw.iter().map(|r| r[j]).collect()
}

pub fn is_discrete(col: &[f64], max_levels: usize) -> bool {
    if col.iter().any(|v| v.fract() != 0.0) {
        return false;
    }
    let mut vals: Vec<f64> = col.to_vec();
    vals.sort_by(f64::total_cmp);
    vals.dedup();
    vals.len() <= max_levels
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

/// Indices of the columns kept after dropping explicit, discrete and
/// highly correlated columns (the later column of each correlated pair goes).
pub fn select_columns(raw: &[Vec<f64>], opts: &UciOptions) -> Result<Vec<usize>> {
    let d = raw.first().map(Vec::len).ok_or_else(|| Error::Dataset("empty table".into()))?;
    let mut kept: Vec<usize> = (0..d)
        .filter(|j| !opts.drop.contains(j))
        .filter(|&j| !is_discrete(&column(raw, j), opts.discrete_max_levels))
        .collect();
    let mut i = 0;
    while i < kept.len() {
        let ci = column(raw, kept[i]);
        let mut k = i + 1;
        while k < kept.len() {
            if pearson(&ci, &column(raw, kept[k])).abs() > opts.corr_threshold {
                kept.remove(k);
            } else {
                k += 1;
            }
        }
        i += 1;
    }
    if kept.is_empty() {
        return Err(Error::Dataset("no columns survive filtering".into()));
    }
    Ok(kept)
}

/// Standardizes `rows` in place with the training rows' mean and standard deviation.
pub fn standardize(train: &mut [Vec<f64>], others: &mut [&mut Vec<Vec<f64>>]) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = train.first().map(Vec::len).ok_or_else(|| Error::Dataset("empty training fold".into()))?;
    let n = train.len() as f64;
    let mut mean = vec![0.0; d];
    for r in train.iter() {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / n;
        }
    }
    let mut sd = vec![0.0; d];
    for r in train.iter() {
        for j in 0..d {
            sd[j] += (r[j] - mean[j]).powi(2) / n;
        }
    }
    for (j, s) in sd.iter_mut().enumerate() {
        *s = s.sqrt();
        if *s == 0.0 || !s.is_finite() {
            return Err(Error::Dataset(format!("column {} has zero variance in the training fold", j + 1)));
        }
    }
    let apply = |rows: &mut [Vec<f64>]| {
        for r in rows {
            for j in 0..d {
                r[j] = (r[j] - mean[j]) / sd[j];
            }
        }
    };
    apply(train);
    for o in others.iter_mut() {
        apply(o);
    }
    Ok((mean, sd))
}

/// Filters columns, shuffles rows with `opts.seed`, and emits `opts.folds`
/// folds. Each fold tests on one contiguous block; the remaining rows are
/// split into training and a validation ninth, and all splits are
/// standardized with the training split's statistics.
pub fn uci_preprocess(name: &str, raw: &[Vec<f64>], opts: &UciOptions) -> Result<Vec<Dataset>> {
    if opts.folds < 2 {
        return Err(Error::Config("need at least two folds".into()));
    }
    if raw.len() < opts.folds * 2 {
        return Err(Error::Dataset(format!("{} rows are too few for {} folds", raw.len(), opts.folds)));
    }
    super::dataset::validate_rows(raw, raw[0].len(), DataKind::Real)?;
    let cols = select_columns(raw, opts)?;
    let mut rows: Vec<Vec<f64>> = raw.iter().map(|r| cols.iter().map(|&j| r[j]).collect()).collect();
    rows.shuffle(&mut ChaCha8Rng::seed_from_u64(opts.seed));
    let n = rows.len();
    (0..opts.folds)
        .map(|f| {
            let (lo, hi) = (f * n / opts.folds, (f + 1) * n / opts.folds);
            let mut test: Vec<Vec<f64>> = rows[lo..hi].to_vec();
            let rest: Vec<Vec<f64>> = rows[..lo].iter().chain(&rows[hi..]).cloned().collect();
            let n_valid = rest.len() / 9;
            let mut train = rest[..rest.len() - n_valid].to_vec();
            let mut valid = rest[rest.len() - n_valid..].to_vec();
            standardize(&mut train, &mut [&mut valid, &mut test])?;
            Dataset::new(format!("{name}-fold{f}"), DataKind::Real, train, valid, test)
        })
        .collect()
}

/// Reads a numeric table, skipping one leading header line if it is not numeric.
pub fn load_raw_table(path: &std::path::Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let first = lines.clone().find(|l| !l.trim().is_empty()).unwrap_or("");
    let header = first
        .split(|c: char| c.is_whitespace() || c == ',' || c == ';')
        .filter(|s| !s.is_empty())
        .any(|t| t.trim_matches('"').parse::<f64>().is_err());
    let body: String = if header {
        lines.find(|l| !l.trim().is_empty());
        lines.collect::<Vec<_>>().join("\n")
    } else {
        text.clone()
    };
    super::dataset::parse_rows(&body, DataKind::Real).map_err(|e| match e {
        Error::Data { row, col, msg } => Error::Data {
            row: row + header as usize,
            col,
            msg,
        },
        other => other,
    })
}

use super::config::TrainConfig;
use crate::error::{Error, Result};

/// Cartesian product of `base` with every `(key, values)` axis, in row-major
/// order (the last axis varies fastest).
pub fn expand_grid(base: &TrainConfig, axes: &[(String, Vec<String>)]) -> Result<Vec<TrainConfig>> {
    let mut out = vec![base.clone()];
    for (key, values) in axes {
        if values.is_empty() {
            return Err(Error::Config(format!("grid axis `{key}` has no values")));
        }
        let mut next = Vec::with_capacity(out.len() * values.len());
        for cfg in &out {
            for v in values {
                let mut c = cfg.clone();
                c.set(key, v)?;
                next.push(c);
            }
        }
        out = next;
    }
    Ok(out)
}

/// Parses `key=v1,v2,...` axis lines.
pub fn parse_axis(spec: &str) -> Result<(String, Vec<String>)> {
    let (k, v) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("grid axis `{spec}` lacks `=`")))?;
    let values: Vec<String> = v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    Ok((k.trim().to_string(), values))
}

/// Index of the highest score; ties resolve to the earliest candidate.
pub fn select_best(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s.is_nan() {
            continue;
        }
        match best {
            Some(b) if scores[b] >= s => {}
            _ => best = Some(i),
        }
    }
    best
}

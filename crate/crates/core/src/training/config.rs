use std::collections::BTreeMap;
use std::path::Path;

use super::schedule::Schedule;
use crate::error::{Error, Result};

/// How the learning rate decays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleKind {
    InvDecay { gamma: f64 },
    /// Decays to zero after `horizon` updates; `None` means "after the last planned update".
    LinearToZero { horizon: Option<usize> },
}

/// Optimization protocol shared by every gradient-trained model.
///
/// Parsed from `key=value` text. Keys not listed here are model
/// hyperparameters and are kept verbatim in `hyper`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    /// Updates per epoch; `None` means one pass over the training set.
    pub updates_per_epoch: Option<usize>,
    pub lr: f64,
    pub schedule: ScheduleKind,
    pub momentum: f64,
    /// First epoch (0-based) in which momentum is applied.
    pub momentum_start_epoch: usize,
    /// Decay rate on the input-to-hidden matrix only.
    pub weight_decay: f64,
    /// Early-stopping look-ahead in epochs; `None` disables early stopping.
    pub patience: Option<usize>,
    pub seed: u64,
    /// Seed for stochastic validation estimates.
    pub eval_seed: u64,
    /// Multiply location gradients by the component scale; `None` uses the family default.
    pub scale_mean_grad: Option<bool>,
    pub hyper: BTreeMap<String, String>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 100,
            epochs: 100,
            updates_per_epoch: None,
            lr: 0.005,
            schedule: ScheduleKind::InvDecay { gamma: 0.0 },
            momentum: 0.0,
            momentum_start_epoch: 0,
            weight_decay: 0.0,
            patience: Some(10),
            seed: 1234,
            eval_seed: 4321,
            scale_mean_grad: None,
            hyper: BTreeMap::new(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{v}` for `{key}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean `{v}` for `{key}`"))),
    }
}

impl TrainConfig {
    /// Sets one key; unknown keys are stored as model hyperparameters.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        let value = value.trim();
        match key {
            "batch_size" | "minibatch" => {
                self.batch_size = parse_num(key, value)?;
                if self.batch_size == 0 {
                    return Err(Error::Config("batch_size must be positive".into()));
                }
            }
            "epochs" => self.epochs = parse_num(key, value)?,
            "updates_per_epoch" => {
                self.updates_per_epoch = match value {
                    "auto" | "pass" => None,
                    v => Some(parse_num(key, v)?),
                }
            }
            "lr" | "learning_rate" => {
                self.lr = parse_num(key, value)?;
                if !(self.lr >= 0.0) {
                    return Err(Error::Config("lr must be >= 0".into()));
                }
            }
            "schedule" => {
                self.schedule = match value {
                    "inv" | "inv_decay" => ScheduleKind::InvDecay {
                        gamma: self.gamma().unwrap_or(0.0),
                    },
                    "linear" | "linear_to_zero" => ScheduleKind::LinearToZero {
                        horizon: self.horizon(),
                    },
                    _ => return Err(Error::Config(format!("unknown schedule `{value}`"))),
                }
            }
            "gamma" | "decay_constant" => {
                self.schedule = ScheduleKind::InvDecay {
                    gamma: parse_num(key, value)?,
                }
            }
            "horizon" => {
                self.schedule = ScheduleKind::LinearToZero {
                    horizon: match value {
                        "auto" => None,
                        v => Some(parse_num(key, v)?),
                    },
                }
            }
            "momentum" => {
                let m: f64 = parse_num(key, value)?;
                if !(0.0..1.0).contains(&m) {
                    return Err(Error::Config("momentum must be in [0, 1)".into()));
                }
                self.momentum = m;
            }
            "momentum_start_epoch" => self.momentum_start_epoch = parse_num(key, value)?,
            "weight_decay" => {
                let w: f64 = parse_num(key, value)?;
                if !(w >= 0.0) {
                    return Err(Error::Config("weight_decay must be >= 0".into()));
                }
                self.weight_decay = w;
            }
            "patience" | "look_ahead" => {
                self.patience = match value {
                    "none" | "off" | "0" => None,
                    v => Some(parse_num(key, v)?),
                }
            }
            "seed" => self.seed = parse_num(key, value)?,
            "eval_seed" => self.eval_seed = parse_num(key, value)?,
            "scale_mean_grad" => self.scale_mean_grad = Some(parse_bool(key, value)?),
            _ => {
                self.hyper.insert(key.to_string(), value.to_string());
            }
        }
        Ok(())
    }

    fn gamma(&self) -> Option<f64> {
        match self.schedule {
            ScheduleKind::InvDecay { gamma } => Some(gamma),
            _ => None,
        }
    }

    fn horizon(&self) -> Option<usize> {
        match self.schedule {
            ScheduleKind::LinearToZero { horizon } => horizon,
            _ => None,
        }
    }

    /// Parses `key=value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Concrete schedule given the planned total number of updates.
    pub fn schedule_for(&self, total_updates: usize) -> Schedule {
        match self.schedule {
            ScheduleKind::InvDecay { gamma } => Schedule::InvDecay { eta: self.lr, gamma },
            ScheduleKind::LinearToZero { horizon } => Schedule::LinearToZero {
                eta0: self.lr,
                horizon: horizon.unwrap_or(total_updates),
            },
        }
    }

    pub fn updates_for(&self, n_train: usize) -> usize {
        self.updates_per_epoch
            .unwrap_or_else(|| n_train.div_ceil(self.batch_size).max(1))
    }

    /// Serializes back to `key=value` text (hyperparameters last, sorted).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        };
        kv("batch_size", self.batch_size.to_string());
        kv("epochs", self.epochs.to_string());
        kv(
            "updates_per_epoch",
            self.updates_per_epoch
                .map_or("auto".to_string(), |u| u.to_string()),
        );
        kv("lr", self.lr.to_string());
        match self.schedule {
            ScheduleKind::InvDecay { gamma } => kv("gamma", gamma.to_string()),
            ScheduleKind::LinearToZero { horizon } => {
                kv("horizon", horizon.map_or("auto".to_string(), |h| h.to_string()))
            }
        }
        kv("momentum", self.momentum.to_string());
        kv("momentum_start_epoch", self.momentum_start_epoch.to_string());
        kv("weight_decay", self.weight_decay.to_string());
        kv(
            "patience",
            self.patience.map_or("none".to_string(), |p| p.to_string()),
        );
        kv("seed", self.seed.to_string());
        kv("eval_seed", self.eval_seed.to_string());
        if let Some(s) = self.scale_mean_grad {
            kv("scale_mean_grad", s.to_string());
        }
        for (k, v) in &self.hyper {
            kv(k, v.clone());
        }
        out
    }

    pub fn hyper_str(&self, key: &str) -> Option<&str> {
        self.hyper.get(key).map(String::as_str)
    }

    pub fn hyper_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.hyper.get(key) {
            Some(v) => parse_num(key, v),
            None => Ok(default),
        }
    }

    pub fn hyper_bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.hyper.get(key) {
            Some(v) => parse_bool(key, v),
            None => Ok(default),
        }
    }

    /// Comma-separated list of integers, e.g. `hidden=500,500`.
    pub fn hyper_list_or(&self, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        match self.hyper.get(key) {
            Some(v) if v.trim().is_empty() => Ok(Vec::new()),
            Some(v) => v.split(',').map(|s| parse_num(key, s)).collect(),
            None => Ok(default.to_vec()),
        }
    }

    /// Errors if a hyperparameter outside `allowed` is present.
    pub fn check_hyper_keys(&self, model: &str, allowed: &[&str]) -> Result<()> {
        for k in self.hyper.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(Error::Config(format!(
                    "unknown key `{k}` for model `{model}` (accepted: {})",
                    allowed.join(", ")
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_protocol_keys() {
        let cfg = TrainConfig::parse(
            "# patch protocol\nbatch_size=25\nepochs=1000\nupdates_per_epoch=1000\nlr=0.001\nschedule=linear\nmomentum=0.9\nmomentum_start_epoch=1\nweight_decay=0.001\nhidden=50\n",
        )
        .unwrap();
        assert_eq!(cfg.batch_size, 25);
        assert_eq!(cfg.updates_for(10), 1000);
        assert_eq!(
            cfg.schedule_for(1_000_000),
            Schedule::LinearToZero {
                eta0: 0.001,
                horizon: 1_000_000
            }
        );
        assert_eq!(cfg.hyper_or("hidden", 0usize).unwrap(), 50);
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = TrainConfig::default();
        cfg.set("gamma", "0.001").unwrap();
        cfg.set("family", "mog:5").unwrap();
        cfg.set("patience", "none").unwrap();
        assert_eq!(TrainConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(TrainConfig::parse("momentum=1.0").is_err());
        assert!(TrainConfig::parse("batch_size=0").is_err());
        assert!(TrainConfig::parse("lr").is_err());
        assert!(TrainConfig::parse("weight_decay=-1").is_err());
    }
}

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{get_blocks, put_blocks, DensityModel, ModelFactory, Trained};
use crate::baselines::{
    chowliu_fit, chowliu_logprob, chowliu_sample, gaussian_fit_mle, mob_fit_em, ChowLiuTree, FullGaussian,
    FvsbnParams, MobParams,
};
use crate::container::{join, ModelContainer};
use crate::data::{DataKind, Dataset};
use crate::deepnade::{self, pretrain, LayerStack, Mask};
use crate::error::{ensure_len, Error, Result};
use crate::math::Activation;
use crate::nade::NadeParams;
use crate::ordering::Ordering;
use crate::rnade::{ConditionalFamily, RnadeParams};
use crate::training::{train_sgd, NadeModel, RnadeModel, TrainConfig, TrainOutcome, Trainable};

fn require_kind(data: &Dataset, kind: DataKind, model: &str) -> Result<()> {
    if data.kind != kind {
        return Err(Error::Dataset(format!("model `{model}` needs {kind} data, got {}", data.kind)));
    }
    Ok(())
}

fn valid_split(data: &Dataset) -> Option<&[Vec<f64>]> {
    (!data.valid.is_empty()).then_some(data.valid.as_slice())
}

fn activation(cfg: &TrainConfig, default: Activation) -> Result<Activation> {
    match cfg.hyper_str("activation") {
        None => Ok(default),
        Some(s) => Activation::parse(s).ok_or_else(|| Error::Config(format!("unknown activation `{s}`"))),
    }
}

fn parse_activation(c: &ModelContainer) -> Result<Activation> {
    let s = c.get("activation")?;
    Activation::parse(s).ok_or_else(|| Error::Format(format!("unknown activation `{s}`")))
}

fn parse_ordering(c: &ModelContainer, dim: usize) -> Result<Ordering> {
    let perm: Vec<usize> = c.parse_list("ordering")?;
    ensure_len("stored ordering", dim, perm.len())?;
    Ordering::new(perm).map_err(|e| Error::Format(format!("stored ordering: {e}")))
}

fn train_with_sgd<M: Trainable>(
    init: M,
    data: &Dataset,
    cfg: &TrainConfig,
    wrap: impl FnOnce(M) -> Box<dyn DensityModel>,
) -> Result<Trained> {
    let TrainOutcome { model, history, .. } = train_sgd(init, &data.train, valid_split(data), cfg)?;
    Ok(Trained {
        valid_score: history.best_valid().map(|(_, s)| s),
        model: wrap(model),
        history: Some(history),
    })
}

// ---------------------------------------------------------------- NADE

pub struct NadeFactory;

impl DensityModel for NadeModel {
    fn kind(&self) -> &'static str {
        "nade"
    }
    fn dim(&self) -> usize {
        self.params.dim()
    }
    fn data_kind(&self) -> DataKind {
        DataKind::Binary
    }
    fn log_prob(&self, x: &[f64]) -> Result<f64> {
        self.params.log_density(&self.ordering, x)
    }
    fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
        (0..n).map(|_| Ok(self.params.sample(&self.ordering, rng)?.0)).collect()
    }
    fn to_container(&self) -> ModelContainer {
        let mut c = ModelContainer::new("nade");
        c.set("dim", self.params.dim())
            .set("hidden", self.params.hidden())
            .set("activation", self.params.activation.name())
            .set("ordering", join(self.ordering.as_slice()));
        put_blocks(&mut c, &self.params);
        c
    }
}

impl ModelFactory for NadeFactory {
    fn name(&self) -> &'static str {
        "nade"
    }
    fn hyper_keys(&self) -> &'static [&'static str] {
        &["hidden", "activation", "ordering_seed"]
    }
    fn train(&self, data: &Dataset, cfg: &TrainConfig) -> Result<Trained> {
        require_kind(data, DataKind::Binary, "nade")?;
        let h = cfg.hyper_or("hidden", 500usize)?;
        let act = activation(cfg, Activation::Sigmoid)?;
        let ordering = Ordering::from_seed(data.dim, cfg.hyper_or("ordering_seed", cfg.seed)?);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let init = NadeModel {
            params: NadeParams::init(data.dim, h, act, &mut rng),
            ordering,
        };
        train_with_sgd(init, data, cfg, |m| Box::new(m))
    }
    fn decode(&self, c: &ModelContainer) -> Result<Box<dyn DensityModel>> {
        let d: usize = c.parse("dim")?;
        let h: usize = c.parse("hidden")?;
        let mut params = NadeParams::zeros(d, h).with_activation(parse_activation(c)?);
        get_blocks(c, &mut params)?;
        Ok(Box::new(NadeModel {
            params,
            ordering: parse_ordering(c, d)?,
        }))
    }
}

// ---------------------------------------------------------------- RNADE

pub struct RnadeFactory;

impl DensityModel for RnadeModel {
    fn kind(&self) -> &'static str {
        "rnade"
    }
    fn dim(&self) -> usize {
        self.params.dim()
    }
    fn data_kind(&self) -> DataKind {
        if self.params.family.is_binary() {
            DataKind::Binary
        } else {
            DataKind::Real
        }
    }
    fn log_prob(&self, x: &[f64]) -> Result<f64> {
        self.params.log_density(&self.ordering, x)
    }
    fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
        (0..n).map(|_| self.params.sample(&self.ordering, rng)).collect()
    }
    fn to_container(&self) -> ModelContainer {
        let mut c = ModelContainer::new("rnade");
        c.set("dim", self.params.dim())
            .set("hidden", self.params.hidden())
            .set("activation", self.params.activation.name())
            .set("family", self.params.family)
            .set("scale_mean_grad", self.scale_mean_grad)
            .set("ordering", join(self.ordering.as_slice()));
        put_blocks(&mut c, &self.params);
        c
    }
}

impl ModelFactory for RnadeFactory {
    fn name(&self) -> &'static str {
        "rnade"
    }
    fn hyper_keys(&self) -> &'static [&'static str] {
        &["hidden", "activation", "family", "ordering", "ordering_seed"]
    }
    fn train(&self, data: &Dataset, cfg: &TrainConfig) -> Result<Trained> {
        let h = cfg.hyper_or("hidden", 50usize)?;
        let family: ConditionalFamily = cfg.hyper_str("family").unwrap_or("mog:5").parse()?;
        require_kind(data, if family.is_binary() { DataKind::Binary } else { DataKind::Real }, "rnade")?;
        let act = activation(cfg, Activation::Relu)?;
        let ordering = match cfg.hyper_str("ordering").unwrap_or("identity") {
            "identity" => Ordering::identity(data.dim),
            "random" => Ordering::from_seed(data.dim, cfg.hyper_or("ordering_seed", cfg.seed)?),
            other => return Err(Error::Config(format!("unknown ordering `{other}` (identity or random)"))),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let init = RnadeModel {
            params: RnadeParams::init(data.dim, h, family, act, &mut rng),
            ordering,
            scale_mean_grad: cfg.scale_mean_grad.unwrap_or(family.is_mixture()),
        };
        train_with_sgd(init, data, cfg, |m| Box::new(m))
    }
    fn decode(&self, c: &ModelContainer) -> Result<Box<dyn DensityModel>> {
        let d: usize = c.parse("dim")?;
        let h: usize = c.parse("hidden")?;
        let family: ConditionalFamily = c
            .get("family")?
            .parse()
            .map_err(|_| Error::Format("invalid conditional family".into()))?;
        let mut params = RnadeParams::zeros(d, h, family).with_activation(parse_activation(c)?);
        get_blocks(c, &mut params)?;
        Ok(Box::new(RnadeModel {
            params,
            ordering: parse_ordering(c, d)?,
            scale_mean_grad: c.parse("scale_mean_grad")?,
        }))
    }
}

// ---------------------------------------------------------------- DeepNADE

/// Order-agnostic network plus the seed its evaluation orderings derive from.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepNadeModel {
    pub stack: LayerStack,
    pub ordering_seed: u64,
}

impl DeepNadeModel {
    /// The first `k` evaluation orderings; `k = 1` gives the single-ordering model.
    pub fn orderings(&self, k: usize) -> Vec<Ordering> {
        (0..k as u64)
            .map(|i| Ordering::from_seed(self.stack.dim, self.ordering_seed.wrapping_add(i)))
            .collect()
    }
}

pub struct DeepNadeFactory;

impl DensityModel for DeepNadeModel {
    fn kind(&self) -> &'static str {
        "deepnade"
    }
    fn dim(&self) -> usize {
        self.stack.dim
    }
    fn data_kind(&self) -> DataKind {
        DataKind::Binary
    }
    fn log_prob(&self, x: &[f64]) -> Result<f64> {
        deepnade::logprob_ordering(&self.stack, x, &self.orderings(1)[0])
    }
    fn log_prob_ensemble(&self, x: &[f64], k: usize) -> Result<f64> {
        deepnade::ensemble_logprob(&self.stack, x, &self.orderings(k))
    }
    fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
        let o = self.orderings(1).remove(0);
        (0..n).map(|_| deepnade::sample(&self.stack, &o, rng)).collect()
    }
    fn impute(&self, x: &[f64], observed: &[bool], n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
        deepnade::impute(&self.stack, x, &Mask::new(observed.to_vec()), rng, n)
    }
    fn to_container(&self) -> ModelContainer {
        let mut c = ModelContainer::new("deepnade");
        let act = self
            .stack
            .layers
            .first()
            .filter(|_| self.stack.hidden_layers() > 0)
            .map_or(Activation::Relu, |l| l.activation);
        c.set("dim", self.stack.dim)
            .set("hidden", join(&self.stack.hidden_widths()))
            .set("activation", act.name())
            .set("mask_concat", self.stack.mask_concat)
            .set("ordering_seed", self.ordering_seed);
        put_blocks(&mut c, &self.stack);
        c
    }
}

impl ModelFactory for DeepNadeFactory {
    fn name(&self) -> &'static str {
        "deepnade"
    }
    fn hyper_keys(&self) -> &'static [&'static str] {
        &["hidden", "activation", "mask_concat", "pretrain", "ordering_seed"]
    }
    fn train(&self, data: &Dataset, cfg: &TrainConfig) -> Result<Trained> {
        require_kind(data, DataKind::Binary, "deepnade")?;
        let hidden = cfg.hyper_list_or("hidden", &[500])?;
        let act = activation(cfg, Activation::Relu)?;
        let concat = cfg.hyper_bool_or("mask_concat", true)?;
        let init = if cfg.hyper_bool_or("pretrain", false)? && hidden.len() > 1 {
            pretrain(hidden.len(), &hidden, act, concat, &data.train, cfg)?
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            LayerStack::init(data.dim, &hidden, act, concat, &mut rng)
        };
        let ordering_seed = cfg.hyper_or("ordering_seed", cfg.seed)?;
        train_with_sgd(init, data, cfg, |stack| Box::new(DeepNadeModel { stack, ordering_seed }))
    }
    fn decode(&self, c: &ModelContainer) -> Result<Box<dyn DensityModel>> {
        let d: usize = c.parse("dim")?;
        let hidden: Vec<usize> = c.parse_list("hidden")?;
        let mut stack = LayerStack::zeros(d, &hidden, parse_activation(c)?, c.parse("mask_concat")?);
        get_blocks(c, &mut stack)?;
        Ok(Box::new(DeepNadeModel {
            stack,
            ordering_seed: c.parse("ordering_seed")?,
        }))
    }
}

// ---------------------------------------------------------------- MoB

pub struct MobFactory;

impl DensityModel for MobParams {
    fn kind(&self) -> &'static str {
        "mob"
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn data_kind(&self) -> DataKind {
        DataKind::Binary
    }
    fn log_prob(&self, x: &[f64]) -> Result<f64> {
        MobParams::log_prob(self, x)
    }
    fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
        Ok((0..n).map(|_| MobParams::sample(self, rng)).collect())
    }
    fn to_container(&self) -> ModelContainer {
        let mut c = ModelContainer::new("mob");
        c.set("dim", self.dim).set("components", self.components());
        put_blocks(&mut c, self);
        c
    }
}

impl ModelFactory for MobFactory {
    fn name(&self) -> &'static str {
        "mob"
    }
    fn hyper_keys(&self) -> &'static [&'static str] {
        &["components"]
    }
    /// `epochs` bounds the EM iterations; `patience` stops on validation.
    fn train(&self, data: &Dataset, cfg: &TrainConfig) -> Result<Trained> {
        require_kind(data, DataKind::Binary, "mob")?;
        let k = cfg.hyper_or("components", 32usize)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let fit = mob_fit_em(&data.train, k, cfg.epochs, valid_split(data), cfg.patience, &mut rng)?;
        Ok(Trained {
            valid_score: fit.valid_ll.get(fit.best_iter).copied(),
            model: Box::new(fit.params),
            history: None,
        })
    }
    fn decode(&self, c: &ModelContainer) -> Result<Box<dyn DensityModel>> {
        let d: usize = c.parse("dim")?;
        let k: usize = c.parse("components")?;
        let mut p = MobParams {
            weights: vec![0.0; k],
            means: vec![0.0; k * d],
            dim: d,
        };
        get_blocks(c, &mut p)?;
        p.check_shapes()?;
        Ok(Box::new(p))
    }
}

// ---------------------------------------------------------------- Chow–Liu

pub struct ChowLiuFactory;

/// Smoothing grid used when no `alpha` is configured.
const ALPHA_GRID: [f64; 4] = [1e-20, 0.001, 0.01, 0.1];

impl DensityModel for ChowLiuTree {
    fn kind(&self) -> &'static str {
        "chowliu"
    }
    fn dim(&self) -> usize {
        ChowLiuTree::dim(self)
    }
    fn data_kind(&self) -> DataKind {
        DataKind::Binary
    }
    fn log_prob(&self, x: &[f64]) -> Result<f64> {
        chowliu_logprob(self, x)
    }
    fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
        Ok((0..n).map(|_| chowliu_sample(self, rng)).collect())
    }
    fn to_container(&self) -> ModelContainer {
        let mut c = ModelContainer::new("chowliu");
        let parents: Vec<String> = self
            .parent
            .iter()
            .map(|p| p.map_or("-".to_string(), |p| p.to_string()))
            .collect();
        c.set("dim", ChowLiuTree::dim(self))
            .set("root", self.root)
            .set("alpha", self.alpha)
            .set("parent", parents.join(","));
        c.push_block("root_p", vec![self.root_p]);
        c.push_block("cpt", self.cpt.iter().flat_map(|r| r.iter().copied()).collect());
        c
    }
}

impl ModelFactory for ChowLiuFactory {
    fn name(&self) -> &'static str {
        "chowliu"
    }
    fn hyper_keys(&self) -> &'static [&'static str] {
        &["alpha"]
    }
    /// `alpha` may list several values; the best on validation is kept.
    fn train(&self, data: &Dataset, cfg: &TrainConfig) -> Result<Trained> {
        require_kind(data, DataKind::Binary, "chowliu")?;
        let alphas: Vec<f64> = match cfg.hyper_str("alpha") {
            Some(s) => s
                .split(',')
                .map(|t| t.trim().parse().map_err(|_| Error::Config(format!("invalid alpha `{t}`"))))
                .collect::<Result<_>>()?,
            None => ALPHA_GRID.to_vec(),
        };
        let valid = valid_split(data);
        let mut best: Option<(ChowLiuTree, Option<f64>)> = None;
        for &a in &alphas {
            let tree = chowliu_fit(&data.train, a)?;
            let score = match valid {
                Some(v) => Some(
                    v.iter().map(|x| chowliu_logprob(&tree, x)).sum::<Result<f64>>()? / v.len() as f64,
                ),
                None => None,
            };
            let better = match (&best, score) {
                (None, _) => true,
                (Some((_, Some(b))), Some(s)) => s > *b,
                _ => false,
            };
            if better {
                best = Some((tree, score));
            }
        }
        let (tree, valid_score) = best.ok_or_else(|| Error::Config("empty alpha list".into()))?;
        Ok(Trained {
            model: Box::new(tree),
            history: None,
            valid_score,
        })
    }
    fn decode(&self, c: &ModelContainer) -> Result<Box<dyn DensityModel>> {
        let d: usize = c.parse("dim")?;
        let parent: Vec<Option<usize>> = c
            .get("parent")?
            .split(',')
            .map(|t| match t {
                "-" => Ok(None),
                v => v
                    .parse()
                    .map(Some)
                    .map_err(|_| Error::Format(format!("invalid parent `{v}`"))),
            })
            .collect::<Result<_>>()?;
        ensure_len("parent vector", d, parent.len())?;
        let cpt = c.block_len("cpt", 2 * d)?;
        let root: usize = c.parse("root")?;
        if parent.get(root) != Some(&None) || parent.iter().flatten().any(|&p| p >= d) {
            return Err(Error::Format("invalid tree structure".into()));
        }
        Ok(Box::new(ChowLiuTree {
            root,
            parent,
            cpt: cpt.chunks_exact(2).map(|r| [r[0], r[1]]).collect(),
            root_p: c.block_len("root_p", 1)?[0],
            alpha: c.parse("alpha")?,
        }))
    }
}

// ---------------------------------------------------------------- FVSBN

pub struct FvsbnFactory;

impl DensityModel for FvsbnParams {
    fn kind(&self) -> &'static str {
        "fvsbn"
    }
    fn dim(&self) -> usize {
        FvsbnParams::dim(self)
    }
    fn data_kind(&self) -> DataKind {
        DataKind::Binary
    }
    fn log_prob(&self, x: &[f64]) -> Result<f64> {
        FvsbnParams::log_prob(self, x)
    }
    fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
        Ok((0..n).map(|_| FvsbnParams::sample(self, rng)).collect())
    }
    fn to_container(&self) -> ModelContainer {
        let mut c = ModelContainer::new("fvsbn");
        c.set("dim", FvsbnParams::dim(self))
            .set("ordering", join(self.ordering.as_slice()));
        put_blocks(&mut c, self);
        c
    }
}

impl ModelFactory for FvsbnFactory {
    fn name(&self) -> &'static str {
        "fvsbn"
    }
    fn hyper_keys(&self) -> &'static [&'static str] {
        &["ordering_seed"]
    }
    fn train(&self, data: &Dataset, cfg: &TrainConfig) -> Result<Trained> {
        require_kind(data, DataKind::Binary, "fvsbn")?;
        let ordering = Ordering::from_seed(data.dim, cfg.hyper_or("ordering_seed", cfg.seed)?);
        train_with_sgd(FvsbnParams::zeros(ordering), data, cfg, |m| Box::new(m))
    }
    fn decode(&self, c: &ModelContainer) -> Result<Box<dyn DensityModel>> {
        let d: usize = c.parse("dim")?;
        let mut p = FvsbnParams::zeros(parse_ordering(c, d)?);
        get_blocks(c, &mut p)?;
        Ok(Box::new(p))
    }
}

// ---------------------------------------------------------------- Gaussian

pub struct GaussianFactory;

impl DensityModel for FullGaussian {
    fn kind(&self) -> &'static str {
        "gaussian"
    }
    fn dim(&self) -> usize {
        FullGaussian::dim(self)
    }
    fn data_kind(&self) -> DataKind {
        DataKind::Real
    }
    fn log_prob(&self, x: &[f64]) -> Result<f64> {
        FullGaussian::log_prob(self, x)
    }
    fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
        Ok((0..n).map(|_| FullGaussian::sample(self, rng)).collect())
    }
    fn to_container(&self) -> ModelContainer {
        let mut c = ModelContainer::new("gaussian");
        c.set("dim", FullGaussian::dim(self));
        c.push_block("mean", self.mean.iter().copied().collect());
        c.push_block("cov", self.cov.iter().copied().collect());
        c
    }
}

impl ModelFactory for GaussianFactory {
    fn name(&self) -> &'static str {
        "gaussian"
    }
    fn hyper_keys(&self) -> &'static [&'static str] {
        &[]
    }
    fn train(&self, data: &Dataset, _cfg: &TrainConfig) -> Result<Trained> {
        let g = gaussian_fit_mle(&data.train)?;
        let valid_score = match valid_split(data) {
            Some(v) => Some(v.iter().map(|x| g.log_prob(x)).sum::<Result<f64>>()? / v.len() as f64),
            None => None,
        };
        Ok(Trained {
            model: Box::new(g),
            history: None,
            valid_score,
        })
    }
    fn decode(&self, c: &ModelContainer) -> Result<Box<dyn DensityModel>> {
        let d: usize = c.parse("dim")?;
        let mean = nalgebra::DVector::from_vec(c.block_len("mean", d)?);
        let cov = nalgebra::DMatrix::from_vec(d, d, c.block_len("cov", d * d)?);
        Ok(Box::new(FullGaussian::new(mean, cov).map_err(|e| Error::Format(e.to_string()))?))
    }
}

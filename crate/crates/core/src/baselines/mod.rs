//! Classical tractable estimators used as comparison points.

mod chowliu;
mod fvsbn;
mod gaussian;
mod mob;

pub use chowliu::{
    chowliu_fit, chowliu_fit_rooted, chowliu_logprob, chowliu_sample, fit_structure, mutual_information,
    ChowLiuTree,
};
pub use fvsbn::FvsbnParams;
pub use gaussian::{gaussian_fit_mle, gaussian_logprob, FullGaussian, GAUSSIAN_JITTER};
pub use mob::{mob_fit_em, MobFit, MobParams, MOB_EPS};

//! Fixed-order single-hidden-layer NADE for binary vectors.

mod mean_field;
mod model;

pub use mean_field::{mean_field_fixed_point, mean_field_step, MeanFieldState, RbmParams};
pub(crate) use model::check_binary;
pub use model::{ForwardTrace, NadeGrad, NadeParams, TOTAL_MASS_MAX_DIM};

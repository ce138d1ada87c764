//! Real-valued NADE: the tied autoregressive hidden layer with parametric
//! one-dimensional conditionals whose parameters are network outputs.

mod family;
mod model;

pub use family::{
    component_log_terms, conditional_params, head_outputs, log_density_1d, output_gradients,
    params_from_outputs, sample_1d, ConditionalFamily, DimHeads, HeadOutputs, Kernel,
    MixtureParams1D, FIXED_SIGMA, SIGMA_FLOOR,
};
pub use model::{RnadeParams, RnadeTrace};

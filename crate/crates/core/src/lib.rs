//! Tractable autoregressive density estimation.
//!
//! The crate provides exact log-likelihoods, analytic gradients, ancestral
//! sampling and imputation for:
//!
//! - [`nade`]: fixed-order NADE over binary vectors (with the RBM mean-field view),
//! - [`rnade`]: real-valued NADE with Gaussian/Laplace/mixture conditionals,
//! - [`deepnade`]: order-agnostic deep NADE with mask-concatenated inputs and ordering ensembles,
//! - [`baselines`]: mixture of Bernoullis, Chow–Liu trees, FVSBN and a full-covariance Gaussian.
//!
//! Every estimator is reachable by name through [`registry::Registry`], which is
//! what the `nade` command-line tool uses.

pub mod baselines;
pub mod container;
pub mod data;
pub mod deepnade;
pub mod error;
pub mod eval;
pub mod math;
pub mod nade;
pub mod ordering;
pub mod params;
pub mod registry;
pub mod rnade;
pub mod training;

pub use error::{Error, Result};
pub use ordering::Ordering;

//! SGD training shared by every gradient-based estimator: schedules,
//! momentum, input-side weight decay, early stopping and grid sweeps.

mod config;
mod grid;
mod models;
mod schedule;
mod sgd;
mod trainer;

pub use config::{ScheduleKind, TrainConfig};
pub use grid::{expand_grid, parse_axis, select_best};
pub(crate) use models::mean_over;
pub use models::{NadeModel, RnadeModel};
pub use schedule::{lr_at, Schedule};
pub use sgd::{sgd_step, Sgd};
pub use trainer::{
    minibatch_gradient, train_sgd, train_sgd_until, EarlyStopState, EpochRecord, History, StopReason,
    TrainOutcome, Trainable,
};

//! Dataset loading and the preprocessing pipelines for image patches and UCI tables.

mod dataset;
mod patches;
mod uci;

pub use dataset::{load_dataset, load_rows, parse_rows, validate_rows, DataKind, Dataset};
pub use patches::{parse_pgm, patch_pipeline, process_patch, read_pgm, tile_grid, write_pgm, GrayImage};
pub use uci::{is_discrete, load_raw_table, pearson, select_columns, standardize, uci_preprocess, UciOptions};

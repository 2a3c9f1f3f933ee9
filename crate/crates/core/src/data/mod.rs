//! RSS fingerprint ingestion, splitting, standardization and per-class views.

mod dataset;
pub mod fetch;
mod sampling;
mod standardize;

pub use dataset::{load_dataset, parse_dataset, render_samples, Dataset, RssSample};
pub use fetch::{fetch_dataset, sha256_file, FetchOutcome, DATASET_FILE_NAME, DEFAULT_DATASET_URL};
pub use sampling::{
    class_matrix, one_hot, per_class_quota, stratified_split, subsample_fraction,
    write_split_manifest, ClassMatrix,
};
pub use standardize::Standardizer;

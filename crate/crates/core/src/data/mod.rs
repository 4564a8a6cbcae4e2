//! Datasets, synthetic generation, CSV interchange and label gating.

mod blobs;
mod csv_io;
mod dataset;
mod matrix;

pub use blobs::{gen_blobs, BlobParams};
pub use csv_io::{
    load_dataset, metadata_path, parse_csv, parse_metadata, save_csv, save_dataset,
    DatasetMetadata,
};
pub use dataset::{Dataset, LabelAccess, Normalization, OracleToken, Provenance, Split};
pub use matrix::Matrix;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("labels are not contiguous from 0: missing class {missing} (max label {max})")]
    NonContiguousLabels { missing: usize, max: usize },
    #[error("label of sample {0} is gated behind oracle access")]
    GatedLabel(usize),
    #[error("sample index {index} out of range for {len} samples")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid metadata: {0}")]
    Metadata(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

//! Fixed-length clip embeddings: the internal log-Mel path, ingestion of
//! externally computed vectors, and feature standardization.

mod dataset;
mod format;
mod logmel;
mod mel;
mod pool;
mod standardize;

pub use dataset::{ClassLabel, Embedding, EmbeddingDataset, EmbeddingSource};
pub use format::{
    decode_embeddings, encode_embeddings, read_embeddings, read_embeddings_csv, write_embeddings,
    write_embeddings_csv, AEMB_MAGIC, AEMB_VERSION,
};
pub use logmel::{log_mel_embedding, LogMelConfig, LogMelExtractor, ENERGY_FLOOR};
pub use mel::{hz_to_mel, mel_filterbank, mel_to_hz, MelFilter, MelFilterbank};
pub use pool::adaptive_avg_pool;
pub use standardize::{fit_standardizer, Standardizer, SCALE_FLOOR};

use thiserror::Error;

use crate::audio::AudioError;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("invalid mel range: {0}")]
    InvalidRange(String),
    #[error("mel filter {0} covers no FFT bin; use fewer mel bins or a larger FFT")]
    EmptyFilter(usize),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error("dataset needs at least {needed} rows, got {got}")]
    EmptyDataset { needed: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("malformed embedding file: {0}")]
    MalformedFile(String),
    #[error("unsupported embedding file version {0}")]
    VersionMismatch(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, EmbeddingError>;

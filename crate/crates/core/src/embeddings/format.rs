//! `AEMB` binary embedding files and a CSV interchange form.
//!
//! Binary layout, all little-endian:
//!
//! ```text
//! magic   "AEMB"           4 bytes
//! version u32 = 1
//! rows    u32 N
//! dim     u32 D
//! N records of: label u8 (0 real, 1 fake), D x f32
//! ```
//!
//! Values are narrowed to `f32` on write; a dataset read from a file
//! round-trips bit-exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use super::{ClassLabel, EmbeddingDataset, EmbeddingError, EmbeddingSource, Result};

pub const AEMB_MAGIC: [u8; 4] = *b"AEMB";
pub const AEMB_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

pub fn encode_embeddings(dataset: &EmbeddingDataset) -> Result<Vec<u8>> {
    let n = u32::try_from(dataset.len())
        .map_err(|_| EmbeddingError::InvalidDataset("too many rows".into()))?;
    let d = u32::try_from(dataset.dim())
        .map_err(|_| EmbeddingError::InvalidDataset("dimension too large".into()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + dataset.len() * (1 + 4 * dataset.dim()));
    out.extend_from_slice(&AEMB_MAGIC);
    out.extend_from_slice(&AEMB_VERSION.to_le_bytes());
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&d.to_le_bytes());
    for (row, label) in dataset.matrix().rows().into_iter().zip(dataset.labels()) {
        out.push(label.as_u8());
        for &v in row {
            let narrow = v as f32;
            if !narrow.is_finite() {
                return Err(EmbeddingError::InvalidDataset(format!(
                    "value {v} does not fit in f32"
                )));
            }
            out.extend_from_slice(&narrow.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_embeddings(bytes: &[u8]) -> Result<EmbeddingDataset> {
    if bytes.len() < HEADER_LEN {
        return Err(EmbeddingError::MalformedFile("header truncated".into()));
    }
    if bytes[..4] != AEMB_MAGIC {
        return Err(EmbeddingError::MalformedFile("bad magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    let version = word(4);
    if version != AEMB_VERSION {
        return Err(EmbeddingError::VersionMismatch(version));
    }
    let n = word(8) as usize;
    let d = word(12) as usize;
    if d == 0 {
        return Err(EmbeddingError::MalformedFile("zero dimension".into()));
    }
    let record = 1 + 4 * d;
    let expected = n
        .checked_mul(record)
        .and_then(|p| p.checked_add(HEADER_LEN))
        .ok_or_else(|| EmbeddingError::MalformedFile("size overflow".into()))?;
    if bytes.len() != expected {
        return Err(EmbeddingError::MalformedFile(format!(
            "expected {expected} bytes for {n} x {d}, found {}",
            bytes.len()
        )));
    }
    let mut matrix = Array2::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    for (i, rec) in bytes[HEADER_LEN..].chunks_exact(record).enumerate() {
        let label = ClassLabel::from_u8(rec[0])
            .ok_or_else(|| EmbeddingError::MalformedFile(format!("row {i}: label byte {}", rec[0])))?;
        labels.push(label);
        for (j, chunk) in rec[1..].chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
            if !v.is_finite() {
                return Err(EmbeddingError::MalformedFile(format!(
                    "row {i}, column {j}: non-finite value"
                )));
            }
            matrix[[i, j]] = f64::from(v);
        }
    }
    EmbeddingDataset::new(matrix, labels, EmbeddingSource::External)
}

pub fn write_embeddings(dataset: &EmbeddingDataset, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_embeddings(dataset)?;
    let mut file = fs::File::create(path)?;
    file.write_all(&bytes)?;
    file.sync_all()?;
    Ok(())
}

/// Reads an `AEMB` file. The source tag is not stored, so the result is
/// always tagged [`EmbeddingSource::External`].
pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingDataset> {
    decode_embeddings(&fs::read(path)?)
}

/// Imports `label,f0,f1,...` CSV rows (header required, label 0 or 1).
pub fn read_embeddings_csv(path: impl AsRef<Path>) -> Result<EmbeddingDataset> {
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers()?.clone();
    if header.get(0) != Some("label") || header.len() < 2 {
        return Err(EmbeddingError::MalformedFile(
            "CSV header must be `label,f0,f1,...`".into(),
        ));
    }
    let d = header.len() - 1;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != d + 1 {
            return Err(EmbeddingError::DimMismatch {
                expected: d,
                got: record.len().saturating_sub(1),
            });
        }
        let label = match record[0].trim() {
            "0" => ClassLabel::Real,
            "1" => ClassLabel::Fake,
            other => {
                return Err(EmbeddingError::MalformedFile(format!(
                    "row {i}: label `{other}`"
                )))
            }
        };
        labels.push(label);
        for field in record.iter().skip(1) {
            let v: f64 = field.trim().parse().map_err(|_| {
                EmbeddingError::MalformedFile(format!("row {i}: value `{field}`"))
            })?;
            values.push(v);
        }
    }
    let matrix = Array2::from_shape_vec((labels.len(), d), values).expect("row widths checked");
    EmbeddingDataset::new(matrix, labels, EmbeddingSource::External)
        .map_err(|e| EmbeddingError::MalformedFile(e.to_string()))
}

pub fn write_embeddings_csv(dataset: &EmbeddingDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["label".to_string()];
    header.extend((0..dataset.dim()).map(|j| format!("f{j}")));
    writer.write_record(&header)?;
    for (row, label) in dataset.matrix().rows().into_iter().zip(dataset.labels()) {
        let mut record = vec![label.as_u8().to_string()];
        record.extend(row.iter().map(|v| v.to_string()));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

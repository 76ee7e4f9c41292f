use std::fmt;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::{EmbeddingError, Result};

/// Binary class tag; 0 = real, 1 = fake.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ClassLabel {
    Real,
    Fake,
}

impl ClassLabel {
    pub fn as_u8(self) -> u8 {
        match self {
            ClassLabel::Real => 0,
            ClassLabel::Fake => 1,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(ClassLabel::Real),
            1 => Some(ClassLabel::Fake),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        usize::from(self.as_u8())
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassLabel::Real => "real",
            ClassLabel::Fake => "fake",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingSource {
    LogMel,
    #[default]
    External,
}

impl fmt::Display for EmbeddingSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbeddingSource::LogMel => "log_mel",
            EmbeddingSource::External => "external",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub values: Vec<f64>,
    pub source: EmbeddingSource,
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// `N x D` feature matrix with one class label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingDataset {
    matrix: Array2<f64>,
    labels: Vec<ClassLabel>,
    source: EmbeddingSource,
}

impl EmbeddingDataset {
    pub fn new(matrix: Array2<f64>, labels: Vec<ClassLabel>, source: EmbeddingSource) -> Result<Self> {
        if matrix.nrows() != labels.len() {
            return Err(EmbeddingError::InvalidDataset(format!(
                "{} rows but {} labels",
                matrix.nrows(),
                labels.len()
            )));
        }
        if matrix.ncols() == 0 {
            return Err(EmbeddingError::InvalidDataset("zero feature dimension".into()));
        }
        if let Some(((r, c), _)) = matrix.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(EmbeddingError::InvalidDataset(format!(
                "non-finite value at row {r}, column {c}"
            )));
        }
        Ok(Self {
            matrix,
            labels,
            source,
        })
    }

    /// Stacks embeddings of equal dimension into a dataset with a single label.
    pub fn from_embeddings(embeddings: &[Embedding], label: ClassLabel) -> Result<Self> {
        let first = embeddings
            .first()
            .ok_or(EmbeddingError::EmptyDataset { needed: 1, got: 0 })?;
        let dim = first.dim();
        let mut matrix = Array2::zeros((embeddings.len(), dim));
        for (mut row, e) in matrix.rows_mut().into_iter().zip(embeddings) {
            if e.dim() != dim {
                return Err(EmbeddingError::DimMismatch {
                    expected: dim,
                    got: e.dim(),
                });
            }
            row.assign(&Array1::from(e.values.clone()));
        }
        Self::new(matrix, vec![label; embeddings.len()], first.source)
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn labels(&self) -> &[ClassLabel] {
        &self.labels
    }

    pub fn source(&self) -> EmbeddingSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    /// Row counts indexed by [`ClassLabel::index`].
    pub fn class_counts(&self) -> [usize; 2] {
        let mut counts = [0, 0];
        for l in &self.labels {
            counts[l.index()] += 1;
        }
        counts
    }

    pub fn has_both_classes(&self) -> bool {
        let [r, f] = self.class_counts();
        r > 0 && f > 0
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            matrix: self.matrix.select(Axis(0), rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            source: self.source,
        }
    }

    pub fn relabeled(mut self, label: ClassLabel) -> Self {
        self.labels.iter_mut().for_each(|l| *l = label);
        self
    }

    /// Appends the rows of `other`.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(EmbeddingError::DimMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        let matrix = ndarray::concatenate(Axis(0), &[self.matrix.view(), other.matrix.view()])
            .expect("column counts match");
        let labels = self.labels.iter().chain(&other.labels).copied().collect();
        Ok(Self {
            matrix,
            labels,
            source: self.source,
        })
    }

    pub(crate) fn with_matrix(&self, matrix: Array2<f64>) -> Self {
        debug_assert_eq!(matrix.nrows(), self.labels.len());
        Self {
            matrix,
            labels: self.labels.clone(),
            source: self.source,
        }
    }
}

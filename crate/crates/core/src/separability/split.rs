use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Result, SeparabilityError};
use crate::embeddings::{ClassLabel, EmbeddingDataset};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(SeparabilityError::InvalidFraction(train_fraction));
        }
        Ok(Self {
            train_fraction,
            seed,
        })
    }

    /// Training rows per class, indexed by [`ClassLabel::index`].
    ///
    /// The total is `round(f * N)`; the fake class gets `floor(f * N_fake)`
    /// and the real class takes the remainder. Both are then clamped so each
    /// class keeps at least one row on each side of the split.
    pub fn train_counts(&self, class_counts: [usize; 2]) -> [usize; 2] {
        let f = self.train_fraction;
        let [n_real, n_fake] = class_counts;
        let total = (f * (n_real + n_fake) as f64).round() as usize;
        let fake = ((f * n_fake as f64 + 1e-9).floor() as usize).clamp(1, n_fake - 1);
        let real = total.saturating_sub(fake).clamp(1, n_real - 1);
        [real, fake]
    }
}

/// Stratified shuffled split, deterministic in `spec.seed`.
pub fn split_dataset(dataset: &EmbeddingDataset, spec: &SplitSpec) -> Result<(EmbeddingDataset, EmbeddingDataset)> {
    SplitSpec::new(spec.train_fraction, spec.seed)?;
    let counts = dataset.class_counts();
    if counts.contains(&0) {
        return Err(SeparabilityError::SingleClass);
    }
    if dataset.len() < 5 || counts.iter().any(|&c| c < 2) {
        return Err(SeparabilityError::TooSmall { rows: dataset.len() });
    }
    let take = spec.train_counts(counts);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [ClassLabel::Real, ClassLabel::Fake] {
        let mut rows: Vec<usize> = dataset
            .labels()
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect();
        rows.shuffle(&mut rng);
        let (tr, te) = rows.split_at(take[class.index()]);
        train.extend_from_slice(tr);
        test.extend_from_slice(te);
    }
    train.shuffle(&mut rng);
    test.shuffle(&mut rng);
    Ok((dataset.select(&train), dataset.select(&test)))
}

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::linalg::cholesky_solve;
use super::{Result, SeparabilityError};
use crate::embeddings::{ClassLabel, EmbeddingDataset};

/// Default ridge weight, applied as `λ · trace(S_w) / D` on the diagonal.
pub const DEFAULT_SHRINKAGE: f64 = 1e-3;

/// Two-class linear discriminant. Scores are `wᵀx`; class 1 (fake) is
/// predicted when the score exceeds `threshold`, ties go to class 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub w: Array1<f64>,
    pub threshold: f64,
    pub mu0: Array1<f64>,
    pub mu1: Array1<f64>,
    pub shrinkage: f64,
    pub n0: usize,
    pub n1: usize,
    /// Set when the class means coincide: `w` is zero and every input is
    /// assigned the majority class.
    pub fallback: Option<ClassLabel>,
}

fn class_rows(x: ArrayView2<'_, f64>, labels: &[ClassLabel], class: ClassLabel) -> Array2<f64> {
    let rows: Vec<usize> = labels
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == class)
        .map(|(i, _)| i)
        .collect();
    x.select(Axis(0), &rows)
}

/// Fits a shrinkage LDA on (already standardized) training data.
///
/// The pooled within-class covariance
/// `S_w = [(n0-1) S0 + (n1-1) S1] / (n0 + n1 - 2)` is regularized to
/// `S_w + λ (trace(S_w)/D) I` and `w` solves `S_reg w = mu1 - mu0` by
/// Cholesky. The threshold is `wᵀ(mu0 + mu1)/2 + ln(n0/n1)`.
pub fn lda_fit(train: &EmbeddingDataset, shrinkage: f64) -> Result<LdaModel> {
    if !(shrinkage >= 0.0 && shrinkage.is_finite()) {
        return Err(SeparabilityError::InvalidShrinkage(shrinkage));
    }
    let x = train.matrix().view();
    let x0 = class_rows(x, train.labels(), ClassLabel::Real);
    let x1 = class_rows(x, train.labels(), ClassLabel::Fake);
    let (n0, n1) = (x0.nrows(), x1.nrows());
    for (class, rows) in [(ClassLabel::Real, n0), (ClassLabel::Fake, n1)] {
        if rows < 2 {
            return Err(SeparabilityError::ClassTooSmall { class, rows });
        }
    }
    let mu0 = x0.mean_axis(Axis(0)).expect("rows present");
    let mu1 = x1.mean_axis(Axis(0)).expect("rows present");
    let delta = &mu1 - &mu0;
    let dim = train.dim();

    let mean_norm = mu0.dot(&mu0).max(mu1.dot(&mu1)).sqrt();
    if delta.dot(&delta).sqrt() <= 1e-12 * (1.0 + mean_norm) {
        let majority = if n1 > n0 { ClassLabel::Fake } else { ClassLabel::Real };
        log::warn!("class means coincide; falling back to constant {majority} predictor");
        return Ok(LdaModel {
            w: Array1::zeros(dim),
            threshold: 0.0,
            mu0,
            mu1,
            shrinkage,
            n0,
            n1,
            fallback: Some(majority),
        });
    }

    let c0 = &x0 - &mu0;
    let c1 = &x1 - &mu1;
    let mut scatter = c0.t().dot(&c0) + c1.t().dot(&c1);
    scatter /= (n0 + n1 - 2) as f64;
    let trace = scatter.diag().sum();
    // All-constant features leave nothing to scale by; fall back to unit scale.
    let ridge_scale = if trace > 0.0 { trace / dim as f64 } else { 1.0 };
    let ridge = shrinkage * ridge_scale;
    scatter.diag_mut().mapv_inplace(|v| v + ridge);

    let w = cholesky_solve(&scatter, &delta).ok_or(SeparabilityError::DegenerateCovariance)?;
    if w.iter().all(|&v| v == 0.0) {
        return Err(SeparabilityError::DegenerateCovariance);
    }
    let threshold = w.dot(&((&mu0 + &mu1) / 2.0)) + (n0 as f64 / n1 as f64).ln();
    Ok(LdaModel {
        w,
        threshold,
        mu0,
        mu1,
        shrinkage,
        n0,
        n1,
        fallback: None,
    })
}

impl LdaModel {
    pub fn dim(&self) -> usize {
        self.w.len()
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(SeparabilityError::DimMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }

    pub fn score(&self, x: ArrayView1<'_, f64>) -> f64 {
        self.w.dot(&x)
    }

    /// Discriminant scores `wᵀx` for each row.
    pub fn project(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        self.check_dim(x.ncols())?;
        Ok(x.dot(&self.w))
    }

    pub fn classify_score(&self, score: f64) -> ClassLabel {
        match self.fallback {
            Some(label) => label,
            None if score > self.threshold => ClassLabel::Fake,
            None => ClassLabel::Real,
        }
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<ClassLabel>> {
        Ok(self
            .project(x)?
            .iter()
            .map(|&s| self.classify_score(s))
            .collect())
    }
}

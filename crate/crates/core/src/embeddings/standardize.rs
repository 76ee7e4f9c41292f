use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::{EmbeddingDataset, EmbeddingError, Result};

/// Lower bound for per-feature scale, so constant features map to zero.
pub const SCALE_FLOOR: f64 = 1e-8;

/// Per-feature affine map `(x - mean) / scale`, fitted on training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    pub scale: Array1<f64>,
}

/// Mean and population standard deviation of each column.
pub fn fit_standardizer(train: &EmbeddingDataset) -> Result<Standardizer> {
    let x = train.matrix();
    if x.nrows() < 2 {
        return Err(EmbeddingError::EmptyDataset {
            needed: 2,
            got: x.nrows(),
        });
    }
    let mean = x.mean_axis(Axis(0)).expect("rows present");
    let scale = x
        .var_axis(Axis(0), 0.0)
        .mapv(|v| v.sqrt().max(SCALE_FLOOR));
    Ok(Standardizer { mean, scale })
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: Array1::zeros(dim),
            scale: Array1::ones(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform_matrix(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.dim() {
            return Err(EmbeddingError::DimMismatch {
                expected: self.dim(),
                got: x.ncols(),
            });
        }
        Ok((&x - &self.mean) / &self.scale)
    }

    pub fn apply(&self, dataset: &EmbeddingDataset) -> Result<EmbeddingDataset> {
        Ok(dataset.with_matrix(self.transform_matrix(dataset.matrix().view())?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::{ClassLabel, EmbeddingSource};
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ds(m: Array2<f64>) -> EmbeddingDataset {
        let n = m.nrows();
        EmbeddingDataset::new(m, vec![ClassLabel::Real; n], EmbeddingSource::External).unwrap()
    }

    #[test]
    fn two_point_statistics() {
        let s = fit_standardizer(&ds(array![[1.0], [3.0]])).unwrap();
        assert_eq!(s.mean, array![2.0]);
        assert_eq!(s.scale, array![1.0]);
    }

    #[test]
    fn constant_column_is_floored() {
        let d = ds(array![[5.0], [5.0], [5.0]]);
        let s = fit_standardizer(&d).unwrap();
        assert_eq!(s.scale[0], SCALE_FLOOR);
        assert!(s.apply(&d).unwrap().matrix().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn standardized_columns_have_unit_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = Array2::from_shape_fn((100, 4), |(_, j)| rng.random_range(-3.0..3.0) * (j + 1) as f64 + j as f64);
        let d = ds(m);
        let z = fit_standardizer(&d).unwrap().apply(&d).unwrap();
        for col in z.matrix().columns() {
            let mean = col.mean().unwrap();
            let var = col.mapv(|v| (v - mean).powi(2)).mean().unwrap();
            assert!(mean.abs() < 1e-9);
            assert!((var - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn centering_and_identity() {
        let d = ds(array![[1.0, -2.0], [3.0, 4.0]]);
        let s = fit_standardizer(&d).unwrap();
        let at_mean = ds(array![[2.0, 1.0]]);
        assert!(s.apply(&at_mean).unwrap().matrix().iter().all(|&v| v == 0.0));
        assert_eq!(Standardizer::identity(2).apply(&d).unwrap(), d);
    }

    #[test]
    fn held_out_shift_survives() {
        let train = ds(array![[0.0], [2.0], [4.0]]);
        let test = ds(array![[12.0], [14.0]]);
        let s = fit_standardizer(&train).unwrap();
        let z = s.apply(&test).unwrap();
        // train sd = sqrt(8/3); test mean 13 maps to (13 - 2) / sd
        let expected = 11.0 / (8.0f64 / 3.0).sqrt();
        assert!((z.matrix().mean().unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            fit_standardizer(&ds(array![[1.0]])),
            Err(EmbeddingError::EmptyDataset { .. })
        ));
        let s = Standardizer::identity(3);
        assert!(matches!(
            s.apply(&ds(array![[1.0, 2.0]])),
            Err(EmbeddingError::DimMismatch { expected: 3, got: 2 })
        ));
    }
}

use ndarray::Array2;

use super::{EmbeddingError, Result};

/// `2595 * log10(1 + f / 700)`.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// One triangular filter stored over its nonzero support.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilter {
    pub start_bin: usize,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    filters: Vec<MelFilter>,
    num_bins: usize,
    f_max: f64,
    sample_rate: u32,
}

impl MelFilterbank {
    pub fn num_mels(&self) -> usize {
        self.filters.len()
    }

    /// Number of one-sided FFT bins, `fft_size / 2 + 1`.
    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn f_max(&self) -> f64 {
        self.f_max
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn filters(&self) -> &[MelFilter] {
        &self.filters
    }

    /// Dense `n_mels x num_bins` weight matrix.
    pub fn weights(&self) -> Array2<f64> {
        let mut w = Array2::zeros((self.filters.len(), self.num_bins));
        for (m, f) in self.filters.iter().enumerate() {
            for (j, &v) in f.weights.iter().enumerate() {
                w[[m, f.start_bin + j]] = v;
            }
        }
        w
    }

    /// Mel energies of one power spectrum frame.
    pub fn apply(&self, power: &[f64], out: &mut [f64]) {
        debug_assert_eq!(power.len(), self.num_bins);
        for (dst, f) in out.iter_mut().zip(&self.filters) {
            *dst = f
                .weights
                .iter()
                .zip(&power[f.start_bin..])
                .map(|(w, p)| w * p)
                .sum();
        }
    }
}

/// Triangular filters with peaks evenly spaced on the mel scale over `[0, f_max]`.
/// Each triangle rises from its left neighbour's centre and falls to its
/// right neighbour's centre, peaking at 1.
pub fn mel_filterbank(n_mels: usize, fft_size: usize, sample_rate: u32, f_max: f64) -> Result<MelFilterbank> {
    let nyquist = f64::from(sample_rate) / 2.0;
    if n_mels == 0 {
        return Err(EmbeddingError::InvalidRange("n_mels must be at least 1".into()));
    }
    if sample_rate == 0 || !(f_max > 0.0 && f_max <= nyquist) {
        return Err(EmbeddingError::InvalidRange(format!(
            "f_max {f_max} Hz must lie in (0, {nyquist}] Hz"
        )));
    }
    if fft_size < 2 || !fft_size.is_multiple_of(2) {
        return Err(EmbeddingError::InvalidRange(format!(
            "fft_size {fft_size} must be even"
        )));
    }
    let num_bins = fft_size / 2 + 1;
    let bin_hz = f64::from(sample_rate) / fft_size as f64;
    let mel_max = hz_to_mel(f_max);
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_max * i as f64 / (n_mels + 1) as f64))
        .collect();

    let mut filters = Vec::with_capacity(n_mels);
    for m in 0..n_mels {
        let (lo, centre, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let mut start_bin = None;
        let mut weights = Vec::new();
        for k in 0..num_bins {
            let f = k as f64 * bin_hz;
            if f >= hi {
                break;
            }
            let rise = (f - lo) / (centre - lo);
            let fall = (hi - f) / (hi - centre);
            let w = rise.min(fall);
            if w > 0.0 {
                start_bin.get_or_insert(k);
                weights.push(w);
            } else if start_bin.is_some() {
                break;
            }
        }
        match start_bin {
            Some(start_bin) => filters.push(MelFilter { start_bin, weights }),
            None => return Err(EmbeddingError::EmptyFilter(m)),
        }
    }
    Ok(MelFilterbank {
        filters,
        num_bins,
        f_max,
        sample_rate,
    })
}

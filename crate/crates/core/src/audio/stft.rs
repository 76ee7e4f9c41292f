use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{AudioClip, AudioError, Result};

/// One-sided short-time Fourier transform of a clip.
#[derive(Debug, Clone)]
pub struct Spectrogram {
    /// `T x (fft_size / 2 + 1)` complex coefficients.
    pub frames: Array2<Complex64>,
    pub fft_size: usize,
    pub hop: usize,
    pub sample_rate: u32,
}

impl Spectrogram {
    pub fn num_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn num_bins(&self) -> usize {
        self.frames.ncols()
    }

    /// Squared magnitudes.
    pub fn power(&self) -> Array2<f64> {
        self.frames.mapv(|c| c.norm_sqr())
    }

    pub fn bin_frequency(&self, k: usize) -> f64 {
        k as f64 * f64::from(self.sample_rate) / self.fft_size as f64
    }
}

/// Periodic Hann window.
pub fn hann_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

/// Hann-windowed STFT without padding: `floor((len - fft_size) / hop) + 1` frames.
pub fn stft(clip: &AudioClip, fft_size: usize, hop: usize) -> Result<Spectrogram> {
    if fft_size < 2 || !fft_size.is_multiple_of(2) || hop == 0 {
        return Err(AudioError::InvalidStftConfig { fft_size, hop });
    }
    clip.require_len(fft_size)?;
    let samples = clip.samples();
    let n_frames = (samples.len() - fft_size) / hop + 1;
    let n_bins = fft_size / 2 + 1;
    let window = hann_window(fft_size);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(fft_size);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    let mut buf = vec![Complex64::default(); fft_size];
    let mut frames = Array2::<Complex64>::zeros((n_frames, n_bins));
    for (t, mut row) in frames.rows_mut().into_iter().enumerate() {
        let start = t * hop;
        for ((b, &x), &w) in buf.iter_mut().zip(&samples[start..start + fft_size]).zip(&window) {
            *b = Complex64::new(x * w, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (dst, src) in row.iter_mut().zip(&buf[..n_bins]) {
            *dst = *src;
        }
    }
    Ok(Spectrogram {
        frames,
        fft_size,
        hop,
        sample_rate: clip.sample_rate(),
    })
}

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{adaptive_avg_pool, mel_filterbank, Embedding, EmbeddingError, EmbeddingSource, MelFilterbank, Result};
use crate::audio::{stft, AudioClip, AudioError};

/// Added to mel energies before the logarithm so silence stays finite.
pub const ENERGY_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogMelConfig {
    pub n_mels: usize,
    pub fft_size: usize,
    pub hop: usize,
    /// Number of pooled time steps; the embedding has `n_mels * t_out` values.
    pub t_out: usize,
}

impl Default for LogMelConfig {
    fn default() -> Self {
        Self {
            n_mels: 256,
            fft_size: 4096,
            hop: 256,
            t_out: 1,
        }
    }
}

impl LogMelConfig {
    pub fn dim(&self) -> usize {
        self.n_mels * self.t_out
    }
}

/// Log-Mel pipeline bound to one sample rate, with the filterbank
/// (upper edge at Nyquist) built once.
#[derive(Debug, Clone)]
pub struct LogMelExtractor {
    config: LogMelConfig,
    filterbank: MelFilterbank,
}

impl LogMelExtractor {
    pub fn new(config: LogMelConfig, sample_rate: u32) -> Result<Self> {
        if config.t_out == 0 {
            return Err(EmbeddingError::InvalidRange("t_out must be at least 1".into()));
        }
        let filterbank = mel_filterbank(
            config.n_mels,
            config.fft_size,
            sample_rate,
            f64::from(sample_rate) / 2.0,
        )?;
        Ok(Self { config, filterbank })
    }

    pub fn config(&self) -> &LogMelConfig {
        &self.config
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    /// `T x n_mels` matrix of `ln(mel energy + ENERGY_FLOOR)` before pooling.
    pub fn log_mel_frames(&self, clip: &AudioClip) -> Result<Array2<f64>> {
        if clip.sample_rate() != self.filterbank.sample_rate() {
            return Err(EmbeddingError::Audio(AudioError::UnsupportedRate(clip.sample_rate())));
        }
        let spec = stft(clip, self.config.fft_size, self.config.hop)?;
        let power = spec.power();
        let mut out = Array2::zeros((spec.num_frames(), self.config.n_mels));
        let mut energies = vec![0.0; self.config.n_mels];
        for (p, mut dst) in power.rows().into_iter().zip(out.rows_mut()) {
            self.filterbank
                .apply(p.as_slice().expect("row-major power"), &mut energies);
            for (d, e) in dst.iter_mut().zip(&energies) {
                *d = (e + ENERGY_FLOOR).ln();
            }
        }
        Ok(out)
    }

    pub fn embed(&self, clip: &AudioClip) -> Result<Embedding> {
        let frames = self.log_mel_frames(clip)?;
        let pooled = adaptive_avg_pool(frames.view(), self.config.t_out);
        Ok(Embedding {
            values: pooled.into_iter().collect(),
            source: EmbeddingSource::LogMel,
        })
    }
}

/// STFT power, mel filterbank up to the clip's Nyquist, natural log, then
/// temporal pooling to `t_out` steps, flattened time-major.
pub fn log_mel_embedding(clip: &AudioClip, config: &LogMelConfig) -> Result<Embedding> {
    LogMelExtractor::new(*config, clip.sample_rate())?.embed(clip)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn small() -> LogMelConfig {
        LogMelConfig {
            n_mels: 32,
            fft_size: 512,
            hop: 128,
            t_out: 1,
        }
    }

    fn noise_like(len: usize, rate: u32) -> AudioClip {
        AudioClip::from_fn(len, rate, |t| {
            (2.0 * PI * 440.0 * t).sin() * 0.3 + (2.0 * PI * 3100.0 * t).sin() * 0.2 + (2.0 * PI * 6900.0 * t).cos() * 0.1
        })
        .unwrap()
    }

    #[test]
    fn silence_hits_the_floor() {
        let clip = AudioClip::new(vec![0.0; 2048], 16000).unwrap();
        let e = log_mel_embedding(&clip, &small()).unwrap();
        let floor = ENERGY_FLOOR.ln();
        assert!(e.values.iter().all(|&v| (v - floor).abs() < 1e-12));
    }

    #[test]
    fn gain_shifts_log_energy() {
        let clip = noise_like(4096, 16000);
        let ex = LogMelExtractor::new(small(), 16000).unwrap();
        let a = ex.log_mel_frames(&clip).unwrap();
        let b = ex.log_mel_frames(&clip.scaled(10.0).unwrap()).unwrap();
        let shift = 100f64.ln();
        for (x, y) in a.iter().zip(b.iter()) {
            // energies above 1e-2 leave the floor negligible
            if *x > -4.6 {
                assert!((y - x - shift).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn default_config_dimension() {
        let clip = noise_like(96000, 48000);
        let e = log_mel_embedding(&clip, &LogMelConfig::default()).unwrap();
        assert_eq!(e.dim(), 256);
        assert_eq!(e.source, EmbeddingSource::LogMel);
        assert!(e.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn dimension_does_not_depend_on_duration() {
        let cfg = LogMelConfig { t_out: 3, ..small() };
        for len in [512, 1000, 5000] {
            let e = log_mel_embedding(&noise_like(len, 16000), &cfg).unwrap();
            assert_eq!(e.dim(), 96);
        }
    }

    #[test]
    fn trailing_silence_within_one_hop() {
        let cfg = LogMelConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let clip = AudioClip::new((0..96000).map(|_| rng.random_range(-0.3..0.3)).collect(), 48000).unwrap();
        let mut padded = clip.samples().to_vec();
        padded.extend(std::iter::repeat_n(0.0, cfg.hop));
        let padded = AudioClip::new(padded, 48000).unwrap();
        let a = log_mel_embedding(&clip, &cfg).unwrap();
        let b = log_mel_embedding(&padded, &cfg).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() <= 0.01 * x.abs(), "{x} vs {y}");
        }
    }

    #[test]
    fn errors() {
        let short = AudioClip::new(vec![0.0; 100], 16000).unwrap();
        assert!(matches!(
            log_mel_embedding(&short, &small()),
            Err(EmbeddingError::Audio(AudioError::TooShort { .. }))
        ));
        let ex = LogMelExtractor::new(small(), 16000).unwrap();
        assert!(ex.embed(&noise_like(1024, 48000)).is_err());
        assert!(LogMelExtractor::new(LogMelConfig { t_out: 0, ..small() }, 16000).is_err());
    }
}

use super::{design_lowpass_fir, spline_upsample, AudioClip, AudioError, Result};

/// Anti-alias cutoff as a fraction of the target sample rate
/// (0.9 of the target Nyquist frequency).
pub const ANTI_ALIAS_FRACTION: f64 = 0.45;

fn decimation_taps(factor: usize) -> usize {
    96 * factor + 1
}

/// Integer-factor decimation: Kaiser-windowed low-pass at
/// `0.45 * target_rate`, then every `r`-th sample. Output length is
/// `ceil(len / r)`.
pub fn downsample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip> {
    let rate = clip.sample_rate();
    if target_rate == 0 || target_rate > rate || !rate.is_multiple_of(target_rate) {
        return Err(AudioError::NonIntegerFactor {
            from: rate,
            to: target_rate,
        });
    }
    let factor = (rate / target_rate) as usize;
    if factor == 1 {
        return Ok(clip.clone());
    }
    let filter = design_lowpass_fir(
        ANTI_ALIAS_FRACTION * f64::from(target_rate),
        rate,
        decimation_taps(factor),
    )?;
    let input = clip.samples();
    let out = (0..input.len().div_ceil(factor))
        .map(|j| filter.output_at(input, j * factor))
        .collect();
    Ok(AudioClip::from_parts(out, target_rate))
}

/// Wideband → narrowband → spline-restored wideband, trimmed to the input length.
/// Returns `(narrowband, restored)`.
pub fn degrade(clip: &AudioClip, low_rate: u32) -> Result<(AudioClip, AudioClip)> {
    let nb = downsample(clip, low_rate)?;
    let mut restored = spline_upsample(&nb, clip.sample_rate())?.into_samples();
    restored.truncate(clip.len());
    Ok((nb, AudioClip::from_parts(restored, clip.sample_rate())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(freq: f64, len: usize) -> AudioClip {
        AudioClip::from_fn(len, 48000, |t| (2.0 * PI * freq * t).sin()).unwrap()
    }

    fn central_rms(s: &[f64]) -> f64 {
        let n = s.len();
        let mid = &s[n / 4..3 * n / 4];
        (mid.iter().map(|v| v * v).sum::<f64>() / mid.len() as f64).sqrt()
    }

    #[test]
    fn dc_is_preserved() {
        let clip = AudioClip::new(vec![0.5; 9600], 48000).unwrap();
        let nb = downsample(&clip, 16000).unwrap();
        assert_eq!(nb.sample_rate(), 16000);
        assert_eq!(nb.len(), 3200);
        for &s in &nb.samples()[200..3000] {
            assert!((s - 0.5).abs() < 1e-3);
        }
    }

    #[test]
    fn output_length_is_ceiling() {
        let clip = AudioClip::new(vec![0.0; 100], 48000).unwrap();
        assert_eq!(downsample(&clip, 16000).unwrap().len(), 34);
    }

    #[test]
    fn alias_is_suppressed() {
        let x = tone(20000.0, 48000);
        let y = downsample(&x, 16000).unwrap();
        let db = 20.0 * (central_rms(y.samples()) / central_rms(x.samples())).log10();
        assert!(db < -60.0, "{db}");
    }

    #[test]
    fn passband_tone_survives() {
        let x = tone(1000.0, 48000);
        let y = downsample(&x, 16000).unwrap();
        let db = 20.0 * (central_rms(y.samples()) / central_rms(x.samples())).log10();
        assert!(db.abs() < 0.5, "{db}");
    }

    #[test]
    fn rejects_non_integer_factor() {
        let clip = AudioClip::new(vec![0.0; 100], 48000).unwrap();
        for bad in [14000, 96000, 0] {
            assert!(matches!(
                downsample(&clip, bad),
                Err(AudioError::NonIntegerFactor { .. })
            ));
        }
        assert_eq!(downsample(&clip, 48000).unwrap(), clip);
    }

    #[test]
    fn degrade_keeps_length_and_rate() {
        let x = tone(440.0, 4801);
        let (nb, restored) = degrade(&x, 16000).unwrap();
        assert_eq!(nb.len(), 1601);
        assert_eq!(restored.len(), 4801);
        assert_eq!(restored.sample_rate(), 48000);
    }
}

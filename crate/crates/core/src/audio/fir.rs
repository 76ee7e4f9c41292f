use std::f64::consts::PI;

use super::{AudioClip, AudioError, Result};

/// Kaiser shape parameter used for every low-pass design in the crate.
/// Gives roughly 86 dB of stopband rejection.
pub const KAISER_BETA: f64 = 8.6;

pub const MIN_TAPS: usize = 31;

/// Linear-phase FIR filter with an odd number of symmetric taps and unit DC gain.
#[derive(Debug, Clone, PartialEq)]
pub struct FirFilter {
    taps: Vec<f64>,
    nominal_cutoff_hz: f64,
}

impl FirFilter {
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn nominal_cutoff_hz(&self) -> f64 {
        self.nominal_cutoff_hz
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn group_delay(&self) -> usize {
        (self.taps.len() - 1) / 2
    }

    /// Filtered value at output index `n`, with the group delay removed and
    /// zeros assumed outside the input.
    pub(crate) fn output_at(&self, input: &[f64], n: usize) -> f64 {
        let delay = self.group_delay() as isize;
        let len = input.len() as isize;
        let base = n as isize + delay;
        // input index = base - k must lie in [0, len)
        let k_lo = (base - len + 1).max(0) as usize;
        let k_hi = (base.min(self.taps.len() as isize - 1)) as usize;
        if base < 0 || k_lo > k_hi {
            return 0.0;
        }
        let mut acc = 0.0;
        for k in k_lo..=k_hi {
            acc += self.taps[k] * input[(base - k as isize) as usize];
        }
        acc
    }
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= (half / k) * (half / k);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
        k += 1.0;
    }
    sum
}

pub fn kaiser_window(len: usize, beta: f64) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let denom = bessel_i0(beta);
    let m = (len - 1) as f64;
    (0..len)
        .map(|i| {
            let r = 2.0 * i as f64 / m - 1.0;
            bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / denom
        })
        .collect()
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Kaiser-windowed sinc low-pass, normalized to unit DC gain.
pub fn design_lowpass_fir(cutoff_hz: f64, sample_rate: u32, num_taps: usize) -> Result<FirFilter> {
    let nyquist = f64::from(sample_rate) / 2.0;
    if !(cutoff_hz > 0.0 && cutoff_hz < nyquist) {
        return Err(AudioError::InvalidCutoff {
            cutoff_hz,
            nyquist_hz: nyquist,
        });
    }
    if num_taps < MIN_TAPS || num_taps.is_multiple_of(2) {
        return Err(AudioError::InvalidTapCount(num_taps));
    }
    let fc = cutoff_hz / f64::from(sample_rate);
    let window = kaiser_window(num_taps, KAISER_BETA);
    let center = (num_taps - 1) / 2;
    let mut taps = vec![0.0; num_taps];
    // Fill one half and mirror so the taps are exactly symmetric.
    for i in 0..=center {
        let t = i as f64 - center as f64;
        let h = 2.0 * fc * sinc(2.0 * fc * t) * window[i];
        taps[i] = h;
        taps[num_taps - 1 - i] = h;
    }
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    Ok(FirFilter {
        taps,
        nominal_cutoff_hz: cutoff_hz,
    })
}

/// Zero-padded convolution, shifted by the group delay so the output lines
/// up with the input and has the same length.
pub fn apply_fir(clip: &AudioClip, filter: &FirFilter) -> AudioClip {
    let input = clip.samples();
    let out = (0..input.len()).map(|n| filter.output_at(input, n)).collect();
    AudioClip::from_parts(out, clip.sample_rate())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, rate: u32, len: usize) -> AudioClip {
        AudioClip::from_fn(len, rate, |t| (2.0 * PI * freq * t).sin()).unwrap()
    }

    /// RMS over the central half, away from the zero-padded edges.
    fn central_rms(samples: &[f64]) -> f64 {
        let n = samples.len();
        let mid = &samples[n / 4..3 * n / 4];
        (mid.iter().map(|s| s * s).sum::<f64>() / mid.len() as f64).sqrt()
    }

    fn gain_db(freq: f64, filter: &FirFilter) -> f64 {
        let x = tone(freq, 48000, 48000);
        let y = apply_fir(&x, filter);
        20.0 * (central_rms(y.samples()) / central_rms(x.samples())).log10()
    }

    #[test]
    fn unit_dc_gain_and_symmetry() {
        for (cutoff, taps) in [(3500.0, 511), (7200.0, 289), (100.0, 31), (20000.0, 101)] {
            let f = design_lowpass_fir(cutoff, 48000, taps).unwrap();
            assert!((f.taps().iter().sum::<f64>() - 1.0).abs() < 1e-6);
            let n = f.len();
            for i in 0..n {
                assert!((f.taps()[i] - f.taps()[n - 1 - i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn anchor_lowpass_response() {
        let f = design_lowpass_fir(3500.0, 48000, 511).unwrap();
        let pass = gain_db(3000.0, &f);
        let stop = gain_db(5000.0, &f);
        assert!(pass.abs() <= 0.5, "3 kHz gain {pass} dB");
        assert!(stop < -60.0, "5 kHz gain {stop} dB");
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            design_lowpass_fir(24000.0, 48000, 511),
            Err(AudioError::InvalidCutoff { .. })
        ));
        assert!(matches!(
            design_lowpass_fir(0.0, 48000, 511),
            Err(AudioError::InvalidCutoff { .. })
        ));
        assert!(matches!(
            design_lowpass_fir(1000.0, 48000, 510),
            Err(AudioError::InvalidTapCount(510))
        ));
        assert!(matches!(
            design_lowpass_fir(1000.0, 48000, 29),
            Err(AudioError::InvalidTapCount(29))
        ));
    }

    #[test]
    fn impulse_returns_centered_taps() {
        let f = design_lowpass_fir(3500.0, 48000, 31).unwrap();
        let mut x = vec![0.0; 101];
        x[50] = 1.0;
        let y = apply_fir(&AudioClip::new(x, 48000).unwrap(), &f);
        let d = f.group_delay();
        for (j, &t) in f.taps().iter().enumerate() {
            assert_eq!(y.samples()[50 - d + j], t);
        }
        assert_eq!(y.samples()[50 - d - 1], 0.0);
        assert_eq!(y.samples()[50 + d + 1], 0.0);
    }

    #[test]
    fn dc_is_preserved_away_from_edges() {
        let f = design_lowpass_fir(3500.0, 48000, 511).unwrap();
        let y = apply_fir(&AudioClip::new(vec![0.25; 4000], 48000).unwrap(), &f);
        for &s in &y.samples()[f.len()..4000 - f.len()] {
            assert!((s - 0.25).abs() < 1e-6);
        }
    }

    #[test]
    fn low_tone_passes() {
        let f = design_lowpass_fir(3500.0, 48000, 511).unwrap();
        assert!(gain_db(440.0, &f).abs() < 0.5);
    }

    #[test]
    fn short_inputs_are_handled() {
        let f = design_lowpass_fir(3500.0, 48000, 511).unwrap();
        let y = apply_fir(&AudioClip::new(vec![1.0], 48000).unwrap(), &f);
        assert_eq!(y.samples(), &[f.taps()[f.group_delay()]]);
    }

    #[test]
    fn bessel_matches_reference_values() {
        // I0(1) and I0(8.6) from standard tables.
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_4).abs() < 1e-14);
        assert!((bessel_i0(0.0) - 1.0).abs() < 1e-15);
        assert!((bessel_i0(8.6) - 750.461_159_563_165_9).abs() < 1e-9);
    }
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{apply_fir, design_lowpass_fir, spline_upsample, AudioClip, AudioError, Result};

pub const ANCHOR_SAMPLE_RATE: u32 = 48000;
pub const ANCHOR_TAPS: usize = 511;

const LOWPASS_CUTOFF_HZ: f64 = 3500.0;
const SPLINE_BANDWIDTH_HZ: f64 = 7000.0;
const SPLINE_DECIMATION: usize = 3;

/// MUSHRA anchor conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AnchorKind {
    /// 3.5 kHz low-pass at the original rate.
    #[serde(rename = "lowpass_3500")]
    Lowpass3500,
    /// Band-limited to 7 kHz, decimated, then spline-interpolated back to 48 kHz.
    #[serde(rename = "splineup_7000")]
    SplineUp7000,
}

impl AnchorKind {
    pub const ALL: [AnchorKind; 2] = [AnchorKind::Lowpass3500, AnchorKind::SplineUp7000];

    pub fn name(self) -> &'static str {
        match self {
            AnchorKind::Lowpass3500 => "lowpass_3500",
            AnchorKind::SplineUp7000 => "splineup_7000",
        }
    }
}

impl fmt::Display for AnchorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AnchorKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        AnchorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown anchor kind `{s}`"))
    }
}

/// Derives an anchor from a 48 kHz wideband clip. Rate and length are preserved.
///
/// The 7 kHz spline anchor filters at 7 kHz, keeps every third sample
/// (16 kHz, so the 7 kHz band fits under Nyquist) and interpolates back up.
pub fn make_anchor(clip_wb: &AudioClip, kind: AnchorKind) -> Result<AudioClip> {
    if clip_wb.sample_rate() != ANCHOR_SAMPLE_RATE {
        return Err(AudioError::UnsupportedRate(clip_wb.sample_rate()));
    }
    match kind {
        AnchorKind::Lowpass3500 => {
            let filter = design_lowpass_fir(LOWPASS_CUTOFF_HZ, ANCHOR_SAMPLE_RATE, ANCHOR_TAPS)?;
            Ok(apply_fir(clip_wb, &filter))
        }
        AnchorKind::SplineUp7000 => {
            let filter = design_lowpass_fir(SPLINE_BANDWIDTH_HZ, ANCHOR_SAMPLE_RATE, ANCHOR_TAPS)?;
            let input = clip_wb.samples();
            let decimated: Vec<f64> = (0..input.len().div_ceil(SPLINE_DECIMATION))
                .map(|j| filter.output_at(input, j * SPLINE_DECIMATION))
                .collect();
            let low_rate = ANCHOR_SAMPLE_RATE / SPLINE_DECIMATION as u32;
            let low = AudioClip::from_parts(decimated, low_rate);
            let mut up = spline_upsample(&low, ANCHOR_SAMPLE_RATE)?.into_samples();
            up.truncate(clip_wb.len());
            Ok(AudioClip::from_parts(up, ANCHOR_SAMPLE_RATE))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::stft;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn lowpass_anchor_band_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = AudioClip::new(
            (0..48000).map(|_| rng.random_range(-0.5..0.5)).collect(),
            48000,
        )
        .unwrap();
        let lp = make_anchor(&noise, AnchorKind::Lowpass3500).unwrap();
        let spec = stft(&lp, 4096, 1024).unwrap();
        let power = spec.power();
        let bin_hz = 48000.0 / 4096.0;
        let (mut low, mut high) = (0.0, 0.0);
        for row in power.rows() {
            for (k, p) in row.iter().enumerate() {
                let f = k as f64 * bin_hz;
                if f < 3000.0 {
                    low += p;
                } else if f > 5000.0 {
                    high += p;
                }
            }
        }
        let db = 10.0 * (high / low).log10();
        assert!(db < -60.0, "{db}");
    }

    #[test]
    fn spline_anchor_keeps_low_tone() {
        let x = AudioClip::from_fn(48000, 48000, |t| (2.0 * PI * 1000.0 * t).sin()).unwrap();
        let y = make_anchor(&x, AnchorKind::SplineUp7000).unwrap();
        let mid = |s: &[f64]| {
            let m = &s[12000..36000];
            (m.iter().map(|v| v * v).sum::<f64>() / m.len() as f64).sqrt()
        };
        let db = 20.0 * (mid(y.samples()) / mid(x.samples())).log10();
        assert!(db.abs() < 0.5, "{db}");
    }

    #[test]
    fn duration_and_rate_are_kept() {
        for len in [1000, 1001, 1002] {
            let x = AudioClip::new(vec![0.1; len], 48000).unwrap();
            for kind in AnchorKind::ALL {
                let y = make_anchor(&x, kind).unwrap();
                assert_eq!(y.len(), len);
                assert_eq!(y.sample_rate(), 48000);
            }
        }
    }

    #[test]
    fn rejects_other_rates() {
        let x = AudioClip::new(vec![0.0; 1000], 44100).unwrap();
        assert!(matches!(
            make_anchor(&x, AnchorKind::Lowpass3500),
            Err(AudioError::UnsupportedRate(44100))
        ));
    }

    #[test]
    fn names_round_trip() {
        for kind in AnchorKind::ALL {
            assert_eq!(kind.name().parse::<AnchorKind>().unwrap(), kind);
        }
    }
}

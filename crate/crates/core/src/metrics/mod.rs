//! Signal-level comparison of a wideband reference against a
//! super-resolved estimate: SNR and natural-log LSD.

mod batch;

pub use batch::{read_manifest, run_batch, BatchResult, ManifestRow, MetricTable};

use std::fmt;

use ndarray::ArrayView2;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::audio::{stft, AudioClip, AudioError};

/// Added to power spectra before taking logs.
pub const LOG_EPSILON: f64 = 1e-10;

/// Largest relative length difference that is silently truncated.
pub const MAX_LENGTH_MISMATCH: f64 = 0.01;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("sample rate mismatch: reference {reference} Hz, estimate {estimate} Hz")]
    RateMismatch { reference: u32, estimate: u32 },
    #[error("length mismatch beyond 1%: reference {reference}, estimate {estimate} samples")]
    LengthMismatch { reference: usize, estimate: usize },
    #[error("reference is silent but the estimate is not")]
    SilentReference,
    #[error("clips too short: need {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error("{path}: {source}")]
    File { path: String, source: AudioError },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MetricsError>;

/// SNR in dB, or `Unbounded` when the estimate matches the reference exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Snr {
    Db(f64),
    Unbounded,
}

impl Snr {
    pub fn db(self) -> Option<f64> {
        match self {
            Snr::Db(v) => Some(v),
            Snr::Unbounded => None,
        }
    }
}

impl fmt::Display for Snr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Snr::Db(v) => write!(f, "{v:.6}"),
            Snr::Unbounded => f.write_str("inf"),
        }
    }
}

impl Serialize for Snr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Snr::Db(v) => s.serialize_f64(*v),
            Snr::Unbounded => s.serialize_str("inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct LsdConfig {
    pub fft_size: usize,
    pub hop: usize,
}

impl Default for LsdConfig {
    fn default() -> Self {
        Self {
            fft_size: 2048,
            hop: 512,
        }
    }
}

/// Equal-rate, equal-length views, truncating up to 1% of length mismatch.
fn aligned<'a>(reference: &'a AudioClip, estimate: &'a AudioClip) -> Result<(&'a [f64], &'a [f64])> {
    if reference.sample_rate() != estimate.sample_rate() {
        return Err(MetricsError::RateMismatch {
            reference: reference.sample_rate(),
            estimate: estimate.sample_rate(),
        });
    }
    let (a, b) = (reference.len(), estimate.len());
    let longer = a.max(b);
    if longer > 0 && (longer - a.min(b)) as f64 > MAX_LENGTH_MISMATCH * longer as f64 {
        return Err(MetricsError::LengthMismatch {
            reference: a,
            estimate: b,
        });
    }
    let n = a.min(b);
    Ok((&reference.samples()[..n], &estimate.samples()[..n]))
}

fn snr_of(reference: &[f64], estimate: impl Iterator<Item = f64>) -> Result<Snr> {
    let mut signal = 0.0;
    let mut noise = 0.0;
    for (&y, y_hat) in reference.iter().zip(estimate) {
        signal += y * y;
        noise += (y - y_hat) * (y - y_hat);
    }
    if noise == 0.0 {
        return Ok(Snr::Unbounded);
    }
    if signal == 0.0 {
        return Err(MetricsError::SilentReference);
    }
    Ok(Snr::Db(10.0 * (signal / noise).log10()))
}

/// `10 log10(Σ y² / Σ (y - ŷ)²)` with `y` the reference.
pub fn snr(reference: &AudioClip, estimate: &AudioClip) -> Result<Snr> {
    let (y, y_hat) = aligned(reference, estimate)?;
    snr_of(y, y_hat.iter().copied())
}

/// SNR after scaling the estimate by the least-squares gain
/// `<y, ŷ> / <ŷ, ŷ>`. Reported separately from [`snr`], never in its place.
pub fn gain_compensated_snr(reference: &AudioClip, estimate: &AudioClip) -> Result<Snr> {
    let (y, y_hat) = aligned(reference, estimate)?;
    let cross: f64 = y.iter().zip(y_hat).map(|(a, b)| a * b).sum();
    let energy: f64 = y_hat.iter().map(|b| b * b).sum();
    let gain = if energy > 0.0 { cross / energy } else { 0.0 };
    snr_of(y, y_hat.iter().map(|b| gain * b))
}

/// Mean over frames of the RMS (over bins) natural-log power difference.
///
/// Both inputs are `T x K` power spectrograms of identical shape.
pub fn lsd_from_power(reference: ArrayView2<'_, f64>, estimate: ArrayView2<'_, f64>) -> f64 {
    assert_eq!(reference.dim(), estimate.dim(), "spectrogram shapes differ");
    let (frames, bins) = reference.dim();
    let total: f64 = reference
        .rows()
        .into_iter()
        .zip(estimate.rows())
        .map(|(r, e)| {
            let sq: f64 = r
                .iter()
                .zip(e.iter())
                .map(|(p, q)| ((p + LOG_EPSILON).ln() - (q + LOG_EPSILON).ln()).powi(2))
                .sum();
            (sq / bins as f64).sqrt()
        })
        .sum();
    total / frames as f64
}

/// Log-spectral distance with natural logarithms over Hann STFT power.
pub fn lsd(reference: &AudioClip, estimate: &AudioClip, config: &LsdConfig) -> Result<f64> {
    let (y, y_hat) = aligned(reference, estimate)?;
    if y.len() < config.fft_size {
        return Err(MetricsError::TooShort {
            needed: config.fft_size,
            got: y.len(),
        });
    }
    let rate = reference.sample_rate();
    let ref_clip = AudioClip::new(y.to_vec(), rate)?;
    let est_clip = AudioClip::new(y_hat.to_vec(), rate)?;
    let p = stft(&ref_clip, config.fft_size, config.hop)?.power();
    let q = stft(&est_clip, config.fft_size, config.hop)?.power();
    Ok(lsd_from_power(p.view(), q.view()))
}

/// Both metrics for one reference/estimate pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub reference: String,
    pub estimate: String,
    pub snr_db: Snr,
    pub snr_gain_compensated_db: Snr,
    pub lsd: f64,
    /// Samples compared after truncating to the shorter clip.
    pub compared_samples: usize,
    /// Pairs are compared as delivered; no time shift is searched.
    pub alignment_offset: usize,
}

pub fn compare(
    reference_id: &str,
    reference: &AudioClip,
    estimate_id: &str,
    estimate: &AudioClip,
    config: &LsdConfig,
) -> Result<MetricReport> {
    Ok(MetricReport {
        reference: reference_id.to_string(),
        estimate: estimate_id.to_string(),
        snr_db: snr(reference, estimate)?,
        snr_gain_compensated_db: gain_compensated_snr(reference, estimate)?,
        lsd: lsd(reference, estimate, config)?,
        compared_samples: reference.len().min(estimate.len()),
        alignment_offset: 0,
    })
}

//! Audio containers and the DSP needed to derive narrowband inputs and
//! MUSHRA anchors from wideband recordings.
//!
//! Everything in here is a pure function over immutable inputs.

mod anchor;
mod clip;
mod fir;
mod resample;
mod spline;
mod stft;
mod wav;

pub use anchor::{make_anchor, AnchorKind, ANCHOR_SAMPLE_RATE, ANCHOR_TAPS};
pub use clip::AudioClip;
pub use fir::{apply_fir, design_lowpass_fir, kaiser_window, FirFilter, KAISER_BETA, MIN_TAPS};
pub use resample::{degrade, downsample, ANTI_ALIAS_FRACTION};
pub use spline::{spline_upsample, CubicSpline, MIN_SPLINE_POINTS};
pub use stft::{hann_window, stft, Spectrogram};
pub use wav::{read_wav, write_wav, WavFormat, WavWriteReport};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("malformed WAV: {0}")]
    MalformedWav(String),
    #[error("unsupported WAV format: {0}")]
    UnsupportedFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("sample rate must be positive")]
    InvalidSampleRate,
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("cutoff {cutoff_hz} Hz outside (0, {nyquist_hz}) Hz")]
    InvalidCutoff { cutoff_hz: f64, nyquist_hz: f64 },
    #[error("tap count {0} must be odd and at least {MIN_TAPS}")]
    InvalidTapCount(usize),
    #[error("{from} Hz is not an integer multiple of {to} Hz")]
    NonIntegerFactor { from: u32, to: u32 },
    #[error("target rate {target} Hz must exceed source rate {source_rate} Hz")]
    InvalidTargetRate { source_rate: u32, target: u32 },
    #[error("clip too short: need {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("unsupported sample rate {0} Hz")]
    UnsupportedRate(u32),
    #[error("invalid STFT configuration: fft_size {fft_size}, hop {hop}")]
    InvalidStftConfig { fft_size: usize, hop: usize },
}

pub type Result<T> = std::result::Result<T, AudioError>;

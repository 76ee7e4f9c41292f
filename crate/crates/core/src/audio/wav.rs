use std::io::ErrorKind;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use serde::{Deserialize, Serialize};

use super::{AudioClip, AudioError, Result};

/// On-disk sample encoding for [`write_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum WavFormat {
    Pcm16,
    Float32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WavWriteReport {
    /// Samples outside [-1, 1] that were clamped before encoding.
    pub clipped_samples: usize,
}

fn map_hound(err: hound::Error) -> AudioError {
    match err {
        hound::Error::IoError(e)
            if matches!(e.kind(), ErrorKind::NotFound | ErrorKind::PermissionDenied | ErrorKind::IsADirectory) =>
        {
            AudioError::Io(e)
        }
        // Short reads surface as UnexpectedEof or as hound's own "Other" error.
        hound::Error::IoError(e) => AudioError::MalformedWav(format!("truncated data ({e})")),
        hound::Error::FormatError(msg) => AudioError::MalformedWav(msg.into()),
        hound::Error::UnfinishedSample => AudioError::MalformedWav("unfinished sample".into()),
        hound::Error::TooWide => AudioError::UnsupportedFormat("sample width".into()),
        hound::Error::Unsupported => AudioError::UnsupportedFormat("compressed or unknown codec".into()),
        hound::Error::InvalidSampleFormat => AudioError::UnsupportedFormat("sample format".into()),
    }
}

/// Reads PCM16, PCM24 or float32 WAV data, averaging channels down to mono.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let mut reader = WavReader::open(path).map_err(map_hound)?;
    let spec = reader.spec();
    if !(1..=2).contains(&spec.channels) {
        return Err(AudioError::UnsupportedFormat(format!(
            "{} channels",
            spec.channels
        )));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, bits @ (16 | 24)) => {
            let scale = f64::from(1u32 << (bits - 1));
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| f64::from(v) / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(map_hound)?
        }
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(map_hound)?,
        (fmt, bits) => {
            return Err(AudioError::UnsupportedFormat(format!(
                "{fmt:?} {bits}-bit"
            )))
        }
    };
    let channels = usize::from(spec.channels);
    if !interleaved.len().is_multiple_of(channels) {
        return Err(AudioError::MalformedWav(
            "sample count is not a multiple of the channel count".into(),
        ));
    }
    let mono = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f64>() / channels as f64)
            .collect()
    };
    AudioClip::new(mono, spec.sample_rate).map_err(|e| match e {
        AudioError::NonFinite(i) => AudioError::MalformedWav(format!("non-finite sample {i}")),
        other => other,
    })
}

/// Writes a mono WAV file.
///
/// Out-of-range amplitudes are clamped to [-1, 1] and counted in the report.
/// PCM16 quantization rounds half away from zero.
pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>, format: WavFormat) -> Result<WavWriteReport> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate(),
        bits_per_sample: match format {
            WavFormat::Pcm16 => 16,
            WavFormat::Float32 => 32,
        },
        sample_format: match format {
            WavFormat::Pcm16 => SampleFormat::Int,
            WavFormat::Float32 => SampleFormat::Float,
        },
    };
    let mut writer = WavWriter::create(path, spec).map_err(map_hound)?;
    let mut report = WavWriteReport::default();
    for &s in clip.samples() {
        let v = if s.abs() > 1.0 {
            report.clipped_samples += 1;
            s.clamp(-1.0, 1.0)
        } else {
            s
        };
        match format {
            WavFormat::Pcm16 => {
                let q = (v * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                writer.write_sample(q).map_err(map_hound)?;
            }
            WavFormat::Float32 => writer.write_sample(v as f32).map_err(map_hound)?,
        }
    }
    writer.finalize().map_err(map_hound)?;
    if report.clipped_samples > 0 {
        log::warn!("clamped {} samples to [-1, 1]", report.clipped_samples);
    }
    Ok(report)
}

//! Builds the two listening-test anchors for a wideband clip and writes them as WAV.

use std::f64::consts::PI;

use adsr_eval::audio::{make_anchor, write_wav, AnchorKind, AudioClip, WavFormat};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out_dir = std::env::args().nth(1).map_or_else(std::env::temp_dir, Into::into);
    let clip = AudioClip::from_fn(96000, 48000, |t| {
        let chirp = (2.0 * PI * (200.0 * t + 5000.0 * t * t)).sin();
        0.4 * chirp
    })?;
    for kind in [AnchorKind::Lowpass3500, AnchorKind::SplineUp7000] {
        let anchor = make_anchor(&clip, kind)?;
        let path = out_dir.join(format!("{}.wav", kind.name()));
        write_wav(&anchor, &path, WavFormat::Float32)?;
        println!("{:<14} rms {:.4} -> {}", kind.name(), anchor.rms(), path.display());
    }
    Ok(())
}

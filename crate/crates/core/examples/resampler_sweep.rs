//! Magnitude response of the 48 kHz -> 16 kHz decimator, measured with tones.

use std::f64::consts::PI;

use adsr_eval::audio::{downsample, AudioClip};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("{:>8}  {:>10}", "freq_hz", "gain_db");
    for f in [100.0, 1000.0, 3000.0, 5000.0, 6500.0, 7200.0, 7600.0, 8000.0, 10000.0, 20000.0] {
        let input = AudioClip::from_fn(48000, 48000, |t| (2.0 * PI * f * t).sin())?;
        let out = downsample(&input, 16000)?;
        // Steady-state RMS away from the edges.
        let core = &out.samples()[500..out.len() - 500];
        let rms = (core.iter().map(|v| v * v).sum::<f64>() / core.len() as f64).sqrt();
        let gain_db = 20.0 * (rms / input.rms()).log10();
        println!("{f:>8.0}  {gain_db:>10.2}");
    }
    Ok(())
}

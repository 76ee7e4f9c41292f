//! SNR and log-spectral distance for a restored clip against its reference.

use std::f64::consts::PI;

use adsr_eval::audio::{degrade, AudioClip};
use adsr_eval::metrics::{compare, lsd, snr, LsdConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let reference = AudioClip::from_fn(48000, 48000, |t| {
        (1..40).map(|k| (2.0 * PI * 220.0 * k as f64 * t).sin() / k as f64).sum::<f64>() * 0.3
    })?;
    let config = LsdConfig::default();

    for low in [8000, 16000, 24000] {
        let (_, restored) = degrade(&reference, low)?;
        let report = compare("ref", &reference, &format!("spline@{low}"), &restored, &config)?;
        println!(
            "{:>8} Hz  SNR {:>7.2} dB  gain-compensated {:>7.2} dB  LSD {:.3}",
            low,
            report.snr_db.db().unwrap_or(f64::INFINITY),
            report.snr_gain_compensated_db.db().unwrap_or(f64::INFINITY),
            report.lsd
        );
    }

    println!("self LSD: {}", lsd(&reference, &reference, &config)?);
    println!("self SNR: {:?}", snr(&reference, &reference)?);
    Ok(())
}

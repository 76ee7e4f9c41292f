//! Log-Mel embeddings written to and read back from the binary and CSV formats.

use std::f64::consts::PI;

use adsr_eval::audio::AudioClip;
use adsr_eval::embeddings::{
    read_embeddings, read_embeddings_csv, write_embeddings, write_embeddings_csv, ClassLabel, EmbeddingDataset,
    LogMelConfig, LogMelExtractor,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let extractor = LogMelExtractor::new(LogMelConfig::default(), 48000)?;
    let clips: Vec<AudioClip> = (0..6)
        .map(|i| AudioClip::from_fn(48000, 48000, |t| 0.3 * (2.0 * PI * (200.0 + 150.0 * i as f64) * t).sin()))
        .collect::<Result<_, _>>()?;
    let embeddings = clips.iter().map(|c| extractor.embed(c)).collect::<Result<Vec<_>, _>>()?;
    let data = EmbeddingDataset::from_embeddings(&embeddings, ClassLabel::Real)?;
    println!("{} embeddings of dimension {}", data.len(), data.dim());

    let bin = dir.path().join("real.aemb");
    let csv = dir.path().join("real.csv");
    write_embeddings(&data, &bin)?;
    write_embeddings_csv(&data, &csv)?;
    let from_bin = read_embeddings(&bin)?;
    let from_csv = read_embeddings_csv(&csv)?;
    // Values are stored as f32.
    let as_f32 = data.matrix().mapv(|v| f64::from(v as f32));
    println!("binary: {} bytes, equal after f32 rounding: {}", std::fs::metadata(&bin)?.len(), from_bin.matrix() == as_f32);
    println!("csv:    {} bytes, {} rows", std::fs::metadata(&csv)?.len(), from_csv.len());
    Ok(())
}

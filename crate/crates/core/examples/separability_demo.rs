//! Real vs. band-limited-and-restored audio, separated by LDA on log-Mel embeddings.

use std::f64::consts::PI;

use adsr_eval::audio::{degrade, AudioClip};
use adsr_eval::embeddings::{ClassLabel, EmbeddingDataset, LogMelConfig, LogMelExtractor};
use adsr_eval::separability::{evaluate_seeds, DEFAULT_SHRINKAGE};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn clip(seed: u64) -> AudioClip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f0: f64 = rng.random_range(100.0..400.0);
    let noise: Vec<f64> = (0..48000).map(|_| rng.random_range(-0.05..0.05)).collect();
    let harmonics = (23000.0 / f0) as usize;
    let tone = AudioClip::from_fn(48000, 48000, |t| {
        (1..=harmonics).map(|k| (2.0 * PI * f0 * k as f64 * t).sin() / k as f64).sum::<f64>() * 0.2
    })
    .unwrap();
    AudioClip::new(tone.samples().iter().zip(&noise).map(|(a, b)| a + b).collect(), 48000).unwrap()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let extractor = LogMelExtractor::new(LogMelConfig::default(), 48000)?;
    let reals: Vec<AudioClip> = (0..60).into_par_iter().map(clip).collect();
    let embed = |clips: Vec<AudioClip>, label| {
        let e: Vec<_> = clips.par_iter().map(|c| extractor.embed(c).unwrap()).collect();
        EmbeddingDataset::from_embeddings(&e, label)
    };
    let fakes: Vec<AudioClip> = reals.par_iter().map(|c| degrade(c, 16000).unwrap().1).collect();
    let data = embed(reals, ClassLabel::Real)?.concat(&embed(fakes, ClassLabel::Fake)?)?;

    let sweep = evaluate_seeds(&data, 0.8, &[0, 1, 2, 3, 4], DEFAULT_SHRINKAGE)?;
    for r in &sweep.reports {
        println!("seed {}: accuracy {:.3} on {} test clips", r.seed, r.accuracy, r.n_test);
    }
    println!("mean {:.3} +/- {:.3}", sweep.mean_accuracy, sweep.std_accuracy);
    Ok(())
}

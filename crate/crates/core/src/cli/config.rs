use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::audio::WavFormat;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateSection {
    pub low: Option<u32>,
    pub high: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogMelSection {
    pub n_mels: Option<usize>,
    pub fft_size: Option<usize>,
    pub hop: Option<usize>,
    pub t_out: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub train_fraction: Option<f64>,
    pub seed: Option<u64>,
    pub seeds: Option<Vec<u64>>,
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LsdSection {
    pub fft_size: Option<usize>,
    pub hop: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignSection {
    pub seed: Option<u64>,
    pub bind: Option<String>,
    pub ui_dir: Option<PathBuf>,
    pub ref_threshold: Option<i64>,
    pub max_fail_fraction: Option<f64>,
}

/// Optional TOML defaults for every command. Flags always take precedence.
///
/// ```toml
/// workers = 8
/// wav_format = "float32"
/// [rates]
/// low = 16000
/// high = 48000
/// [split]
/// seed = 7
/// lambda = 1e-3
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub workers: Option<usize>,
    pub wav_format: Option<WavFormat>,
    pub rates: RateSection,
    pub logmel: LogMelSection,
    pub split: SplitSection,
    pub lsd: LsdSection,
    pub campaign: CampaignSection,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }
}

/// Flag value, else config value, else default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_rejects_unknown_keys() {
        let c: ExperimentConfig = toml::from_str(
            "workers = 3\nwav_format = \"float32\"\n[rates]\nlow = 16000\n[split]\nseeds = [1, 2]\n",
        )
        .unwrap();
        assert_eq!(c.workers, Some(3));
        assert_eq!(c.wav_format, Some(WavFormat::Float32));
        assert_eq!(c.rates.low, Some(16000));
        assert_eq!(c.split.seeds, Some(vec![1, 2]));
        assert!(toml::from_str::<ExperimentConfig>("[split]\nsed = 1\n").is_err());
    }

    #[test]
    fn flags_win() {
        assert_eq!(pick(Some(1), Some(2), 3), 1);
        assert_eq!(pick(None, Some(2), 3), 2);
        assert_eq!(pick(None, None, 3), 3);
    }
}

//! MUSHRA campaigns: construction with anchors and blinded condition
//! orders, response validation, listener post-screening, and per-condition
//! statistics.

mod campaign;
mod response;
mod screen;
mod stats;

pub use campaign::{
    blind_label, build_campaign, load_campaign, BuiltCampaign, CampaignItem, ConditionKind, ConditionSpec,
    MushraCampaign, TrialSpec, REFERENCE_CONDITION,
};
pub use response::{validate_response, MushraResponse, Rejection, MAX_SCORE, MIN_SCORE};
pub use screen::{post_screen, ExcludedListener, ScreeningOutcome, ScreeningPolicy};
pub use stats::{aggregate, condition_stats, write_stats_csv, ConditionStats, STATS_CSV_HEADER};

use thiserror::Error;

use crate::audio::AudioError;

#[derive(Debug, Error)]
pub enum MushraError {
    #[error("condition `{condition}` has {n} scores; statistics need at least 2")]
    InsufficientData { condition: String, n: usize },
    #[error("system `{system}` has no output for item {item}")]
    MissingSystemOutput { system: String, item: String },
    #[error("`{what}` is at {got} Hz, expected {expected} Hz")]
    RateMismatch { what: String, got: u32, expected: u32 },
    #[error("`{what}` lasts {got:.3} s but the reference lasts {expected:.3} s")]
    DurationMismatch { what: String, got: f64, expected: f64 },
    #[error("invalid campaign: {0}")]
    InvalidCampaign(String),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, MushraError>;

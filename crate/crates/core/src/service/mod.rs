//! HTTP service that runs a MUSHRA campaign for browser listeners.
//!
//! Condition identities never leave the server: trials are described with
//! blind labels and audio is addressed by opaque tokens. Every accepted
//! response is appended to a line-delimited JSON log and synced to disk
//! before it is acknowledged.

mod export;
mod http;
mod journal;
mod state;

pub use export::{export_results, export_results_from_bytes, RawScore, ResultsExport};
pub use http::{router, serve};
pub use journal::{parse_log, read_log, LogContents, LogEvent, ResponseLog, ResponseLogEntry, SessionRecord};
pub use state::{
    ApiError, CampaignService, ConditionEntry, ResponseSubmission, ScoringScale, SubmitAck, TrialDescriptor,
};

use std::path::PathBuf;

use thiserror::Error;

use crate::mushra::{MushraError, ScreeningPolicy};

/// Environment variable holding the bearer token for `GET /api/results`.
pub const OPERATOR_TOKEN_ENV: &str = "ADSR_OPERATOR_TOKEN";

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("response log is corrupt at line {line}; last valid entry is seq {last_valid_seq:?}")]
    CorruptLog { line: usize, last_valid_seq: Option<u64> },
    #[error("log references unknown session `{0}`")]
    UnknownLoggedSession(String),
    #[error(transparent)]
    Mushra(#[from] MushraError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ServiceError>;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub campaign: PathBuf,
    pub log: PathBuf,
    /// Directory with the listening UI bundle, served at `/`.
    pub ui_dir: Option<PathBuf>,
    /// `None` disables the results endpoint.
    pub operator_token: Option<String>,
    pub policy: ScreeningPolicy,
}

impl ServiceConfig {
    pub fn new(campaign: impl Into<PathBuf>, log: impl Into<PathBuf>) -> Self {
        Self {
            campaign: campaign.into(),
            log: log.into(),
            ui_dir: None,
            operator_token: std::env::var(OPERATOR_TOKEN_ENV).ok().filter(|t| !t.is_empty()),
            policy: ScreeningPolicy::default(),
        }
    }
}

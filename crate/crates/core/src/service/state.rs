use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::journal::{now_ms, LogEvent, ResponseLog, ResponseLogEntry, SessionRecord};
use super::{Result, ServiceConfig, ServiceError};
use crate::mushra::{
    blind_label, load_campaign, validate_response, MushraCampaign, MushraResponse, Rejection, ScreeningPolicy,
    MAX_SCORE, MIN_SCORE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoringScale {
    pub min: i64,
    pub max: i64,
    pub step: i64,
}

const SCALE: ScoringScale = ScoringScale {
    min: MIN_SCORE,
    max: MAX_SCORE,
    step: 1,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionEntry {
    pub label: String,
    pub audio_url: String,
}

/// What a listener sees for one trial. Contains no condition names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialDescriptor {
    pub session: String,
    pub index: usize,
    pub total: usize,
    pub reference_url: String,
    pub conditions: Vec<ConditionEntry>,
    pub scale: ScoringScale,
    pub submitted: bool,
}

/// Body of `POST /api/response`; scores are keyed by blind label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseSubmission {
    pub session: String,
    pub trial_index: usize,
    pub scores: BTreeMap<String, i64>,
    #[serde(default)]
    pub client: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmitAck {
    pub seq: u64,
    pub trial_index: usize,
    pub cursor: usize,
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ApiError {
    UnknownSession,
    UnknownTrial,
    Duplicate,
    Rejected(Rejection),
    BadRequest(String),
    Unauthorized,
    ResultsDisabled,
    Internal(String),
}

impl ApiError {
    pub fn status(&self) -> u16 {
        match self {
            ApiError::UnknownSession | ApiError::UnknownTrial => 404,
            ApiError::Duplicate => 409,
            ApiError::Rejected(_) | ApiError::BadRequest(_) => 400,
            ApiError::Unauthorized => 401,
            ApiError::ResultsDisabled => 403,
            ApiError::Internal(_) => 500,
        }
    }

    /// Machine-readable body; always carries a `reason` field.
    pub fn body(&self) -> serde_json::Value {
        match self {
            ApiError::Rejected(r) => {
                let mut v = serde_json::to_value(r).expect("serializable");
                v["message"] = r.to_string().into();
                v
            }
            ApiError::BadRequest(m) => json!({"reason": "BadRequest", "message": m}),
            ApiError::Internal(m) => json!({"reason": "Internal", "message": m}),
            other => json!({"reason": format!("{other:?}")}),
        }
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        log::error!("{e}");
        ApiError::Internal(e.to_string())
    }
}

#[derive(Debug)]
struct Session {
    record: SessionRecord,
    submitted: HashSet<usize>,
}

#[derive(Debug)]
pub(crate) struct Ingest {
    pub(crate) log: ResponseLog,
    sessions: HashMap<String, Session>,
}

impl Ingest {
    fn apply(&mut self, entry: &ResponseLogEntry, campaign: &MushraCampaign) -> Result<()> {
        match &entry.event {
            LogEvent::Session { session } => {
                self.sessions.insert(
                    session.session_id.clone(),
                    Session {
                        record: session.clone(),
                        submitted: HashSet::new(),
                    },
                );
            }
            LogEvent::Response { session_id, response } => {
                let s = self
                    .sessions
                    .get_mut(session_id)
                    .ok_or_else(|| ServiceError::UnknownLoggedSession(session_id.clone()))?;
                if let Some(t) = campaign.trial_index(&response.trial) {
                    s.submitted.insert(t);
                    s.record.cursor = s.submitted.len();
                }
            }
        }
        Ok(())
    }
}

/// Campaign data (immutable) plus the single-writer ingestion state.
#[derive(Debug)]
pub struct CampaignService {
    campaign: Arc<MushraCampaign>,
    audio: HashMap<String, PathBuf>,
    pub(crate) config: ServiceConfig,
    pub(crate) ingest: tokio::sync::Mutex<Ingest>,
}

fn audio_url(token: &str) -> String {
    format!("/audio/{token}.wav")
}

impl CampaignService {
    /// Loads the campaign and replays the response log; a torn final line is
    /// truncated, any other corruption refuses to start.
    pub fn open(config: ServiceConfig) -> Result<Self> {
        let campaign = load_campaign(&config.campaign)?;
        Self::with_campaign(campaign, config)
    }

    pub fn with_campaign(campaign: MushraCampaign, config: ServiceConfig) -> Result<Self> {
        campaign.validate()?;
        let (log, entries) = ResponseLog::open(&config.log)?;
        let mut ingest = Ingest {
            log,
            sessions: HashMap::new(),
        };
        for e in &entries {
            ingest.apply(e, &campaign)?;
        }
        log::info!(
            "campaign with {} trials; replayed {} log entries, {} sessions",
            campaign.trials.len(),
            entries.len(),
            ingest.sessions.len()
        );
        let audio = campaign.audio_tokens().into_iter().collect();
        Ok(Self {
            campaign: Arc::new(campaign),
            audio,
            config,
            ingest: tokio::sync::Mutex::new(ingest),
        })
    }

    pub fn campaign(&self) -> &MushraCampaign {
        &self.campaign
    }

    pub fn policy(&self) -> &ScreeningPolicy {
        &self.config.policy
    }

    pub fn audio_path(&self, token: &str) -> Option<&PathBuf> {
        self.audio.get(token)
    }

    /// Public campaign metadata. Counts only, no condition names.
    pub fn metadata(&self) -> serde_json::Value {
        json!({
            "trials": self.campaign.trials.len(),
            "conditions_per_trial": self.campaign.trials[0].conditions.len(),
            "scale": SCALE,
        })
    }

    pub async fn create_session(&self, alias: &str) -> Result<SessionRecord> {
        let mut ingest = self.ingest.lock().await;
        let session_id = loop {
            let id = format!("{:032x}", rand::random::<u128>());
            if !ingest.sessions.contains_key(&id) {
                break id;
            }
        };
        let record = SessionRecord {
            trial_order: self.campaign.trial_order(&session_id),
            session_id,
            alias: alias.to_string(),
            cursor: 0,
        };
        let entry = ingest.log.append(LogEvent::Session {
            session: record.clone(),
        })?;
        ingest.apply(&entry, &self.campaign)?;
        Ok(record)
    }

    pub async fn trial(&self, session: &str, index: usize) -> std::result::Result<TrialDescriptor, ApiError> {
        let ingest = self.ingest.lock().await;
        let s = ingest.sessions.get(session).ok_or(ApiError::UnknownSession)?;
        let &trial = s.record.trial_order.get(index).ok_or(ApiError::UnknownTrial)?;
        let conditions = self
            .campaign
            .condition_order(session, trial)
            .into_iter()
            .enumerate()
            .map(|(pos, c)| ConditionEntry {
                label: blind_label(pos),
                audio_url: audio_url(&self.campaign.audio_token(trial, c)),
            })
            .collect();
        Ok(TrialDescriptor {
            session: session.to_string(),
            index,
            total: s.record.trial_order.len(),
            reference_url: audio_url(&self.campaign.reference_token(trial)),
            conditions,
            scale: SCALE,
            submitted: s.submitted.contains(&trial),
        })
    }

    /// Validates and durably logs a submission. Rejections refer to blind
    /// labels, never to condition names.
    pub async fn submit(&self, sub: ResponseSubmission) -> std::result::Result<SubmitAck, ApiError> {
        let mut ingest = self.ingest.lock().await;
        let s = ingest.sessions.get(&sub.session).ok_or(ApiError::UnknownSession)?;
        let &trial = s.record.trial_order.get(sub.trial_index).ok_or(ApiError::UnknownTrial)?;
        if s.submitted.contains(&trial) {
            return Err(ApiError::Duplicate);
        }
        let spec = &self.campaign.trials[trial];
        let order = self.campaign.condition_order(&sub.session, trial);
        let label_to_name: HashMap<String, &str> = order
            .iter()
            .enumerate()
            .map(|(pos, &c)| (blind_label(pos), spec.conditions[c].name.as_str()))
            .collect();
        let name_to_label: HashMap<&str, &str> =
            label_to_name.iter().map(|(l, n)| (*n, l.as_str())).collect();
        let mut scores = BTreeMap::new();
        for (label, &score) in &sub.scores {
            let name = label_to_name.get(label).ok_or_else(|| {
                ApiError::Rejected(Rejection::UnknownCondition {
                    condition: label.clone(),
                })
            })?;
            scores.insert(name.to_string(), score);
        }
        let response = MushraResponse {
            listener: sub.session.clone(),
            trial: spec.id.clone(),
            scores,
            timestamp_ms: now_ms(),
            client: sub.client,
        };
        if let Err(rejection) = validate_response(&self.campaign, &response) {
            let relabel = |n: &String| name_to_label.get(n.as_str()).map_or(n.clone(), |l| l.to_string());
            let rejection = match rejection {
                Rejection::OutOfRange { condition, score } => Rejection::OutOfRange {
                    condition: relabel(&condition),
                    score,
                },
                Rejection::Incomplete { missing } => {
                    let mut missing: Vec<String> = missing.iter().map(relabel).collect();
                    missing.sort();
                    Rejection::Incomplete { missing }
                }
                Rejection::UnknownCondition { condition } => Rejection::UnknownCondition {
                    condition: relabel(&condition),
                },
                other => other,
            };
            return Err(ApiError::Rejected(rejection));
        }
        let entry = ingest.log.append(LogEvent::Response {
            session_id: sub.session.clone(),
            response,
        })?;
        ingest.apply(&entry, &self.campaign)?;
        let s = &ingest.sessions[&sub.session];
        Ok(SubmitAck {
            seq: entry.seq,
            trial_index: sub.trial_index,
            cursor: s.record.cursor,
            complete: s.record.cursor == s.record.trial_order.len(),
        })
    }

    /// Current session state, keyed by session id.
    pub async fn sessions(&self) -> BTreeMap<String, SessionRecord> {
        let ingest = self.ingest.lock().await;
        ingest
            .sessions
            .iter()
            .map(|(k, s)| (k.clone(), s.record.clone()))
            .collect()
    }
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MushraCampaign;

pub const MIN_SCORE: i64 = 0;
pub const MAX_SCORE: i64 = 100;

/// One listener's scores for one trial, keyed by condition name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MushraResponse {
    pub listener: String,
    pub trial: String,
    pub scores: BTreeMap<String, i64>,
    pub timestamp_ms: u64,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub client: serde_json::Value,
}

/// Structured reason a response was refused.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason")]
pub enum Rejection {
    UnknownTrial { trial: String },
    UnknownCondition { condition: String },
    OutOfRange { condition: String, score: i64 },
    Incomplete { missing: Vec<String> },
}

impl std::fmt::Display for Rejection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Rejection::UnknownTrial { trial } => write!(f, "unknown trial `{trial}`"),
            Rejection::UnknownCondition { condition } => write!(f, "unknown condition `{condition}`"),
            Rejection::OutOfRange { condition, score } => {
                write!(f, "score {score} for `{condition}` is outside [{MIN_SCORE}, {MAX_SCORE}]")
            }
            Rejection::Incomplete { missing } => write!(f, "unscored conditions: {}", missing.join(", ")),
        }
    }
}

pub fn validate_response(campaign: &MushraCampaign, response: &MushraResponse) -> Result<(), Rejection> {
    let trial = campaign
        .trial_index(&response.trial)
        .map(|i| &campaign.trials[i])
        .ok_or_else(|| Rejection::UnknownTrial {
            trial: response.trial.clone(),
        })?;
    for (condition, &score) in &response.scores {
        if trial.condition(condition).is_none() {
            return Err(Rejection::UnknownCondition {
                condition: condition.clone(),
            });
        }
        if !(MIN_SCORE..=MAX_SCORE).contains(&score) {
            return Err(Rejection::OutOfRange {
                condition: condition.clone(),
                score,
            });
        }
    }
    let missing: Vec<String> = trial
        .conditions
        .iter()
        .filter(|c| !response.scores.contains_key(&c.name))
        .map(|c| c.name.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Rejection::Incomplete { missing });
    }
    Ok(())
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{MushraResponse, REFERENCE_CONDITION};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreeningPolicy {
    /// Hidden-reference scores below this count as a failed trial.
    pub ref_threshold: i64,
    /// Listeners failing strictly more than this fraction of trials are excluded.
    pub max_fail_fraction: f64,
}

impl Default for ScreeningPolicy {
    fn default() -> Self {
        Self {
            ref_threshold: 90,
            max_fail_fraction: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedListener {
    pub listener: String,
    pub trials: usize,
    /// Trials where the hidden reference scored below the threshold.
    pub failed_trials: Vec<String>,
    pub fail_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScreeningOutcome {
    pub kept: Vec<MushraResponse>,
    pub excluded: Vec<ExcludedListener>,
}

/// Drops every response from listeners who failed to identify the hidden
/// reference too often. Kept responses retain their input order.
pub fn post_screen(responses: &[MushraResponse], policy: &ScreeningPolicy) -> ScreeningOutcome {
    let mut per_listener: BTreeMap<&str, (usize, Vec<String>)> = BTreeMap::new();
    for r in responses {
        let entry = per_listener.entry(r.listener.as_str()).or_default();
        entry.0 += 1;
        let ref_score = r.scores.get(REFERENCE_CONDITION).copied();
        if ref_score.is_none_or(|s| s < policy.ref_threshold) {
            entry.1.push(r.trial.clone());
        }
    }
    let excluded: Vec<ExcludedListener> = per_listener
        .into_iter()
        .filter_map(|(listener, (trials, failed))| {
            let fail_fraction = failed.len() as f64 / trials as f64;
            (fail_fraction > policy.max_fail_fraction).then(|| ExcludedListener {
                listener: listener.to_string(),
                trials,
                failed_trials: failed,
                fail_fraction,
            })
        })
        .collect();
    let kept = responses
        .iter()
        .filter(|r| !excluded.iter().any(|e| e.listener == r.listener))
        .cloned()
        .collect();
    ScreeningOutcome { kept, excluded }
}

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::journal::{parse_log, LogEvent};
use super::{Result, ServiceError};
use crate::mushra::{aggregate, post_screen, write_stats_csv, ConditionStats, ExcludedListener, ScreeningPolicy};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawScore {
    pub seq: u64,
    pub listener: String,
    pub trial: String,
    pub condition: String,
    pub score: i64,
    pub kept: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultsExport {
    pub responses: usize,
    pub kept_responses: usize,
    pub stats: Vec<ConditionStats>,
    pub excluded: Vec<ExcludedListener>,
    #[serde(skip)]
    pub raw: Vec<RawScore>,
    pub warnings: Vec<String>,
}

impl ResultsExport {
    pub fn stats_csv(&self) -> String {
        let mut out = Vec::new();
        write_stats_csv(&self.stats, &mut out).expect("writing to memory");
        String::from_utf8(out).expect("utf-8")
    }

    /// One row per scored condition: `seq,listener,trial,condition,score,kept`.
    pub fn raw_csv(&self) -> String {
        let mut out = String::from("seq,listener,trial,condition,score,kept\n");
        for r in &self.raw {
            writeln!(out, "{},{},{},{},{},{}", r.seq, r.listener, r.trial, r.condition, r.score, r.kept)
                .expect("writing to memory");
        }
        out
    }
}

/// Replays a response log, screens listeners and aggregates per-condition
/// statistics. The output depends only on the log bytes.
pub fn export_results_from_bytes(bytes: &[u8], policy: &ScreeningPolicy) -> Result<ResultsExport> {
    let contents = parse_log(bytes)?;
    if contents.torn_tail {
        return Err(ServiceError::CorruptLog {
            line: contents.entries.len() + 1,
            last_valid_seq: contents.last_seq(),
        });
    }
    let mut seqs = Vec::new();
    let mut responses = Vec::new();
    for entry in contents.entries {
        if let LogEvent::Response { response, .. } = entry.event {
            seqs.push(entry.seq);
            responses.push(response);
        }
    }
    let mut warnings = Vec::new();
    if responses.is_empty() {
        warnings.push("log contains no responses".to_string());
    }
    let screening = post_screen(&responses, policy);
    let excluded: HashSet<&str> = screening.excluded.iter().map(|e| e.listener.as_str()).collect();
    if !responses.is_empty() && screening.kept.is_empty() {
        warnings.push("every listener was excluded by post-screening".to_string());
    }
    let stats = aggregate(&screening.kept)?;
    let raw = seqs
        .iter()
        .zip(&responses)
        .flat_map(|(&seq, r)| {
            let kept = !excluded.contains(r.listener.as_str());
            r.scores.iter().map(move |(c, &score)| RawScore {
                seq,
                listener: r.listener.clone(),
                trial: r.trial.clone(),
                condition: c.clone(),
                score,
                kept,
            })
        })
        .collect();
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(ResultsExport {
        responses: responses.len(),
        kept_responses: screening.kept.len(),
        stats,
        excluded: screening.excluded,
        raw,
        warnings,
    })
}

pub fn export_results(log_path: impl AsRef<Path>, policy: &ScreeningPolicy) -> Result<ResultsExport> {
    export_results_from_bytes(&std::fs::read(log_path)?, policy)
}

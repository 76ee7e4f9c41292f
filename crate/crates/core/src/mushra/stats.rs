use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{MushraError, MushraResponse, Result, REFERENCE_CONDITION};
use crate::audio::AnchorKind;

pub const STATS_CSV_HEADER: &str = "condition,n,median,q1,q3,mean,ci_low,ci_high";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionStats {
    pub condition: String,
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl ConditionStats {
    pub fn ci_half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }
}

/// Quantile of sorted data with linear interpolation between order
/// statistics at position `(n - 1) p`.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Summary of one condition's pooled scores with a Student-t 95% interval.
pub fn condition_stats(condition: &str, scores: &[f64]) -> Result<ConditionStats> {
    let n = scores.len();
    if n < 2 {
        return Err(MushraError::InsufficientData {
            condition: condition.to_string(),
            n,
        });
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let var = sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    let half = t * var.sqrt() / (n as f64).sqrt();
    Ok(ConditionStats {
        condition: condition.to_string(),
        n,
        median: quantile(&sorted, 0.5),
        q1: quantile(&sorted, 0.25),
        q3: quantile(&sorted, 0.75),
        mean,
        ci_low: mean - half,
        ci_high: mean + half,
    })
}

fn display_rank(condition: &str) -> u8 {
    if condition == REFERENCE_CONDITION {
        0
    } else if AnchorKind::ALL.iter().any(|k| k.name() == condition) {
        2
    } else {
        1
    }
}

/// Pools scores per condition over all listeners and items. Output order:
/// reference, systems alphabetically, then anchors.
pub fn aggregate(responses: &[MushraResponse]) -> Result<Vec<ConditionStats>> {
    let mut pooled: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in responses {
        for (c, &s) in &r.scores {
            pooled.entry(c.as_str()).or_default().push(s as f64);
        }
    }
    let mut names: Vec<&str> = pooled.keys().copied().collect();
    names.sort_by_key(|n| (display_rank(n), *n));
    names.into_iter().map(|n| condition_stats(n, &pooled[n])).collect()
}

pub fn write_stats_csv<W: Write>(stats: &[ConditionStats], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{STATS_CSV_HEADER}")?;
    for s in stats {
        writeln!(
            out,
            "{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
            s.condition, s.n, s.median, s.q1, s.q3, s.mean, s.ci_low, s.ci_high
        )?;
    }
    Ok(())
}

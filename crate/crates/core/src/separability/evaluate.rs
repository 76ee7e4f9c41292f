use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{lda_fit, split_dataset, Result, SplitSpec};
use crate::embeddings::{fit_standardizer, ClassLabel, EmbeddingDataset, EmbeddingSource};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerClassAccuracy {
    pub real: f64,
    pub fake: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub label: ClassLabel,
    pub score: f64,
}

/// Outcome of one split/standardize/fit/test run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparabilityReport {
    pub accuracy: f64,
    pub per_class: PerClassAccuracy,
    pub seed: u64,
    pub train_fraction: f64,
    pub lambda: f64,
    pub source: EmbeddingSource,
    pub n_train: usize,
    pub n_test: usize,
    /// True when the classifier fell back to a constant prediction.
    pub degenerate: bool,
    /// Test-set discriminant scores, in test order.
    pub projections: Vec<Projection>,
}

impl SeparabilityReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `label,score` rows for histogram plotting.
    pub fn write_projections_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["label", "score"])?;
        for p in &self.projections {
            w.write_record([p.label.to_string(), p.score.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Split, standardize with train statistics, fit LDA, score the held-out part.
pub fn evaluate(dataset: &EmbeddingDataset, spec: &SplitSpec, lambda: f64) -> Result<SeparabilityReport> {
    let (train, test) = split_dataset(dataset, spec)?;
    let standardizer = fit_standardizer(&train)?;
    let train = standardizer.apply(&train)?;
    let test = standardizer.apply(&test)?;
    let model = lda_fit(&train, lambda)?;
    let scores = model.project(test.matrix().view())?;

    let mut correct = [0usize; 2];
    let mut totals = [0usize; 2];
    let mut projections = Vec::with_capacity(test.len());
    for (&score, &label) in scores.iter().zip(test.labels()) {
        totals[label.index()] += 1;
        if model.classify_score(score) == label {
            correct[label.index()] += 1;
        }
        projections.push(Projection { label, score });
    }
    let frac = |c: usize, t: usize| if t == 0 { 0.0 } else { c as f64 / t as f64 };
    Ok(SeparabilityReport {
        accuracy: frac(correct[0] + correct[1], test.len()),
        per_class: PerClassAccuracy {
            real: frac(correct[0], totals[0]),
            fake: frac(correct[1], totals[1]),
        },
        seed: spec.seed,
        train_fraction: spec.train_fraction,
        lambda,
        source: dataset.source(),
        n_train: train.len(),
        n_test: test.len(),
        degenerate: model.fallback.is_some(),
        projections,
    })
}

/// Reports for several split seeds plus their mean and sample standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSweep {
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub reports: Vec<SeparabilityReport>,
}

pub fn evaluate_seeds(dataset: &EmbeddingDataset, train_fraction: f64, seeds: &[u64], lambda: f64) -> Result<SeedSweep> {
    let reports = seeds
        .iter()
        .map(|&seed| evaluate(dataset, &SplitSpec::new(train_fraction, seed)?, lambda))
        .collect::<Result<Vec<_>>>()?;
    let n = reports.len() as f64;
    let mean = reports.iter().map(|r| r.accuracy).sum::<f64>() / n;
    let std = if reports.len() > 1 {
        (reports.iter().map(|r| (r.accuracy - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(SeedSweep {
        mean_accuracy: mean,
        std_accuracy: std,
        reports,
    })
}

/// Accuracy grid with one row per model and one column per task, as
/// percentages; missing cells print as `--`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AccuracyTable {
    models: Vec<String>,
    tasks: Vec<String>,
    cells: BTreeMap<(String, String), f64>,
}

impl AccuracyTable {
    pub fn insert(&mut self, model: &str, task: &str, accuracy: f64) {
        if !self.models.iter().any(|m| m == model) {
            self.models.push(model.to_string());
        }
        if !self.tasks.iter().any(|t| t == task) {
            self.tasks.push(task.to_string());
        }
        self.cells.insert((model.to_string(), task.to_string()), accuracy);
    }

    pub fn get(&self, model: &str, task: &str) -> Option<f64> {
        self.cells.get(&(model.to_string(), task.to_string())).copied()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["model".to_string()];
        header.extend(self.tasks.iter().cloned());
        w.write_record(&header)?;
        for model in &self.models {
            let mut row = vec![model.clone()];
            for task in &self.tasks {
                row.push(match self.get(model, task) {
                    Some(acc) => format!("{:.1}", 100.0 * acc),
                    None => "--".into(),
                });
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

//! Batch comparison over a manifest of `reference_path,estimate_path` pairs.
//!
//! Optional `model` and `task` columns group pairs into a model x task
//! summary with one LSD and one SNR column per task.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{compare, LsdConfig, MetricReport, MetricsError, Result, Snr};
use crate::audio::read_wav;

#[derive(Debug, Clone, PartialEq, Eq, Deserialize, Serialize)]
pub struct ManifestRow {
    pub reference_path: PathBuf,
    pub estimate_path: PathBuf,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub task: Option<String>,
}

/// Reads a manifest; relative paths resolve against the manifest's directory.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRow>> {
    let path = path.as_ref();
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    for required in ["reference_path", "estimate_path"] {
        if !headers.iter().any(|h| h == required) {
            return Err(MetricsError::Manifest(format!("missing `{required}` column")));
        }
    }
    let mut rows = Vec::new();
    for row in reader.deserialize() {
        let mut row: ManifestRow = row?;
        for p in [&mut row.reference_path, &mut row.estimate_path] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        row.model = row.model.filter(|m| !m.is_empty());
        row.task = row.task.filter(|t| !t.is_empty());
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchResult {
    pub rows: Vec<ManifestRow>,
    pub reports: Vec<MetricReport>,
    pub mean_snr_db: Snr,
    pub mean_lsd: f64,
}

fn mean_snr<'a>(values: impl Iterator<Item = &'a Snr>) -> Snr {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values {
        match v {
            Snr::Db(db) => {
                sum += db;
                n += 1;
            }
            Snr::Unbounded => return Snr::Unbounded,
        }
    }
    Snr::Db(if n == 0 { f64::NAN } else { sum / n as f64 })
}

fn load(path: &Path) -> Result<crate::audio::AudioClip> {
    read_wav(path).map_err(|source| MetricsError::File {
        path: path.display().to_string(),
        source,
    })
}

/// Compares every pair on `workers` threads; output order follows the manifest.
pub fn run_batch(rows: Vec<ManifestRow>, config: &LsdConfig, workers: usize) -> Result<BatchResult> {
    if rows.is_empty() {
        return Err(MetricsError::Manifest("no pairs listed".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| MetricsError::Manifest(e.to_string()))?;
    let reports = pool.install(|| {
        rows.par_iter()
            .map(|row| {
                let reference = load(&row.reference_path)?;
                let estimate = load(&row.estimate_path)?;
                compare(
                    &row.reference_path.display().to_string(),
                    &reference,
                    &row.estimate_path.display().to_string(),
                    &estimate,
                    config,
                )
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mean_lsd = reports.iter().map(|r| r.lsd).sum::<f64>() / reports.len() as f64;
    let mean_snr_db = mean_snr(reports.iter().map(|r| &r.snr_db));
    Ok(BatchResult {
        rows,
        reports,
        mean_snr_db,
        mean_lsd,
    })
}

impl BatchResult {
    /// One row per pair followed by a `mean` row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["reference", "estimate", "model", "task", "snr_db", "snr_gain_compensated_db", "lsd"])?;
        for (row, r) in self.rows.iter().zip(&self.reports) {
            w.write_record([
                r.reference.as_str(),
                r.estimate.as_str(),
                row.model.as_deref().unwrap_or(""),
                row.task.as_deref().unwrap_or(""),
                &r.snr_db.to_string(),
                &r.snr_gain_compensated_db.to_string(),
                &format!("{:.6}", r.lsd),
            ])?;
        }
        let mean_comp = mean_snr(self.reports.iter().map(|r| &r.snr_gain_compensated_db));
        w.write_record([
            "mean",
            "",
            "",
            "",
            &self.mean_snr_db.to_string(),
            &mean_comp.to_string(),
            &format!("{:.6}", self.mean_lsd),
        ])?;
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("batch result serializes")
    }

    /// Model x task means; pairs without a model or task are grouped under `-`.
    pub fn table(&self) -> MetricTable {
        let mut table = MetricTable::default();
        for (row, r) in self.rows.iter().zip(&self.reports) {
            let model = row.model.clone().unwrap_or_else(|| "-".into());
            let task = row.task.clone().unwrap_or_else(|| "-".into());
            table.push(&model, &task, r);
        }
        table
    }
}

/// Per-model, per-task means in the LSD/SNR column-pair layout.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricTable {
    models: Vec<String>,
    tasks: Vec<String>,
    cells: Vec<(String, String, Vec<Snr>, Vec<f64>)>,
}

impl MetricTable {
    fn push(&mut self, model: &str, task: &str, report: &MetricReport) {
        if !self.models.iter().any(|m| m == model) {
            self.models.push(model.into());
        }
        if !self.tasks.iter().any(|t| t == task) {
            self.tasks.push(task.into());
        }
        match self.cells.iter_mut().find(|c| c.0 == model && c.1 == task) {
            Some(cell) => {
                cell.2.push(report.snr_db);
                cell.3.push(report.lsd);
            }
            None => self.cells.push((model.into(), task.into(), vec![report.snr_db], vec![report.lsd])),
        }
    }

    /// Mean `(lsd, snr)` for a cell.
    pub fn get(&self, model: &str, task: &str) -> Option<(f64, Snr)> {
        self.cells
            .iter()
            .find(|c| c.0 == model && c.1 == task)
            .map(|c| (c.3.iter().sum::<f64>() / c.3.len() as f64, mean_snr(c.2.iter())))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["model".to_string()];
        for t in &self.tasks {
            header.push(format!("LSD {t}"));
            header.push(format!("SNR {t}"));
        }
        w.write_record(&header)?;
        for model in &self.models {
            let mut record = vec![model.clone()];
            for task in &self.tasks {
                match self.get(model, task) {
                    Some((lsd, snr)) => {
                        record.push(format!("{lsd:.1}"));
                        record.push(match snr {
                            Snr::Db(v) => format!("{v:.1}"),
                            Snr::Unbounded => "inf".into(),
                        });
                    }
                    None => {
                        record.push("--".into());
                        record.push("--".into());
                    }
                }
            }
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{write_wav, AudioClip, WavFormat};

    #[test]
    fn manifest_batch_and_tables() {
        let dir = tempfile::tempdir().unwrap();
        // broadband so every bin sits far above the log floor
        let y = AudioClip::new((0..4096u64).map(|i| ((i * 2_654_435_761) % 1000) as f64 / 2000.0 - 0.25).collect(), 16000)
            .unwrap();
        let half = y.scaled(0.5).unwrap();
        write_wav(&y, dir.path().join("ref.wav"), WavFormat::Float32).unwrap();
        write_wav(&half, dir.path().join("half.wav"), WavFormat::Float32).unwrap();
        let manifest = dir.path().join("pairs.csv");
        std::fs::write(
            &manifest,
            "reference_path,estimate_path,model,task\nref.wav,half.wav,A,t1\nref.wav,ref.wav,B,t1\n",
        )
        .unwrap();
        let rows = read_manifest(&manifest).unwrap();
        assert!(rows[0].reference_path.is_absolute());
        let result = run_batch(rows, &LsdConfig::default(), 2).unwrap();
        // halving: 10 log10(1 / 0.25) dB, LSD = ln 4
        let snr = result.reports[0].snr_db.db().unwrap();
        assert!((snr - 10.0 * 4f64.log10()).abs() < 1e-5);
        assert!((result.reports[0].lsd - 4f64.ln()).abs() < 1e-5);
        assert_eq!(result.mean_snr_db, Snr::Unbounded);

        let mut csv_out = Vec::new();
        result.write_csv(&mut csv_out).unwrap();
        let text = String::from_utf8(csv_out).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().last().unwrap().starts_with("mean,"));

        let mut table = Vec::new();
        result.table().write_csv(&mut table).unwrap();
        let text = String::from_utf8(table).unwrap();
        assert_eq!(text.lines().next().unwrap(), "model,LSD t1,SNR t1");
        assert_eq!(text.lines().nth(1).unwrap(), "A,1.4,6.0");
        assert_eq!(text.lines().nth(2).unwrap(), "B,0.0,inf");
    }

    #[test]
    fn manifest_without_columns_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = dir.path().join("pairs.csv");
        std::fs::write(&manifest, "a,b\nx,y\n").unwrap();
        assert!(matches!(read_manifest(&manifest), Err(MetricsError::Manifest(_))));
    }

    #[test]
    fn missing_audio_names_the_file() {
        let rows = vec![ManifestRow {
            reference_path: "/nope/a.wav".into(),
            estimate_path: "/nope/b.wav".into(),
            model: None,
            task: None,
        }];
        let err = run_batch(rows, &LsdConfig::default(), 1).unwrap_err();
        assert!(err.to_string().contains("/nope/a.wav"));
    }
}

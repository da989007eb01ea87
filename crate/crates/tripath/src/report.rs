//! Plain-text outputs: training curves as CSV, metrics as JSON.

use std::fs;
use std::path::Path;

use serde::Serialize;
use tripath_core::eval::MetricsReport;
use tripath_core::optim::TrainHistory;
use tripath_core::rbm::EpochRecord;

use crate::error::{CliError, Result};

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::format(path, format!("{other:?}")),
    }
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Columns `iteration,loss,image_term,label_term,seconds`; losses are means
/// per example.
pub fn write_history(path: impl AsRef<Path>, history: &TrainHistory) -> Result<()> {
    let rows = history.records.iter().map(|r| {
        vec![
            r.iteration.to_string(),
            r.loss.to_string(),
            r.image_term.to_string(),
            r.label_term.to_string(),
            format!("{:.3}", r.seconds),
        ]
    });
    write_csv(
        path.as_ref(),
        &["iteration", "loss", "image_term", "label_term", "seconds"],
        rows,
    )
}

/// Columns `layer,epoch,recon_ce`.
pub fn write_pretrain_curve(path: impl AsRef<Path>, curve: &[EpochRecord]) -> Result<()> {
    let rows = curve
        .iter()
        .map(|r| vec![r.layer.to_string(), r.epoch.to_string(), r.recon_ce.to_string()]);
    write_csv(path.as_ref(), &["layer", "epoch", "recon_ce"], rows)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::format(path, e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::format(path, e.to_string()))
}

/// Joint model and pipeline baseline scored on the same test corpus.
#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct Comparison {
    pub corpus_sha256: String,
    pub joint: MetricsReport,
    pub pipeline: MetricsReport,
}

#[cfg(test)]
mod tests {
    use super::*;
    use tripath_core::optim::HistoryRecord;

    #[test]
    fn history_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        let rec = |iteration, loss| HistoryRecord {
            iteration,
            loss,
            image_term: loss - 0.25,
            label_term: 0.25,
            seconds: 1.5,
        };
        let h = TrainHistory {
            records: vec![rec(0, 2.0), rec(1, 0.1 + 0.2)],
        };
        write_history(&path, &h).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "iteration,loss,image_term,label_term,seconds");
        assert_eq!(lines[1], "0,2,1.75,0.25,1.500");
        // Shortest round-trip formatting keeps every bit.
        let loss: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(loss, 0.1 + 0.2);
    }

    #[test]
    fn metrics_json_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let m = MetricsReport {
            psnr_db: 20.0,
            noisy_floor_db: 9.5,
            error_rate: 0.25,
            n: 4,
            confusion: vec![vec![2, 0], vec![1, 1]],
        };
        write_json(&path, &m).unwrap();
        let v: serde_json::Value = read_json(&path).unwrap();
        for key in ["psnr_db", "noisy_floor_db", "error_rate", "n", "confusion"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(read_json::<MetricsReport>(&path).unwrap(), m);
    }
}

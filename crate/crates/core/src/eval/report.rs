use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{ExperimentReport, Metrics, Regime};
use crate::detectors::DetectorKind;
use crate::error::{Error, Result};

pub const RESULT_FORMAT_VERSION: u32 = 1;

/// Experiment results as written to disk, tagged with the hashes of the
/// configuration and dataset they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentFile {
    pub format_version: u32,
    pub config_hash: String,
    pub manifest_hash: String,
    pub report: ExperimentReport,
}

impl ExperimentFile {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::format(path, e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: Self = serde_json::from_str(&text).map_err(|e| Error::format(path, e))?;
        if file.format_version != RESULT_FORMAT_VERSION {
            return Err(Error::format(path, format!("result format {}", file.format_version)));
        }
        Ok(file)
    }

    /// Fails unless both hashes match the expected ones.
    pub fn check(&self, config_hash: &str, manifest_hash: &str) -> Result<()> {
        check_hashes(&self.config_hash, &self.manifest_hash, config_hash, manifest_hash)
    }
}

pub fn check_hashes(config: &str, manifest: &str, want_config: &str, want_manifest: &str) -> Result<()> {
    if config != want_config {
        return Err(Error::HashMismatch(format!(
            "config hash {} differs from the current {}",
            short(config),
            short(want_config)
        )));
    }
    if manifest != want_manifest {
        return Err(Error::HashMismatch(format!(
            "manifest hash {} differs from the current {}",
            short(manifest),
            short(want_manifest)
        )));
    }
    Ok(())
}

fn short(h: &str) -> &str {
    &h[..h.len().min(12)]
}

/// A delimiter-separated result table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File stem, e.g. `nn_binary`.
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

fn fmt_lead(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.4}"))
}

fn binary_table(report: &ExperimentReport, detector: DetectorKind) -> Table {
    let mut rows: Vec<Vec<String>> = report
        .folds
        .iter()
        .map(|&f| {
            let mut row = vec![(f + 1).to_string()];
            for r in Regime::BINARY {
                row.push(fmt_lead(report.cell(f, r, detector).and_then(|c| c.test?.avg_lead_time)));
            }
            row
        })
        .collect();
    let mut avg = vec!["average".to_string()];
    for r in Regime::BINARY {
        avg.push(fmt_lead(report.aggregate(r, detector).avg_lead_time));
    }
    rows.push(avg);
    Table {
        name: format!("{}_binary", detector.as_str()),
        header: ["fold", "abrupt_only_avg_lead_time", "incipient_only_avg_lead_time", "both_avg_lead_time"]
            .map(String::from)
            .to_vec(),
        rows,
    }
}

fn multiclass_table(report: &ExperimentReport, detector: DetectorKind) -> Table {
    let mut rows: Vec<Vec<String>> = report
        .folds
        .iter()
        .map(|&f| {
            vec![
                (f + 1).to_string(),
                fmt_lead(report.multiclass_cell(f, detector).and_then(|c| c.test?.avg_lead_time)),
                fmt_lead(report.cell(f, Regime::Both, detector).and_then(|c| c.test?.avg_lead_time)),
            ]
        })
        .collect();
    rows.push(vec![
        "average".to_string(),
        fmt_lead(report.aggregate_multiclass(detector).avg_lead_time),
        fmt_lead(report.aggregate(Regime::Both, detector).avg_lead_time),
    ]);
    Table {
        name: format!("{}_multiclass", detector.as_str()),
        header: ["fold", "multiclass_avg_lead_time", "binary_avg_lead_time"]
            .map(String::from)
            .to_vec(),
        rows,
    }
}

/// The four lead-time tables: binary NN, binary SVM, multiclass NN and
/// multiclass SVM. Fold rows are 1-based; the last row is the
/// trajectory-weighted average.
pub fn result_tables(report: &ExperimentReport) -> Vec<Table> {
    let mut out = Vec::new();
    for d in [DetectorKind::Nn, DetectorKind::Svm] {
        out.push(binary_table(report, d));
    }
    for d in [DetectorKind::Nn, DetectorKind::Svm] {
        out.push(multiclass_table(report, d));
    }
    out
}

fn metrics_json(m: &Metrics) -> Value {
    json!({
        "n_safe": m.n_safe,
        "n_fall": m.n_fall,
        "fpr": m.fpr,
        "fnr": m.fnr,
        "avg_lead_time": m.avg_lead_time,
        "n_detected": m.n_detected,
    })
}

/// Machine-readable summary: per-fold and aggregate metrics of every column,
/// identifier statistics, cell errors and the echoed configuration.
pub fn summary_json(report: &ExperimentReport, run_config: &Value, config_hash: &str, manifest_hash: &str) -> Value {
    let mut columns = Vec::new();
    for d in [DetectorKind::Nn, DetectorKind::Svm] {
        for r in Regime::BINARY {
            let folds: Vec<Value> = report
                .cells
                .iter()
                .filter(|c| c.detector == d && c.regime == r)
                .map(|c| {
                    json!({
                        "fold": c.fold + 1,
                        "training_lead_time": c.training_lead_time,
                        "test": c.test.as_ref().map(metrics_json),
                        "error": c.error,
                    })
                })
                .collect();
            if folds.is_empty() {
                continue;
            }
            columns.push(json!({
                "detector": d.as_str(),
                "regime": r.as_str(),
                "folds": folds,
                "aggregate": metrics_json(&report.aggregate(r, d)),
            }));
        }
        let folds: Vec<Value> = report
            .multiclass
            .iter()
            .filter(|c| c.detector == d)
            .map(|c| {
                json!({
                    "fold": c.fold + 1,
                    "incipient_training_lead_time": c.incipient_lead,
                    "abrupt_training_lead_time": c.abrupt_lead,
                    "test": c.test.as_ref().map(metrics_json),
                    "identifier": c.identifier,
                    "error": c.error,
                })
            })
            .collect();
        if !folds.is_empty() {
            columns.push(json!({
                "detector": d.as_str(),
                "regime": Regime::Multiclass.as_str(),
                "folds": folds,
                "aggregate": metrics_json(&report.aggregate_multiclass(d)),
            }));
        }
    }
    json!({
        "config_hash": config_hash,
        "manifest_hash": manifest_hash,
        "config": run_config,
        "columns": columns,
        "errors": report.errors(),
    })
}

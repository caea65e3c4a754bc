//! Fall detectors over sliding feature windows and the model container.

mod monitor;
mod multiclass;
mod svm;
mod ward;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{fit_scaler, FeatureWindow, FrameSource, ScalerParams};
use crate::error::{Error, Result};

pub use monitor::{monitor, Monitor, MonitorRule};
pub use multiclass::{switch_streams, Hypothesis, Latch, MulticlassModel, MulticlassStep};
pub use svm::{rbf, scale_gamma, svm_train, SvmModel, SvmParams, SvmSolution};
pub use ward::{correlation_matrix, nn_train, regularized_inverse, sse, ward_effort, ward_effort_full, window_effort, NnModel};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Decision value of one window and its verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub value: f64,
    pub faulty: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorKind {
    Nn,
    Svm,
}

impl DetectorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DetectorKind::Nn => "nn",
            DetectorKind::Svm => "svm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DetectorModel {
    Nn(NnModel),
    Svm(SvmModel),
}

/// Detector hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Diagonal regularization of the Ward correlation matrix.
    pub lambda: f64,
    pub svm: SvmParams,
    /// SVM training windows are subsampled to at most this many.
    pub max_train_windows: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-6,
            svm: SvmParams::default(),
            max_train_windows: 3000,
        }
    }
}

/// A detector together with the scaler and frame source it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedDetector {
    pub source: FrameSource,
    pub n_window: usize,
    pub scaler: ScalerParams,
    pub training_lead_time: Option<f64>,
    pub model: DetectorModel,
}

impl TrainedDetector {
    pub fn kind(&self) -> DetectorKind {
        match self.model {
            DetectorModel::Nn(_) => DetectorKind::Nn,
            DetectorModel::Svm(_) => DetectorKind::Svm,
        }
    }

    /// Scores an unscaled, flattened window.
    pub fn score_raw(&self, raw: &[f64]) -> Score {
        let mut data = raw.to_vec();
        self.scaler.transform(&mut data);
        self.score_scaled(&data)
    }

    pub fn score_scaled(&self, data: &[f64]) -> Score {
        match &self.model {
            DetectorModel::Nn(m) => m.score_data(data),
            DetectorModel::Svm(m) => m.score_data(data),
        }
    }

    /// Decision boundary on the value axis (Ward threshold or SVM zero).
    pub fn threshold(&self) -> f64 {
        match &self.model {
            DetectorModel::Nn(m) => m.threshold,
            DetectorModel::Svm(_) => 0.0,
        }
    }
}

/// Evenly spaced picks per class: the minority class keeps up to half the
/// budget, the majority fills the rest.
pub fn balanced_subsample(windows: &[FeatureWindow], max: usize) -> Vec<&FeatureWindow> {
    if windows.len() <= max {
        return windows.iter().collect();
    }
    let (pos, neg): (Vec<&FeatureWindow>, Vec<&FeatureWindow>) = windows.iter().partition(|w| w.label > 0);
    let (minor, major) = if pos.len() <= neg.len() { (pos, neg) } else { (neg, pos) };
    let keep_minor = minor.len().min(max / 2);
    let keep_major = (max - keep_minor).min(major.len());
    let mut out = pick_evenly(&minor, keep_minor);
    out.extend(pick_evenly(&major, keep_major));
    out
}

fn pick_evenly<'a>(v: &[&'a FeatureWindow], k: usize) -> Vec<&'a FeatureWindow> {
    (0..k).map(|i| v[i * v.len() / k]).collect()
}

/// Fits the scaler on all training windows and trains the detector. The
/// Ward model learns from the +1 windows only.
pub fn train_detector(
    kind: DetectorKind,
    windows: &[FeatureWindow],
    source: FrameSource,
    config: &DetectorConfig,
    training_lead_time: Option<f64>,
) -> Result<TrainedDetector> {
    let first = windows
        .first()
        .ok_or_else(|| Error::InsufficientData("no training windows".into()))?;
    let n_window = first.m;
    let scaler = fit_scaler(windows);
    let model = match kind {
        DetectorKind::Nn => {
            let safe: Vec<FeatureWindow> = windows.iter().filter(|w| w.label > 0).map(|w| scaler.apply(w)).collect();
            DetectorModel::Nn(nn_train(&safe, config.lambda)?)
        }
        DetectorKind::Svm => {
            let picked = balanced_subsample(windows, config.max_train_windows);
            let scaled: Vec<FeatureWindow> = picked.iter().map(|w| scaler.apply(w)).collect();
            let x: Vec<&[f64]> = scaled.iter().map(|w| w.data.as_slice()).collect();
            let y: Vec<f64> = scaled.iter().map(|w| f64::from(w.label)).collect();
            DetectorModel::Svm(svm_train(&x, &y, &config.svm)?.model)
        }
    };
    Ok(TrainedDetector {
        source,
        n_window,
        scaler,
        training_lead_time,
        model,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
#[allow(clippy::large_enum_variant)]
pub enum StoredModel {
    Binary(TrainedDetector),
    Multiclass(MulticlassModel),
}

/// Versioned on-disk model container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub config_hash: String,
    pub manifest_hash: String,
    /// Fault regime the model was trained for.
    pub regime: String,
    pub fold: usize,
    pub model: StoredModel,
}

impl ModelFile {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::format(path, e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ModelFile = serde_json::from_str(&text).map_err(|e| Error::format(path, e))?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::format(
                path,
                format!("model format {} (expected {MODEL_FORMAT_VERSION})", file.format_version),
            ));
        }
        Ok(file)
    }
}

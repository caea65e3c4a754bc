use serde::{Deserialize, Serialize};

use super::FeatureWindow;

/// Per-feature min-max scaling fitted on raw frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// Clip transformed values to [0, 1].
    #[serde(default)]
    pub clip: bool,
}

impl ScalerParams {
    pub fn dim(&self) -> usize {
        self.min.len()
    }

    /// Merges per-dimension extrema of a batch of frames.
    pub fn update<'a>(&mut self, frames: impl IntoIterator<Item = &'a [f64]>) {
        for frame in frames {
            for (j, &v) in frame.iter().enumerate() {
                self.min[j] = self.min[j].min(v);
                self.max[j] = self.max[j].max(v);
            }
        }
    }

    pub fn empty(d: usize) -> Self {
        Self {
            min: vec![f64::INFINITY; d],
            max: vec![f64::NEG_INFINITY; d],
            clip: false,
        }
    }

    /// Scales a row-major block of frames in place; constant dimensions map to 0.
    pub fn transform(&self, data: &mut [f64]) {
        let d = self.dim();
        for frame in data.chunks_exact_mut(d) {
            for (j, v) in frame.iter_mut().enumerate() {
                let span = self.max[j] - self.min[j];
                let mut s = if span > 0.0 { (*v - self.min[j]) / span } else { 0.0 };
                if self.clip {
                    s = s.clamp(0.0, 1.0);
                }
                *v = s;
            }
        }
    }

    pub fn apply(&self, window: &FeatureWindow) -> FeatureWindow {
        let mut w = window.clone();
        self.transform(&mut w.data);
        w
    }
}

/// Fits the scaler on every frame of the given windows.
pub fn fit_scaler(windows: &[FeatureWindow]) -> ScalerParams {
    let d = windows.first().map_or(0, |w| w.d);
    let mut s = ScalerParams::empty(d);
    s.update(windows.iter().flat_map(|w| w.frames()));
    s
}

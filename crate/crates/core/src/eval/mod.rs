//! Trajectory-level metrics, streaming evaluation, the training-lead-time
//! grid search and the fold × regime × detector experiment.

mod experiment;
mod report;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::PreparedTrajectory;
use crate::detectors::{Hypothesis, Latch, Monitor, MonitorRule, MulticlassModel, Score, TrainedDetector};
use crate::error::{Error, Result};
use crate::scenario::{FaultKind, Outcome};

pub use experiment::{
    fold_sets, latch_window, required_sources, run_binary_cell, run_experiment, run_multiclass_cell, split_plan, stream_multiclass, train_binary,
    training_windows, CellReport, ExperimentConfig, ExperimentReport, FoldSets, GridEvalSet, IdentifierStats,
    MulticlassCell, MulticlassTrajectory, PairCandidate, PreparedData, Regime,
};
pub use report::{check_hashes, result_tables, summary_json, ExperimentFile, Table, RESULT_FORMAT_VERSION};

/// Time between a declaration and the fall.
pub fn lead_time(declared: f64, fall: f64) -> f64 {
    fall - declared
}

/// Outcome of streaming one trajectory through a detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryResult {
    pub id: u64,
    pub kind: FaultKind,
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fall_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub declared: Option<f64>,
}

impl TrajectoryResult {
    pub fn lead_time(&self) -> Option<f64> {
        Some(lead_time(self.declared?, self.fall_time?))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n_safe: usize,
    pub n_fall: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub fpr: f64,
    pub fnr: f64,
    /// Sum of lead times over detected falls.
    pub lead_time_sum: f64,
    pub n_detected: usize,
    /// Mean lead time over detected falls; absent when none was detected.
    pub avg_lead_time: Option<f64>,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl Metrics {
    fn finish(mut self) -> Self {
        self.fpr = ratio(self.false_positives, self.n_safe);
        self.fnr = ratio(self.false_negatives, self.n_fall);
        self.avg_lead_time = (self.n_detected > 0).then(|| self.lead_time_sum / self.n_detected as f64);
        self
    }

    pub fn from_results(results: &[TrajectoryResult]) -> Self {
        let mut m = Metrics::default();
        for r in results {
            match (r.outcome, r.declared) {
                (Outcome::Safe, d) => {
                    m.n_safe += 1;
                    m.false_positives += usize::from(d.is_some());
                }
                (Outcome::Fall, None) => {
                    m.n_fall += 1;
                    m.false_negatives += 1;
                }
                (Outcome::Fall, Some(_)) => {
                    m.n_fall += 1;
                    m.n_detected += 1;
                    m.lead_time_sum += r.lead_time().unwrap_or(0.0);
                }
            }
        }
        m.finish()
    }

    /// Trajectory-weighted pooling of several evaluations.
    pub fn aggregate<'a>(parts: impl IntoIterator<Item = &'a Metrics>) -> Self {
        let mut m = Metrics::default();
        for p in parts {
            m.n_safe += p.n_safe;
            m.n_fall += p.n_fall;
            m.false_positives += p.false_positives;
            m.false_negatives += p.false_negatives;
            m.lead_time_sum += p.lead_time_sum;
            m.n_detected += p.n_detected;
        }
        m.finish()
    }

    pub fn meets(&self, bounds: &RateBounds) -> bool {
        self.fpr <= bounds.fpr_max + 1e-12 && self.fnr <= bounds.fnr_max + 1e-12
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBounds {
    pub fpr_max: f64,
    pub fnr_max: f64,
}

impl Default for RateBounds {
    fn default() -> Self {
        Self {
            fpr_max: 0.0,
            fnr_max: 0.0,
        }
    }
}

/// Evenly spaced candidate training lead times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            start: 0.0,
            stop: 2.0,
            step: 0.1,
        }
    }
}

impl GridSpec {
    pub fn candidates(&self) -> Vec<f64> {
        if self.step <= 0.0 || self.stop < self.start {
            return vec![self.start];
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        // Rounded to 1e-9 so 0.1-steps print and compare cleanly.
        (0..=n)
            .map(|i| ((self.start + i as f64 * self.step) * 1e9).round() / 1e9)
            .collect()
    }
}

/// Streams windows through `score` until the monitor fires; returns the end
/// sample index of the declaring window.
pub fn first_declaration(
    prep: &PreparedTrajectory,
    n_window: usize,
    rule: MonitorRule,
    mut score: impl FnMut(usize, &[f64]) -> Score,
) -> Option<usize> {
    let mut monitor = Monitor::new(rule);
    for (w, end) in (n_window - 1..prep.len()).enumerate() {
        let s = score(w, &prep.window_data(end, n_window));
        if monitor.push(s.faulty) {
            return Some(end);
        }
    }
    None
}

/// Decision value of every window of a trajectory.
pub fn decision_series(detector: &TrainedDetector, prep: &PreparedTrajectory) -> Vec<Score> {
    let n = detector.n_window;
    (n - 1..prep.len())
        .map(|end| detector.score_raw(&prep.window_data(end, n)))
        .collect()
}

pub fn result_for(prep: &PreparedTrajectory, declared_index: Option<usize>) -> TrajectoryResult {
    TrajectoryResult {
        id: prep.id,
        kind: prep.kind,
        outcome: prep.outcome,
        fall_time: prep.fall_time,
        declared: declared_index.map(|i| prep.times[i]),
    }
}

/// Streams every trajectory through a binary detector.
pub fn evaluate(detector: &TrainedDetector, trajs: &[&PreparedTrajectory], rule: MonitorRule) -> Vec<TrajectoryResult> {
    trajs
        .par_iter()
        .map(|p| {
            let idx = first_declaration(p, detector.n_window, rule, |_, w| detector.score_raw(w));
            result_for(p, idx)
        })
        .collect()
}

/// One row of a plot-ready decision series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub end_time: f64,
    pub value: f64,
    pub threshold: f64,
    pub faulty: bool,
    /// Active hypothesis of a multiclass pipeline.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hypothesis: Option<Hypothesis>,
    /// Raw incipient and abrupt detector values, logged for audit.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub incipient_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub abrupt_value: Option<f64>,
}

pub fn binary_series(detector: &TrainedDetector, prep: &PreparedTrajectory) -> Vec<SeriesPoint> {
    let n = detector.n_window;
    decision_series(detector, prep)
        .into_iter()
        .enumerate()
        .map(|(w, s)| SeriesPoint {
            end_time: prep.times[w + n - 1],
            value: s.value,
            threshold: detector.threshold(),
            faulty: s.faulty,
            hypothesis: None,
            incipient_value: None,
            abrupt_value: None,
        })
        .collect()
}

/// Full switching trace of one trajectory; frames of the three sources must
/// come from the same trajectory.
pub fn multiclass_series(
    model: &MulticlassModel,
    inc: &PreparedTrajectory,
    abr: &PreparedTrajectory,
    vel: &PreparedTrajectory,
) -> Vec<SeriesPoint> {
    let n = model.incipient.n_window;
    let mut latch = Latch::new();
    (n - 1..inc.len())
        .map(|end| {
            let (iw, aw) = (inc.window_data(end, n), abr.window_data(end, n));
            let step = model.step(&mut latch, &iw, &aw, &vel.window_data(end, n));
            let threshold = match step.hypothesis {
                Hypothesis::Incipient => model.incipient.threshold(),
                Hypothesis::Abrupt => model.abrupt.threshold(),
            };
            SeriesPoint {
                end_time: inc.times[end],
                value: step.score.value,
                threshold,
                faulty: step.score.faulty,
                hypothesis: Some(step.hypothesis),
                incipient_value: Some(model.incipient.score_raw(&iw).value),
                abrupt_value: Some(model.abrupt.score_raw(&aw).value),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub lead_time: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub metrics: Option<Metrics>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub bounds: RateBounds,
    pub candidates: Vec<CandidateResult>,
    pub chosen: Option<f64>,
}

impl GridSearchResult {
    pub fn require(&self) -> Result<f64> {
        self.chosen.ok_or(Error::NoFeasibleLeadTime)
    }
}

/// Evaluates candidates and picks the largest one meeting the bounds. With
/// `exhaustive = false` the search runs from the top of the grid and stops
/// at the first feasible candidate, which selects the same value.
pub fn grid_search_lead_time(
    grid: &[f64],
    bounds: RateBounds,
    exhaustive: bool,
    mut evaluate: impl FnMut(f64) -> Result<Metrics>,
) -> GridSearchResult {
    let mut order: Vec<f64> = grid.to_vec();
    order.sort_by(|a, b| b.total_cmp(a));
    let mut candidates = Vec::new();
    let mut chosen = None;
    for lead in order {
        let r = evaluate(lead);
        let feasible = matches!(&r, Ok(m) if m.meets(&bounds));
        log::debug!("lead {lead:.2}: {r:?}");
        candidates.push(match r {
            Ok(m) => CandidateResult {
                lead_time: lead,
                metrics: Some(m),
                error: None,
            },
            Err(e) => CandidateResult {
                lead_time: lead,
                metrics: None,
                error: Some(e.to_string()),
            },
        });
        if feasible && chosen.is_none() {
            chosen = Some(lead);
            if !exhaustive {
                break;
            }
        }
    }
    candidates.sort_by(|a, b| a.lead_time.total_cmp(&b.lead_time));
    GridSearchResult {
        bounds,
        candidates,
        chosen,
    }
}

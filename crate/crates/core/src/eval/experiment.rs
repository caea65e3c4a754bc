use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    evaluate, first_declaration, grid_search_lead_time, result_for, GridSearchResult, GridSpec, Metrics,
    RateBounds, TrajectoryResult,
};
use crate::dataset::{
    identifier_windows, label_windows, make_splits, prepare_all, FeatureWindow, FrameSource, PreparedTrajectory,
    SplitKind, SplitPlan, StratumKey,
};
use crate::detectors::{
    train_detector, DetectorConfig, DetectorKind, Latch, MonitorRule, MulticlassModel, Score, StoredModel,
    TrainedDetector,
};
use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::params::RobotParams;
use crate::scenario::{Dataset, FaultKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    AbruptOnly,
    IncipientOnly,
    Both,
    Multiclass,
}

impl Regime {
    pub const BINARY: [Regime; 3] = [Regime::AbruptOnly, Regime::IncipientOnly, Regime::Both];

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::AbruptOnly => "abrupt-only",
            Regime::IncipientOnly => "incipient-only",
            Regime::Both => "both",
            Regime::Multiclass => "multiclass",
        }
    }

    pub fn includes(self, kind: FaultKind) -> bool {
        match self {
            Regime::AbruptOnly => kind == FaultKind::Abrupt,
            Regime::IncipientOnly => kind == FaultKind::Incipient,
            Regime::Both | Regime::Multiclass => true,
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Regime::AbruptOnly, Regime::IncipientOnly, Regime::Both, Regime::Multiclass]
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown regime '{s}'")))
    }
}

/// Which trajectories the grid search scores candidates on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridEvalSet {
    Train,
    Validation,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub feature_set: FeatureSet,
    pub multiclass_incipient_features: FeatureSet,
    pub multiclass_abrupt_features: FeatureSet,
    pub n_window: usize,
    pub monitor: MonitorRule,
    pub grid: GridSpec,
    pub bounds: RateBounds,
    pub grid_eval: GridEvalSet,
    /// Score every grid candidate instead of stopping at the first feasible
    /// one from the top.
    pub exhaustive_grid: bool,
    pub detectors: Vec<DetectorKind>,
    pub regimes: Vec<Regime>,
    pub detector: DetectorConfig,
    pub split: SplitKind,
    pub split_seed: u64,
    /// Test folds to run (0-based); all folds of the split when absent.
    pub folds: Option<Vec<usize>>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            feature_set: FeatureSet::Default,
            multiclass_incipient_features: FeatureSet::Default,
            multiclass_abrupt_features: FeatureSet::Default,
            n_window: 10,
            monitor: MonitorRule::default(),
            grid: GridSpec::default(),
            bounds: RateBounds::default(),
            grid_eval: GridEvalSet::Both,
            exhaustive_grid: true,
            detectors: vec![DetectorKind::Nn, DetectorKind::Svm],
            regimes: vec![Regime::AbruptOnly, Regime::IncipientOnly, Regime::Both, Regime::Multiclass],
            detector: DetectorConfig::default(),
            split: SplitKind::KFold,
            split_seed: 0,
            folds: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.monitor.validate()?;
        if self.n_window < 2 {
            return Err(Error::InvalidConfig("n_window must be at least 2".into()));
        }
        let g = &self.grid;
        if !(g.start >= 0.0 && g.stop <= crate::dataset::MAX_LEAD_TIME && g.start <= g.stop && g.step > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "grid must lie in [0, {}] with a positive step",
                crate::dataset::MAX_LEAD_TIME
            )));
        }
        let b = &self.bounds;
        if !((0.0..=1.0).contains(&b.fpr_max) && (0.0..=1.0).contains(&b.fnr_max)) {
            return Err(Error::InvalidConfig("rate bounds must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// One fold × regime × detector cell of the binary experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    /// 0-based test fold.
    pub fold: usize,
    pub regime: Regime,
    pub detector: DetectorKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub grid: Option<GridSearchResult>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub training_lead_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub test: Option<Metrics>,
    #[serde(default)]
    pub trajectories: Vec<TrajectoryResult>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    #[serde(skip)]
    pub model: Option<StoredModel>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IdentifierStats {
    /// Fraction of identifier training windows classified correctly.
    pub train_accuracy: f64,
    pub n_abrupt: usize,
    pub n_latched: usize,
    /// Abrupt runs latched before the push started.
    pub n_latched_early: usize,
    /// Incipient runs that latched at all.
    pub n_incipient_latched: usize,
    /// Mean time from push onset to the latching window, over runs latched
    /// at or after onset.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_delay_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_delay_samples: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairCandidate {
    pub incipient_lead: f64,
    pub abrupt_lead: f64,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassTrajectory {
    #[serde(flatten)]
    pub result: TrajectoryResult,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub latch_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassCell {
    pub fold: usize,
    pub detector: DetectorKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub incipient_lead: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub abrupt_lead: Option<f64>,
    #[serde(default)]
    pub candidates: Vec<PairCandidate>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub test: Option<Metrics>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub identifier: Option<IdentifierStats>,
    #[serde(default)]
    pub trajectories: Vec<MulticlassTrajectory>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    #[serde(skip)]
    pub model: Option<StoredModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub split: SplitPlan,
    pub folds: Vec<usize>,
    pub cells: Vec<CellReport>,
    pub multiclass: Vec<MulticlassCell>,
}

impl ExperimentReport {
    pub fn cell(&self, fold: usize, regime: Regime, detector: DetectorKind) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.fold == fold && c.regime == regime && c.detector == detector)
    }

    pub fn multiclass_cell(&self, fold: usize, detector: DetectorKind) -> Option<&MulticlassCell> {
        self.multiclass.iter().find(|c| c.fold == fold && c.detector == detector)
    }

    /// Trajectory-weighted test metrics of one binary column over all folds.
    pub fn aggregate(&self, regime: Regime, detector: DetectorKind) -> Metrics {
        Metrics::aggregate(
            self.cells
                .iter()
                .filter(|c| c.regime == regime && c.detector == detector)
                .filter_map(|c| c.test.as_ref()),
        )
    }

    pub fn aggregate_multiclass(&self, detector: DetectorKind) -> Metrics {
        Metrics::aggregate(
            self.multiclass
                .iter()
                .filter(|c| c.detector == detector)
                .filter_map(|c| c.test.as_ref()),
        )
    }

    /// Folds the cells of another run into this one; cells already present
    /// are kept.
    pub fn merge(&mut self, other: ExperimentReport) {
        for c in other.cells {
            if self.cell(c.fold, c.regime, c.detector).is_none() {
                self.cells.push(c);
            }
        }
        for c in other.multiclass {
            if self.multiclass_cell(c.fold, c.detector).is_none() {
                self.multiclass.push(c);
            }
        }
        self.folds.extend(other.folds);
        self.folds.sort_unstable();
        self.folds.dedup();
    }

    pub fn errors(&self) -> Vec<String> {
        let binary = self.cells.iter().filter_map(|c| {
            c.error
                .as_ref()
                .map(|e| format!("fold {} {} {}: {e}", c.fold + 1, c.regime.as_str(), c.detector.as_str()))
        });
        let multi = self.multiclass.iter().filter_map(|c| {
            c.error
                .as_ref()
                .map(|e| format!("fold {} multiclass {}: {e}", c.fold + 1, c.detector.as_str()))
        });
        binary.chain(multi).collect()
    }
}

/// Frames of every trajectory for each frame source in use.
pub struct PreparedData {
    sources: HashMap<FrameSource, Vec<PreparedTrajectory>>,
    index: HashMap<u64, usize>,
}

impl PreparedData {
    pub fn new(dataset: &Dataset, sources: &[FrameSource], params: &RobotParams) -> Self {
        let index = dataset
            .trajectories
            .iter()
            .enumerate()
            .map(|(i, t)| (t.id, i))
            .collect();
        let mut map = HashMap::new();
        for &s in sources {
            map.entry(s)
                .or_insert_with(|| prepare_all(&dataset.trajectories, s, params));
        }
        Self { sources: map, index }
    }

    pub fn get(&self, source: FrameSource, id: u64) -> &PreparedTrajectory {
        &self.sources[&source][self.index[&id]]
    }

    pub fn select(&self, source: FrameSource, ids: &[u64]) -> Vec<&PreparedTrajectory> {
        ids.iter().map(|&id| self.get(source, id)).collect()
    }
}

pub fn split_plan(dataset: &Dataset, kind: SplitKind, seed: u64) -> Result<SplitPlan> {
    let entries: Vec<(u64, StratumKey)> = dataset
        .trajectories
        .iter()
        .map(|t| {
            (
                t.id,
                StratumKey {
                    kind: t.kind(),
                    outcome: t.outcome(),
                },
            )
        })
        .collect();
    make_splits(&entries, kind, seed)
}

/// Ids of one fold split into training, grid-evaluation and test sets,
/// restricted to a regime.
#[derive(Debug, Clone)]
pub struct FoldSets {
    pub train: Vec<u64>,
    pub grid_eval: Vec<u64>,
    pub test: Vec<u64>,
}

pub fn fold_sets(plan: &SplitPlan, fold: usize, regime: Regime, grid_eval: GridEvalSet, data: &Dataset) -> FoldSets {
    let roles = plan.roles(fold);
    let keep = |ids: &[u64]| -> Vec<u64> {
        ids.iter()
            .copied()
            .filter(|&id| data.get(id).is_some_and(|t| regime.includes(t.kind())))
            .collect()
    };
    let train = keep(&roles.train);
    let validation = keep(&roles.validation);
    let grid_eval = match grid_eval {
        GridEvalSet::Train => train.clone(),
        GridEvalSet::Validation => validation,
        GridEvalSet::Both => train.iter().copied().chain(validation).collect(),
    };
    FoldSets {
        train,
        grid_eval,
        test: keep(&roles.test),
    }
}

pub fn training_windows(trajs: &[&PreparedTrajectory], lead: f64, n_window: usize) -> Result<Vec<FeatureWindow>> {
    let mut out = Vec::new();
    for t in trajs {
        out.extend(label_windows(t, lead, n_window)?);
    }
    Ok(out)
}

/// Trains a binary detector at a fixed training lead time.
pub fn train_binary(
    kind: DetectorKind,
    train: &[&PreparedTrajectory],
    source: FrameSource,
    lead: f64,
    config: &ExperimentConfig,
) -> Result<TrainedDetector> {
    let windows = training_windows(train, lead, config.n_window)?;
    train_detector(kind, &windows, source, &config.detector, Some(lead))
}

pub fn run_binary_cell(
    data: &PreparedData,
    sets: &FoldSets,
    fold: usize,
    regime: Regime,
    kind: DetectorKind,
    config: &ExperimentConfig,
) -> CellReport {
    let source = FrameSource::Features(config.feature_set);
    let train = data.select(source, &sets.train);
    let grid_eval = data.select(source, &sets.grid_eval);
    let mut cell = CellReport {
        fold,
        regime,
        detector: kind,
        grid: None,
        training_lead_time: None,
        test: None,
        trajectories: Vec::new(),
        error: None,
        model: None,
    };
    let mut models: BTreeMap<u64, TrainedDetector> = BTreeMap::new();
    let grid = grid_search_lead_time(&config.grid.candidates(), config.bounds, config.exhaustive_grid, |lead| {
        let det = train_binary(kind, &train, source, lead, config)?;
        let m = Metrics::from_results(&evaluate(&det, &grid_eval, config.monitor));
        models.insert(lead.to_bits(), det);
        Ok(m)
    });
    let chosen = grid.require();
    cell.grid = Some(grid);
    match chosen {
        Ok(lead) => {
            let det = models.remove(&lead.to_bits()).expect("chosen candidate was trained");
            let test = data.select(source, &sets.test);
            cell.trajectories = evaluate(&det, &test, config.monitor);
            cell.test = Some(Metrics::from_results(&cell.trajectories));
            cell.training_lead_time = Some(lead);
            cell.model = Some(StoredModel::Binary(det));
            log::info!(
                "fold {} {} {}: lead {lead:.1} s, test {:?}",
                fold + 1,
                regime.as_str(),
                kind.as_str(),
                cell.test
            );
        }
        Err(e) => {
            log::warn!("fold {} {} {}: {e}", fold + 1, regime.as_str(), kind.as_str());
            cell.error = Some(e.to_string());
        }
    }
    cell
}

/// Index of the first window the identifier flags as abrupt.
pub fn latch_window(identifier: &TrainedDetector, velocities: &PreparedTrajectory) -> Option<usize> {
    let n = identifier.n_window;
    (n - 1..velocities.len()).position(|end| identifier.score_raw(&velocities.window_data(end, n)).faulty)
}

fn identifier_accuracy(identifier: &TrainedDetector, windows: &[FeatureWindow]) -> f64 {
    let correct = windows
        .iter()
        .filter(|w| identifier.score_raw(&w.data).faulty == (w.label < 0))
        .count();
    correct as f64 / windows.len().max(1) as f64
}

/// Labeled windows for one multiclass detector: the regime's own
/// trajectories plus the windows of the other kind that the identifier
/// routes to this detector.
fn multiclass_windows(
    trajs: &[&PreparedTrajectory],
    latches: &HashMap<u64, Option<usize>>,
    own: FaultKind,
    lead: f64,
    n_window: usize,
) -> Result<Vec<FeatureWindow>> {
    let mut out = Vec::new();
    for t in trajs {
        let windows = label_windows(t, lead, n_window)?;
        let latch = latches[&t.id];
        let routed_here = |w: usize| match own {
            FaultKind::Incipient => latch.is_none_or(|l| w < l),
            _ => latch.is_some_and(|l| w >= l),
        };
        if t.kind == own {
            out.extend(windows);
        } else {
            out.extend(windows.into_iter().enumerate().filter(|(w, _)| routed_here(*w)).map(|(_, x)| x));
        }
    }
    Ok(out)
}

fn switched_declaration(inc: &[Score], abr: &[Score], latch: Option<usize>, rule: MonitorRule) -> Option<usize> {
    let mut monitor = crate::detectors::Monitor::new(rule);
    (0..inc.len()).find(|&w| {
        let s = if latch.is_some_and(|l| w >= l) { abr[w] } else { inc[w] };
        monitor.push(s.faulty)
    })
}

fn identifier_stats(
    test: &[&PreparedTrajectory],
    latches: &HashMap<u64, Option<usize>>,
    n_window: usize,
    train_accuracy: f64,
) -> IdentifierStats {
    let mut stats = IdentifierStats {
        train_accuracy,
        ..Default::default()
    };
    let (mut delay_s, mut delay_n, mut n_delay) = (0.0, 0.0, 0usize);
    for t in test {
        let latch_end = latches[&t.id].map(|w| w + n_window - 1);
        match t.kind {
            FaultKind::Abrupt => {
                stats.n_abrupt += 1;
                let Some(end) = latch_end else { continue };
                stats.n_latched += 1;
                let t_latch = t.times[end];
                if t_latch < t.fault_start {
                    stats.n_latched_early += 1;
                    continue;
                }
                let onset = t.times.iter().position(|&x| x >= t.fault_start).unwrap_or(end);
                delay_s += t_latch - t.fault_start;
                delay_n += (end - onset) as f64;
                n_delay += 1;
            }
            FaultKind::Incipient => stats.n_incipient_latched += usize::from(latch_end.is_some()),
            FaultKind::None => {}
        }
    }
    if n_delay > 0 {
        stats.mean_delay_s = Some(delay_s / n_delay as f64);
        stats.mean_delay_samples = Some(delay_n / n_delay as f64);
    }
    stats
}

pub fn run_multiclass_cell(
    data: &PreparedData,
    sets: &FoldSets,
    fold: usize,
    kind: DetectorKind,
    config: &ExperimentConfig,
) -> MulticlassCell {
    let mut cell = MulticlassCell {
        fold,
        detector: kind,
        incipient_lead: None,
        abrupt_lead: None,
        candidates: Vec::new(),
        test: None,
        identifier: None,
        trajectories: Vec::new(),
        error: None,
        model: None,
    };
    if let Err(e) = run_multiclass(data, sets, config, kind, &mut cell) {
        log::warn!("fold {} multiclass {}: {e}", fold + 1, kind.as_str());
        cell.error = Some(e.to_string());
    }
    cell
}

fn run_multiclass(
    data: &PreparedData,
    sets: &FoldSets,
    config: &ExperimentConfig,
    kind: DetectorKind,
    cell: &mut MulticlassCell,
) -> Result<()> {
    let n = config.n_window;
    let vel = FrameSource::JointVelocities;
    let src_inc = FrameSource::Features(config.multiclass_incipient_features);
    let src_abr = FrameSource::Features(config.multiclass_abrupt_features);

    let id_windows = identifier_windows(&data.select(vel, &sets.train), n);
    let identifier = train_detector(DetectorKind::Svm, &id_windows, vel, &config.detector, None)?;
    let accuracy = identifier_accuracy(&identifier, &id_windows);

    let all_ids: Vec<u64> = sets
        .train
        .iter()
        .chain(&sets.grid_eval)
        .chain(&sets.test)
        .copied()
        .collect();
    let latches: HashMap<u64, Option<usize>> = all_ids
        .par_iter()
        .map(|&id| (id, latch_window(&identifier, data.get(vel, id))))
        .collect();

    let candidates = config.grid.candidates();
    let train_inc = data.select(src_inc, &sets.train);
    let train_abr = data.select(src_abr, &sets.train);
    let eval_inc = data.select(src_inc, &sets.grid_eval);
    let eval_abr = data.select(src_abr, &sets.grid_eval);

    // Each detector depends only on its own lead time, so both families are
    // trained once per candidate and every pair is scored from cached series.
    struct Family {
        detector: TrainedDetector,
        series: Vec<Vec<Score>>,
    }
    let family = |own: FaultKind, train: &[&PreparedTrajectory], eval: &[&PreparedTrajectory], source| {
        candidates
            .iter()
            .map(|&lead| -> Result<Family> {
                let windows = multiclass_windows(train, &latches, own, lead, n)?;
                let detector = train_detector(kind, &windows, source, &config.detector, Some(lead))?;
                let series = eval.par_iter().map(|p| super::decision_series(&detector, p)).collect();
                Ok(Family { detector, series })
            })
            .collect::<Vec<_>>()
    };
    let inc_family = family(FaultKind::Incipient, &train_inc, &eval_inc, src_inc);
    let abr_family = family(FaultKind::Abrupt, &train_abr, &eval_abr, src_abr);

    let mut best: Option<(usize, usize)> = None;
    for (i, inc) in inc_family.iter().enumerate() {
        let Ok(inc) = inc else { continue };
        for (a, abr) in abr_family.iter().enumerate() {
            let Ok(abr) = abr else { continue };
            let results: Vec<TrajectoryResult> = eval_inc
                .iter()
                .enumerate()
                .map(|(k, p)| {
                    let idx = switched_declaration(&inc.series[k], &abr.series[k], latches[&p.id], config.monitor);
                    result_for(p, idx.map(|w| w + n - 1))
                })
                .collect();
            let metrics = Metrics::from_results(&results);
            cell.candidates.push(PairCandidate {
                incipient_lead: candidates[i],
                abrupt_lead: candidates[a],
                metrics,
            });
            if metrics.meets(&config.bounds) {
                let key = |(i, a): (usize, usize)| (candidates[i] + candidates[a], candidates[a]);
                if best.is_none_or(|b| key((i, a)) > key(b)) {
                    best = Some((i, a));
                }
            }
        }
    }
    let first_error = inc_family.iter().chain(&abr_family).find_map(|f| f.as_ref().err());
    let Some((i, a)) = best else {
        return Err(match first_error {
            Some(e) if cell.candidates.is_empty() => Error::InsufficientData(e.to_string()),
            _ => Error::NoFeasibleLeadTime,
        });
    };
    cell.incipient_lead = Some(candidates[i]);
    cell.abrupt_lead = Some(candidates[a]);

    let take = |fam: Vec<Result<Family>>, k: usize| fam.into_iter().nth(k).and_then(|f| f.ok()).map(|f| f.detector);
    let model = MulticlassModel {
        identifier,
        incipient: take(inc_family, i).expect("chosen detector exists"),
        abrupt: take(abr_family, a).expect("chosen detector exists"),
    };

    let test_inc = data.select(src_inc, &sets.test);
    cell.trajectories = test_inc
        .par_iter()
        .map(|p| {
            let idx = stream_multiclass(&model, p, data.get(src_abr, p.id), data.get(vel, p.id), config.monitor);
            MulticlassTrajectory {
                result: result_for(p, idx),
                latch_time: latches[&p.id].map(|w| p.times[w + n - 1]),
            }
        })
        .collect();
    let results: Vec<TrajectoryResult> = cell.trajectories.iter().map(|t| t.result.clone()).collect();
    cell.test = Some(Metrics::from_results(&results));
    cell.identifier = Some(identifier_stats(&test_inc, &latches, n, accuracy));
    log::info!(
        "fold {} multiclass {}: leads ({:.1}, {:.1}) s, test {:?}, identifier {:?}",
        cell.fold + 1,
        kind.as_str(),
        candidates[i],
        candidates[a],
        cell.test,
        cell.identifier
    );
    cell.model = Some(StoredModel::Multiclass(model));
    Ok(())
}

/// Streams one trajectory through the switching pipeline; returns the end
/// sample index of the declaring window.
pub fn stream_multiclass(
    model: &MulticlassModel,
    inc: &PreparedTrajectory,
    abr: &PreparedTrajectory,
    vel: &PreparedTrajectory,
    rule: MonitorRule,
) -> Option<usize> {
    let n = model.incipient.n_window;
    let mut latch = Latch::new();
    first_declaration(inc, n, rule, |w, inc_window| {
        let end = w + n - 1;
        model
            .step(&mut latch, inc_window, &abr.window_data(end, n), &vel.window_data(end, n))
            .score
    })
}

/// Frame sources an experiment needs.
pub fn required_sources(config: &ExperimentConfig) -> Vec<FrameSource> {
    let mut s = vec![FrameSource::Features(config.feature_set)];
    if config.regimes.contains(&Regime::Multiclass) {
        s.push(FrameSource::Features(config.multiclass_incipient_features));
        s.push(FrameSource::Features(config.multiclass_abrupt_features));
        s.push(FrameSource::JointVelocities);
    }
    s
}

/// Runs every fold × regime × detector cell. Failing cells carry their error
/// and do not stop the others.
pub fn run_experiment(dataset: &Dataset, params: &RobotParams, config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let plan = split_plan(dataset, config.split, config.split_seed)?;
    let folds = match &config.folds {
        Some(f) => {
            if let Some(bad) = f.iter().find(|&&x| x >= plan.k) {
                return Err(Error::InvalidConfig(format!("fold {bad} out of range 0..{}", plan.k)));
            }
            f.clone()
        }
        None => plan.test_folds(),
    };
    let data = PreparedData::new(dataset, &required_sources(config), params);

    let binary: Vec<(usize, Regime, DetectorKind)> = folds
        .iter()
        .flat_map(|&f| {
            config
                .regimes
                .iter()
                .filter(|r| **r != Regime::Multiclass)
                .flat_map(move |&r| config.detectors.iter().map(move |&d| (f, r, d)))
        })
        .collect();
    let cells: Vec<CellReport> = binary
        .par_iter()
        .map(|&(fold, regime, kind)| {
            let sets = fold_sets(&plan, fold, regime, config.grid_eval, dataset);
            run_binary_cell(&data, &sets, fold, regime, kind, config)
        })
        .collect();

    let multi: Vec<(usize, DetectorKind)> = if config.regimes.contains(&Regime::Multiclass) {
        folds
            .iter()
            .flat_map(|&f| config.detectors.iter().map(move |&d| (f, d)))
            .collect()
    } else {
        Vec::new()
    };
    let multiclass: Vec<MulticlassCell> = multi
        .par_iter()
        .map(|&(fold, kind)| {
            let sets = fold_sets(&plan, fold, Regime::Multiclass, config.grid_eval, dataset);
            run_multiclass_cell(&data, &sets, fold, kind, config)
        })
        .collect();

    Ok(ExperimentReport {
        config: config.clone(),
        split: plan,
        folds,
        cells,
        multiclass,
    })
}

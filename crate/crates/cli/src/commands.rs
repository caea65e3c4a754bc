use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use falltime_core::config::RunConfig;
use falltime_core::dataset::{
    export_windows, label_windows, prepare, prepare_all, FrameSource, PreparedTrajectory, SplitKind,
};
use falltime_core::detectors::{DetectorKind, ModelFile, StoredModel, MODEL_FORMAT_VERSION};
use falltime_core::eval::{
    binary_series, check_hashes, evaluate, fold_sets, multiclass_series, result_for, result_tables, run_binary_cell,
    run_experiment, split_plan, stream_multiclass, summary_json, train_binary, ExperimentFile, Metrics,
    PreparedData, Regime, SeriesPoint, TrajectoryResult, RESULT_FORMAT_VERSION,
};
use falltime_core::features::{feature_report, FeatureSet};
use falltime_core::scenario::{
    calibrate_ranges, file_names, generate_dataset, load_dataset, save_dataset, Dataset, FaultKind,
};
use falltime_core::{Error, Result, RobotParams};
use serde_json::json;

use crate::args::{Cli, Command, Common, EvalArgs, FeaturesArgs, GenerateArgs, GridSearchArgs, PlotDataArgs, ReportArgs, TrainArgs};

const BINARY_RESULTS: &str = "experiment_binary.json";
const MULTICLASS_RESULTS: &str = "experiment_multiclass.json";

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

fn parse_detector(s: &str) -> Result<DetectorKind> {
    match s {
        "nn" => Ok(DetectorKind::Nn),
        "svm" => Ok(DetectorKind::Svm),
        _ => Err(invalid(format!("unknown detector '{s}' (nn, svm)"))),
    }
}

/// Defaults, then flags (with FALLTIME_SEED standing in for `--seed`), then
/// the config file.
pub fn resolve_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let env_seed = match std::env::var("FALLTIME_SEED") {
        Ok(v) => Some(v.trim().parse::<u64>().map_err(|_| invalid(format!("FALLTIME_SEED='{v}' is not a u64")))?),
        Err(_) => None,
    };
    if let Some(seed) = c.seed.or(env_seed) {
        cfg.seed = seed;
    }
    cfg.robot_params = c.robot_params.clone();
    if let Some(d) = &c.dataset_dir {
        cfg.paths.dataset_dir = d.clone();
    }
    if let Some(d) = &c.model_dir {
        cfg.paths.model_dir = d.clone();
    }
    if let Some(d) = &c.report_dir {
        cfg.paths.report_dir = d.clone();
    }
    cfg.jobs = c.jobs;

    let sc = &mut cfg.scenario;
    if let Some(n) = c.count {
        sc.abrupt_count = n;
        sc.incipient_count = n;
    }
    if let Some(n) = c.abrupt_count {
        sc.abrupt_count = n;
    }
    if let Some(n) = c.incipient_count {
        sc.incipient_count = n;
    }

    let ex = &mut cfg.experiment;
    if let Some(s) = &c.feature_set {
        ex.feature_set = FeatureSet::from_str(s)?;
    }
    if let Some(s) = &c.incipient_features {
        ex.multiclass_incipient_features = FeatureSet::from_str(s)?;
    }
    if let Some(s) = &c.abrupt_features {
        ex.multiclass_abrupt_features = FeatureSet::from_str(s)?;
    }
    if !c.detectors.is_empty() {
        ex.detectors = c.detectors.iter().map(|d| parse_detector(d)).collect::<Result<_>>()?;
    }
    if !c.folds.is_empty() {
        if c.folds.contains(&0) {
            return Err(invalid("folds are numbered from 1"));
        }
        ex.folds = Some(c.folds.iter().map(|f| f - 1).collect());
    }
    if let Some(s) = &c.split {
        ex.split = match s.as_str() {
            "holdout" => SplitKind::Holdout,
            "k-fold" => SplitKind::KFold,
            _ => return Err(invalid(format!("unknown split '{s}' (holdout, k-fold)"))),
        };
    }
    if let Some(v) = c.split_seed {
        ex.split_seed = v;
    }
    if let Some(v) = c.n_window {
        ex.n_window = v;
    }
    if let Some(v) = c.n_monitor {
        ex.monitor.n_monitor = v;
    }
    if let Some(v) = c.fire_threshold {
        ex.monitor.fire_threshold = v;
    }
    if let Some(v) = c.svm_c {
        ex.detector.svm.c = v;
    }
    if let Some(v) = c.svm_gamma {
        ex.detector.svm.gamma = Some(v);
    }
    if let Some(v) = c.lambda {
        ex.detector.lambda = v;
    }
    if let Some(v) = c.fpr_max {
        ex.bounds.fpr_max = v;
    }
    if let Some(v) = c.fnr_max {
        ex.bounds.fnr_max = v;
    }
    if let Some(v) = c.grid_step {
        ex.grid.step = v;
    }

    if let Some(path) = &c.config {
        cfg = cfg.overlay_file(path)?;
    }
    cfg.experiment.validate()?;
    Ok(cfg)
}

fn load_params(cfg: &RunConfig) -> Result<RobotParams> {
    match &cfg.robot_params {
        Some(p) => RobotParams::load(p),
        None => Ok(RobotParams::default()),
    }
}

struct Run {
    cfg: RunConfig,
    params: RobotParams,
}

/// A run bound to a dataset on disk. The scenario settings and seed are
/// taken from the dataset manifest so the config hash describes the data
/// actually used.
struct DataRun {
    cfg: RunConfig,
    params: RobotParams,
    dataset: Dataset,
    config_hash: String,
    manifest_hash: String,
}

impl Run {
    fn with_dataset(self) -> Result<DataRun> {
        let Run { mut cfg, params } = self;
        let dataset = load_dataset(&cfg.paths.dataset_dir, &params)?;
        cfg.scenario = dataset.manifest.config.clone();
        cfg.seed = dataset.manifest.seed;
        let manifest_hash = dataset.manifest.hash();
        let config_hash = cfg.hash();
        log::info!(
            "dataset {} ({} trajectories), config {}, manifest {}",
            cfg.paths.dataset_dir.display(),
            dataset.trajectories.len(),
            &config_hash[..12],
            &manifest_hash[..12]
        );
        Ok(DataRun {
            cfg,
            params,
            dataset,
            config_hash,
            manifest_hash,
        })
    }
}

impl DataRun {
    fn provenance(&self) -> Vec<String> {
        vec![
            format!("config_hash={}", self.config_hash),
            format!("manifest_hash={}", self.manifest_hash),
        ]
    }

    fn commented(&self, body: &str) -> String {
        let mut out: String = self.provenance().iter().map(|l| format!("# {l}\n")).collect();
        out.push_str(body);
        out
    }

    /// Hash check for artifacts; `force` downgrades a mismatch to a warning.
    fn check(&self, what: &Path, config_hash: &str, manifest_hash: &str, force: bool) -> Result<()> {
        match check_hashes(config_hash, manifest_hash, &self.config_hash, &self.manifest_hash) {
            Err(e) if force => {
                log::warn!("{}: {e} (continuing, --force)", what.display());
                Ok(())
            }
            r => r.map_err(|e| match e {
                Error::HashMismatch(m) => Error::HashMismatch(format!("{}: {m}", what.display())),
                e => e,
            }),
        }
    }

    fn folds(&self) -> Result<Vec<usize>> {
        let plan = split_plan(&self.dataset, self.cfg.experiment.split, self.cfg.experiment.split_seed)?;
        Ok(self.cfg.experiment.folds.clone().unwrap_or_else(|| plan.test_folds()))
    }

    fn model_file(&self, regime: &str, fold: usize, model: StoredModel) -> ModelFile {
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            config_hash: self.config_hash.clone(),
            manifest_hash: self.manifest_hash.clone(),
            regime: regime.to_string(),
            fold,
            model,
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e))?;
    write(path, &(text + "\n"))
}

fn model_name(regime: &str, detector: DetectorKind, fold: usize) -> String {
    format!("{regime}_{}_fold{}.json", detector.as_str(), fold + 1)
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = resolve_config(&cli.common)?;
    if let Some(j) = cfg.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    let params = load_params(&cfg)?;
    let run = Run { cfg, params };
    match cli.command {
        Command::Generate(a) => generate(run, &a),
        Command::Features(a) => features(run.with_dataset()?, &a),
        Command::Train(a) => train(run.with_dataset()?, &a),
        Command::Eval(a) => eval(run.with_dataset()?, &a),
        Command::GridSearch(a) => grid_search(run.with_dataset()?, &a),
        Command::Multiclass => multiclass(run.with_dataset()?),
        Command::Report(a) => report(run.with_dataset()?, &a),
        Command::PlotData(a) => plot_data(run.with_dataset()?, &a),
    }
}

fn generate(run: Run, a: &GenerateArgs) -> Result<()> {
    let Run { mut cfg, params } = run;
    if a.calibrate {
        for kind in [FaultKind::Abrupt, FaultKind::Incipient] {
            let cal = calibrate_ranges(kind, &params, &cfg.scenario, a.calibration_tolerance, a.pilot_size, cfg.seed)?;
            log::info!(
                "{} range: max force {:.2} N, pilot fall fraction {:.3} ({} pilots{})",
                kind.as_str(),
                cal.max_force,
                cal.fall_fraction,
                cal.evaluations,
                if cal.converged { "" } else { ", not converged" }
            );
            if let Some(r) = cfg.scenario.range_mut(kind) {
                r.max_force = cal.max_force;
            }
        }
    }
    let dataset = generate_dataset(&cfg.scenario, cfg.seed, &params)?;
    let dir = &cfg.paths.dataset_dir;
    remove_stale(dir, &dataset)?;
    save_dataset(dir, &dataset)?;
    let m = &dataset.manifest;
    println!(
        "abrupt: {} runs, fall fraction {:.3}, lift fraction {:.3}",
        m.abrupt.count, m.abrupt.fall_fraction, m.abrupt.lift_fraction
    );
    println!(
        "incipient: {} runs, fall fraction {:.3}, lift fraction {:.3}",
        m.incipient.count, m.incipient.fall_fraction, m.incipient.lift_fraction
    );
    println!("manifest {} ({})", dir.join("manifest.json").display(), m.hash());
    Ok(())
}

/// Deletes trajectory files left by an earlier, larger run in the same
/// directory.
fn remove_stale(dir: &Path, dataset: &Dataset) -> Result<()> {
    let traj_dir = dir.join("trajectories");
    let Ok(entries) = fs::read_dir(&traj_dir) else {
        return Ok(());
    };
    let keep: std::collections::HashSet<PathBuf> = dataset
        .trajectories
        .iter()
        .flat_map(|t| {
            let (csv, meta) = file_names(t.id);
            [dir.join(csv), dir.join(meta)]
        })
        .collect();
    for e in entries.flatten() {
        let p = e.path();
        let ours = p
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.starts_with("traj_") && (n.ends_with(".csv") || n.ends_with(".meta.json")));
        if ours && !keep.contains(&p) {
            fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
        }
    }
    Ok(())
}

fn features(run: DataRun, a: &FeaturesArgs) -> Result<()> {
    let set = run.cfg.experiment.feature_set;
    let dir = &run.cfg.paths.report_dir;
    create_dir(dir)?;
    let rep = feature_report(&run.dataset.trajectories, set, &run.params)?;
    let path = dir.join(format!("features_{}.csv", set.id()));
    write(&path, &run.commented(&rep.to_csv()))?;
    for (name, d) in rep.names.iter().zip(&rep.lead_dcor) {
        log::info!("dCor({name}, lead time) = {d:.4}");
    }
    println!("{}", path.display());
    if let Some(out) = &a.export_windows {
        let preps = prepare_all(&run.dataset.trajectories, FrameSource::Features(set), &run.params);
        let mut windows = Vec::new();
        for p in &preps {
            windows.extend(label_windows(p, a.lead_time, run.cfg.experiment.n_window)?);
        }
        let mut comments = run.provenance();
        comments.push(format!("feature_set={} lead_time={}", set.id(), a.lead_time));
        export_windows(out, &windows, &comments)?;
        println!("{} ({} windows)", out.display(), windows.len());
    }
    Ok(())
}

fn train(run: DataRun, a: &TrainArgs) -> Result<()> {
    let regime = Regime::from_str(&a.regime)?;
    if regime == Regime::Multiclass {
        return Err(invalid("use the multiclass command for the multiclass regime"));
    }
    let ex = &run.cfg.experiment;
    let plan = split_plan(&run.dataset, ex.split, ex.split_seed)?;
    let source = FrameSource::Features(ex.feature_set);
    let data = PreparedData::new(&run.dataset, &[source], &run.params);
    create_dir(&run.cfg.paths.model_dir)?;
    for fold in run.folds()? {
        let sets = fold_sets(&plan, fold, regime, ex.grid_eval, &run.dataset);
        for &kind in &ex.detectors {
            let det = match a.lead_time {
                Some(lead) => train_binary(kind, &data.select(source, &sets.train), source, lead, ex)?,
                None => {
                    let cell = run_binary_cell(&data, &sets, fold, regime, kind, ex);
                    match (cell.model, cell.error) {
                        (Some(StoredModel::Binary(d)), _) => d,
                        (_, Some(e)) => {
                            log::error!("fold {} {}: {e}", fold + 1, kind.as_str());
                            return Err(Error::NoFeasibleLeadTime);
                        }
                        _ => unreachable!("binary cells hold binary models"),
                    }
                }
            };
            let path = run.cfg.paths.model_dir.join(model_name(regime.as_str(), kind, fold));
            log::info!("{}: training lead time {:?}", path.display(), det.training_lead_time);
            run.model_file(regime.as_str(), fold, StoredModel::Binary(det)).save(&path)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn model_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .flatten()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    out.sort();
    Ok(out)
}

fn sources_of(model: &StoredModel) -> Vec<FrameSource> {
    match model {
        StoredModel::Binary(d) => vec![d.source],
        StoredModel::Multiclass(m) => vec![m.incipient.source, m.abrupt.source, m.identifier.source],
    }
}

fn prepared(run: &DataRun, id: u64, source: FrameSource) -> Result<PreparedTrajectory> {
    let traj = run
        .dataset
        .get(id)
        .ok_or_else(|| invalid(format!("trajectory {id} is not in the dataset")))?;
    Ok(prepare(traj, source, &run.params))
}

fn eval(run: DataRun, a: &EvalArgs) -> Result<()> {
    let paths = if a.models.is_empty() {
        model_paths(&run.cfg.paths.model_dir)?
    } else {
        a.models.clone()
    };
    if paths.is_empty() {
        return Err(invalid("no model files to evaluate"));
    }
    let ex = &run.cfg.experiment;
    let plan = split_plan(&run.dataset, ex.split, ex.split_seed)?;
    create_dir(&run.cfg.paths.report_dir)?;
    for path in paths {
        let file = ModelFile::load(&path)?;
        run.check(&path, &file.config_hash, &file.manifest_hash, a.force)?;
        let regime = Regime::from_str(&file.regime)?;
        let sets = fold_sets(&plan, file.fold, regime, ex.grid_eval, &run.dataset);
        let data = PreparedData::new(&run.dataset, &sources_of(&file.model), &run.params);
        let results: Vec<TrajectoryResult> = match &file.model {
            StoredModel::Binary(det) => evaluate(det, &data.select(det.source, &sets.test), ex.monitor),
            StoredModel::Multiclass(m) => sets
                .test
                .iter()
                .map(|&id| {
                    let inc = data.get(m.incipient.source, id);
                    let idx = stream_multiclass(
                        m,
                        inc,
                        data.get(m.abrupt.source, id),
                        data.get(m.identifier.source, id),
                        ex.monitor,
                    );
                    result_for(inc, idx)
                })
                .collect(),
        };
        let metrics = Metrics::from_results(&results);
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
        let out = run.cfg.paths.report_dir.join(format!("eval_{stem}.json"));
        write_json(
            &out,
            &json!({
                "format_version": RESULT_FORMAT_VERSION,
                "config_hash": run.config_hash,
                "manifest_hash": run.manifest_hash,
                "model": path.display().to_string(),
                "regime": regime.as_str(),
                "fold": file.fold + 1,
                "metrics": metrics,
                "trajectories": results,
            }),
        )?;
        println!(
            "{stem}: FPR {:.3} FNR {:.3} avg lead {} -> {}",
            metrics.fpr,
            metrics.fnr,
            metrics.avg_lead_time.map_or("NA".into(), |v| format!("{v:.3} s")),
            out.display()
        );
    }
    Ok(())
}

fn save_experiment(run: &DataRun, name: &str, report: falltime_core::eval::ExperimentReport) -> Result<()> {
    create_dir(&run.cfg.paths.model_dir)?;
    create_dir(&run.cfg.paths.report_dir)?;
    for c in &report.cells {
        if let Some(m) = &c.model {
            let path = run.cfg.paths.model_dir.join(model_name(c.regime.as_str(), c.detector, c.fold));
            run.model_file(c.regime.as_str(), c.fold, m.clone()).save(&path)?;
        }
    }
    for c in &report.multiclass {
        if let Some(m) = &c.model {
            let path = run.cfg.paths.model_dir.join(model_name(Regime::Multiclass.as_str(), c.detector, c.fold));
            run.model_file(Regime::Multiclass.as_str(), c.fold, m.clone()).save(&path)?;
        }
    }
    for e in report.errors() {
        log::warn!("{e}");
    }
    let path = run.cfg.paths.report_dir.join(name);
    ExperimentFile {
        format_version: RESULT_FORMAT_VERSION,
        config_hash: run.config_hash.clone(),
        manifest_hash: run.manifest_hash.clone(),
        report,
    }
    .save(&path)?;
    println!("{}", path.display());
    Ok(())
}

fn grid_search(run: DataRun, a: &GridSearchArgs) -> Result<()> {
    let mut ex = run.cfg.experiment.clone();
    ex.regimes = if a.regimes.is_empty() {
        Regime::BINARY.to_vec()
    } else {
        a.regimes.iter().map(|r| Regime::from_str(r)).collect::<Result<_>>()?
    };
    if ex.regimes.contains(&Regime::Multiclass) {
        return Err(invalid("use the multiclass command for the multiclass regime"));
    }
    let report = run_experiment(&run.dataset, &run.params, &ex)?;
    for c in &report.cells {
        println!(
            "fold {} {:<14} {:<3} lead {:>4} test {}",
            c.fold + 1,
            c.regime.as_str(),
            c.detector.as_str(),
            c.training_lead_time.map_or("NA".into(), |v| format!("{v:.1}")),
            describe(c.test.as_ref(), c.error.as_deref())
        );
    }
    save_experiment(&run, BINARY_RESULTS, report)
}

fn describe(m: Option<&Metrics>, err: Option<&str>) -> String {
    match (m, err) {
        (Some(m), _) => format!(
            "FPR {:.3} FNR {:.3} avg lead {}",
            m.fpr,
            m.fnr,
            m.avg_lead_time.map_or("NA".into(), |v| format!("{v:.3} s"))
        ),
        (None, Some(e)) => format!("failed: {e}"),
        (None, None) => "not run".into(),
    }
}

fn multiclass(run: DataRun) -> Result<()> {
    let mut ex = run.cfg.experiment.clone();
    ex.regimes = vec![Regime::Multiclass];
    let report = run_experiment(&run.dataset, &run.params, &ex)?;
    for c in &report.multiclass {
        println!(
            "fold {} multiclass {:<3} leads {:?}/{:?} test {}",
            c.fold + 1,
            c.detector.as_str(),
            c.incipient_lead,
            c.abrupt_lead,
            describe(c.test.as_ref(), c.error.as_deref())
        );
        if let Some(id) = &c.identifier {
            println!(
                "  identifier: latched {}/{} abrupt, mean delay {} ({} samples)",
                id.n_latched,
                id.n_abrupt,
                id.mean_delay_s.map_or("NA".into(), |v| format!("{v:.3} s")),
                id.mean_delay_samples.map_or("NA".into(), |v| format!("{v:.2}"))
            );
        }
    }
    save_experiment(&run, MULTICLASS_RESULTS, report)
}

fn report(run: DataRun, a: &ReportArgs) -> Result<()> {
    let dir = &run.cfg.paths.report_dir;
    let mut merged: Option<falltime_core::eval::ExperimentReport> = None;
    for name in [BINARY_RESULTS, MULTICLASS_RESULTS] {
        let path = dir.join(name);
        if !path.exists() {
            log::warn!("{} not found; its columns are reported as NA", path.display());
            continue;
        }
        let file = ExperimentFile::load(&path)?;
        run.check(&path, &file.config_hash, &file.manifest_hash, a.force)?;
        match &mut merged {
            Some(m) => m.merge(file.report),
            None => merged = Some(file.report),
        }
    }
    let report = merged.ok_or_else(|| {
        Error::io(
            dir.join(BINARY_RESULTS),
            std::io::Error::new(std::io::ErrorKind::NotFound, "no experiment results; run grid-search or multiclass"),
        )
    })?;
    for t in result_tables(&report) {
        let path = dir.join(format!("{}.csv", t.name));
        write(&path, &run.commented(&t.to_csv()))?;
        println!("{}\n{}", path.display(), t.to_csv());
    }
    let echo = serde_json::to_value(&run.cfg).map_err(|e| Error::format(dir, e))?;
    let summary = summary_json(&report, &echo, &run.config_hash, &run.manifest_hash);
    let path = dir.join("summary.json");
    write_json(&path, &summary)?;
    println!("{}", path.display());
    Ok(())
}

fn series_csv(points: &[SeriesPoint], multiclass: bool) -> String {
    let mut out = String::from("end_time,value,threshold,verdict");
    if multiclass {
        out.push_str(",hypothesis,incipient_value,abrupt_value");
    }
    out.push('\n');
    for p in points {
        let verdict = if p.faulty { "faulty" } else { "safe" };
        out.push_str(&format!("{},{},{},{verdict}", p.end_time, p.value, p.threshold));
        if multiclass {
            let h = match p.hypothesis {
                Some(falltime_core::detectors::Hypothesis::Abrupt) => "abrupt",
                _ => "incipient",
            };
            out.push_str(&format!(
                ",{h},{},{}",
                p.incipient_value.unwrap_or(f64::NAN),
                p.abrupt_value.unwrap_or(f64::NAN)
            ));
        }
        out.push('\n');
    }
    out
}

fn plot_data(run: DataRun, a: &PlotDataArgs) -> Result<()> {
    let file = ModelFile::load(&a.model)?;
    run.check(&a.model, &file.config_hash, &file.manifest_hash, a.force)?;
    let ids = if a.trajectories.is_empty() {
        let ex = &run.cfg.experiment;
        let plan = split_plan(&run.dataset, ex.split, ex.split_seed)?;
        let regime = Regime::from_str(&file.regime)?;
        fold_sets(&plan, file.fold, regime, ex.grid_eval, &run.dataset).test
    } else {
        a.trajectories.clone()
    };
    let stem = a.model.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| run.cfg.paths.report_dir.join("plot").join(stem));
    create_dir(&out)?;
    for id in ids {
        let (points, multi) = match &file.model {
            StoredModel::Binary(d) => (binary_series(d, &prepared(&run, id, d.source)?), false),
            StoredModel::Multiclass(m) => (
                multiclass_series(
                    m,
                    &prepared(&run, id, m.incipient.source)?,
                    &prepared(&run, id, m.abrupt.source)?,
                    &prepared(&run, id, m.identifier.source)?,
                ),
                true,
            ),
        };
        let path = out.join(format!("traj_{id:06}.csv"));
        write(&path, &run.commented(&series_csv(&points, multi)))?;
    }
    println!("{}", out.display());
    Ok(())
}

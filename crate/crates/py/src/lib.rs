//! Python bindings: robot parameters, simulation, datasets, features,
//! detector scoring and the experiment runner.

use std::path::PathBuf;

use falltime_core::config::RunConfig;
use falltime_core::detectors::{monitor as run_monitor, ward_effort as core_ward, ModelFile, MonitorRule, StoredModel};
use falltime_core::eval::run_experiment as core_run_experiment;
use falltime_core::features::{distance_correlation as core_dcor, trajectory_features, FeatureSet};
use falltime_core::scenario::{self, ScenarioConfig, Trajectory};
use falltime_core::{Error, RobotParams};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde::Serialize;

create_exception!(falltime, FalltimeError, PyException);

fn err(e: Error) -> PyErr {
    FalltimeError::new_err(e.to_string())
}

/// Converts any serializable value into native Python objects via `json`.
fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| FalltimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn scenario_from(toml_text: Option<&str>) -> PyResult<ScenarioConfig> {
    match toml_text {
        Some(t) => toml::from_str(t).map_err(|e| FalltimeError::new_err(e.to_string())),
        None => Ok(ScenarioConfig::default()),
    }
}

#[derive(Serialize)]
struct TrajectoryView<'a> {
    id: u64,
    kind: &'a str,
    outcome: scenario::Outcome,
    fall_time: Option<f64>,
    fault: &'a scenario::FaultSpec,
    impulse: &'a scenario::Impulse,
    heel_or_toe_lift: bool,
    t: Vec<f64>,
    q: Vec<Vec<f64>>,
    qd: Vec<Vec<f64>>,
    u: Vec<Vec<f64>>,
}

fn trajectory_view(t: &Trajectory) -> TrajectoryView<'_> {
    TrajectoryView {
        id: t.id,
        kind: t.kind().as_str(),
        outcome: t.outcome(),
        fall_time: t.fall_time,
        fault: &t.fault,
        impulse: &t.impulse,
        heel_or_toe_lift: t.heel_or_toe_lift(),
        t: t.samples.iter().map(|s| s.t).collect(),
        q: t.samples.iter().map(|s| s.q.iter().copied().collect()).collect(),
        qd: t.samples.iter().map(|s| s.qd.iter().copied().collect()).collect(),
        u: t.samples.iter().map(|s| s.u.iter().copied().collect()).collect(),
    }
}

/// Robot parameter set.
#[pyclass(name = "RobotParams", module = "falltime", skip_from_py_object)]
#[derive(Clone)]
struct PyRobotParams {
    inner: RobotParams,
}

#[pymethods]
impl PyRobotParams {
    #[new]
    fn new() -> Self {
        Self {
            inner: RobotParams::default(),
        }
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        RobotParams::load(&path).map(|inner| Self { inner }).map_err(err)
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let inner = RobotParams::from_toml_str(text).map_err(FalltimeError::new_err)?;
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml_string()
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(err)
    }

    fn hash(&self) -> String {
        self.inner.hash()
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn total_mass(&self) -> f64 {
        self.inner.total_mass()
    }
}

fn params_or_default(params: Option<PyRef<'_, PyRobotParams>>) -> RobotParams {
    params.map(|p| p.inner.clone()).unwrap_or_default()
}

/// Simulates trajectory `id` of the seeded dataset and returns it as a dict.
#[pyfunction]
#[pyo3(signature = (id, seed, params=None, scenario=None))]
fn generate_trajectory(
    py: Python<'_>,
    id: u64,
    seed: u64,
    params: Option<PyRef<'_, PyRobotParams>>,
    scenario: Option<&str>,
) -> PyResult<Py<PyAny>> {
    let params = params_or_default(params);
    let config = scenario_from(scenario)?;
    let traj = py
        .detach(|| scenario::generate_one(id, seed, &params, &config))
        .map_err(err)?;
    to_py(py, &trajectory_view(&traj))
}

/// A generated or loaded trajectory dataset.
#[pyclass(name = "Dataset", module = "falltime")]
struct PyDataset {
    inner: scenario::Dataset,
    params: RobotParams,
}

#[pymethods]
impl PyDataset {
    #[staticmethod]
    #[pyo3(signature = (abrupt_count, incipient_count, seed, params=None, scenario=None))]
    fn generate(
        py: Python<'_>,
        abrupt_count: usize,
        incipient_count: usize,
        seed: u64,
        params: Option<PyRef<'_, PyRobotParams>>,
        scenario: Option<&str>,
    ) -> PyResult<Self> {
        let params = params_or_default(params);
        let mut config = scenario_from(scenario)?;
        config.abrupt_count = abrupt_count;
        config.incipient_count = incipient_count;
        let inner = py
            .detach(|| scenario::generate_dataset(&config, seed, &params))
            .map_err(err)?;
        Ok(Self { inner, params })
    }

    #[staticmethod]
    #[pyo3(signature = (path, params=None))]
    fn load(path: PathBuf, params: Option<PyRef<'_, PyRobotParams>>) -> PyResult<Self> {
        let params = params_or_default(params);
        let inner = scenario::load_dataset(&path, &params).map_err(err)?;
        Ok(Self { inner, params })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        scenario::save_dataset(&path, &self.inner).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.trajectories.len()
    }

    fn ids(&self) -> Vec<u64> {
        self.inner.trajectories.iter().map(|t| t.id).collect()
    }

    #[getter]
    fn manifest(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.manifest)
    }

    #[getter]
    fn manifest_hash(&self) -> String {
        self.inner.manifest.hash()
    }

    fn trajectory(&self, py: Python<'_>, id: u64) -> PyResult<Py<PyAny>> {
        let t = self.get(id)?;
        to_py(py, &trajectory_view(t))
    }

    /// Per-sample feature vectors of one trajectory.
    #[pyo3(signature = (id, feature_set="default"))]
    fn features(&self, id: u64, feature_set: &str) -> PyResult<Vec<Vec<f64>>> {
        let set: FeatureSet = feature_set.parse().map_err(err)?;
        Ok(trajectory_features(&self.get(id)?.samples, set, &self.params))
    }

    /// Runs the fold × regime × detector experiment; `config` is a TOML run
    /// configuration whose `[experiment]` table is used.
    #[pyo3(signature = (config=None))]
    fn run_experiment(&self, py: Python<'_>, config: Option<&str>) -> PyResult<Py<PyAny>> {
        let cfg = match config {
            Some(text) => RunConfig::default().overlay_toml(text).map_err(FalltimeError::new_err)?,
            None => RunConfig::default(),
        };
        let report = py
            .detach(|| core_run_experiment(&self.inner, &self.params, &cfg.experiment))
            .map_err(err)?;
        to_py(py, &report)
    }
}

impl PyDataset {
    fn get(&self, id: u64) -> PyResult<&Trajectory> {
        self.inner
            .get(id)
            .ok_or_else(|| FalltimeError::new_err(format!("no trajectory {id}")))
    }
}

/// A saved detector model.
#[pyclass(name = "Model", module = "falltime")]
struct PyModel {
    inner: ModelFile,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        ModelFile::load(&path).map(|inner| Self { inner }).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(err)
    }

    #[getter]
    fn regime(&self) -> String {
        self.inner.regime.clone()
    }

    /// 0-based test fold the model was trained for.
    #[getter]
    fn fold(&self) -> usize {
        self.inner.fold
    }

    #[getter]
    fn config_hash(&self) -> String {
        self.inner.config_hash.clone()
    }

    #[getter]
    fn manifest_hash(&self) -> String {
        self.inner.manifest_hash.clone()
    }

    /// `nn`, `svm` or `multiclass`.
    #[getter]
    fn kind(&self) -> &'static str {
        match &self.inner.model {
            StoredModel::Binary(d) => d.kind().as_str(),
            StoredModel::Multiclass(_) => "multiclass",
        }
    }

    #[getter]
    fn n_window(&self) -> usize {
        match &self.inner.model {
            StoredModel::Binary(d) => d.n_window,
            StoredModel::Multiclass(m) => m.incipient.n_window,
        }
    }

    /// Decision value and faulty verdict of a raw, flattened window
    /// (binary models only).
    fn score(&self, window: Vec<f64>) -> PyResult<(f64, bool)> {
        match &self.inner.model {
            StoredModel::Binary(d) => {
                let want = d.n_window * d.scaler.dim();
                if window.len() != want {
                    return Err(FalltimeError::new_err(format!("window has {} values, expected {want}", window.len())));
                }
                let s = d.score_raw(&window);
                Ok((s.value, s.faulty))
            }
            StoredModel::Multiclass(_) => Err(FalltimeError::new_err("score a multiclass model per detector")),
        }
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner)
    }
}

#[pyfunction]
fn distance_correlation(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    core_dcor(&x, &y).map_err(err)
}

/// Ward effort of appending `b` to the rows of `a` under `r_inv` (row-major).
#[pyfunction]
fn ward_effort(a: Vec<Vec<f64>>, b: Vec<f64>, r_inv: Vec<f64>) -> PyResult<f64> {
    let d = b.len();
    if r_inv.len() != d * d || a.iter().any(|r| r.len() != d) {
        return Err(FalltimeError::new_err("dimension mismatch"));
    }
    let rows: Vec<&[f64]> = a.iter().map(Vec::as_slice).collect();
    core_ward(&rows, &b, &r_inv).map_err(err)
}

/// Index of the declaring window under the counting rule, or None.
#[pyfunction]
#[pyo3(signature = (verdicts, n_monitor=1, fire_threshold=1))]
fn monitor(verdicts: Vec<bool>, n_monitor: usize, fire_threshold: usize) -> PyResult<Option<usize>> {
    let rule = MonitorRule {
        n_monitor,
        fire_threshold,
    };
    rule.validate().map_err(err)?;
    Ok(run_monitor(verdicts, rule))
}

#[pyfunction]
fn feature_names(feature_set: &str) -> PyResult<Vec<&'static str>> {
    let set: FeatureSet = feature_set.parse().map_err(err)?;
    Ok(set.names().to_vec())
}

#[pymodule]
fn falltime(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("FalltimeError", m.py().get_type::<FalltimeError>())?;
    m.add_class::<PyRobotParams>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(generate_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(distance_correlation, m)?)?;
    m.add_function(wrap_pyfunction!(ward_effort, m)?)?;
    m.add_function(wrap_pyfunction!(monitor, m)?)?;
    m.add_function(wrap_pyfunction!(feature_names, m)?)?;
    Ok(())
}

//! Resolved run configuration shared by every command.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::ExperimentConfig;
use crate::scenario::ScenarioConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub dataset_dir: PathBuf,
    pub model_dir: PathBuf,
    pub report_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            dataset_dir: PathBuf::from("data"),
            model_dir: PathBuf::from("models"),
            report_dir: PathBuf::from("reports"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub paths: Paths,
    pub seed: u64,
    /// TOML robot parameter file; the built-in set when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub robot_params: Option<PathBuf>,
    pub scenario: ScenarioConfig,
    pub experiment: ExperimentConfig,
    /// Worker thread cap; all cores when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
}

/// The part of a configuration that determines results.
#[derive(Serialize)]
struct HashedPart<'a> {
    seed: u64,
    scenario: &'a ScenarioConfig,
    experiment: &'a ExperimentConfig,
}

fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl RunConfig {
    /// SHA-256 over seed, scenario and experiment settings. Paths, the worker
    /// count and the parameter file location do not enter the hash.
    pub fn hash(&self) -> String {
        let part = HashedPart {
            seed: self.seed,
            scenario: &self.scenario,
            experiment: &self.experiment,
        };
        crate::util::sha256_hex(serde_json::to_string(&part).expect("config serializes").as_bytes())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Overlays the keys present in a TOML document onto this configuration.
    pub fn overlay_toml(&self, text: &str) -> std::result::Result<Self, String> {
        let over: toml::Value = toml::from_str(text).map_err(|e| e.to_string())?;
        let mut base = toml::Value::try_from(self).map_err(|e| e.to_string())?;
        merge(&mut base, over);
        base.try_into().map_err(|e: toml::de::Error| e.to_string())
    }

    /// Overlays a config file (TOML, or JSON by extension) onto `self`.
    pub fn overlay_file(&self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let text = if path.extension().is_some_and(|e| e == "json") {
            let v: toml::Value = serde_json::from_str(&text).map_err(|e| Error::format(path, e))?;
            toml::to_string(&v).map_err(|e| Error::format(path, e))?
        } else {
            text
        };
        let cfg = self.overlay_toml(&text).map_err(|m| Error::format(path, m))?;
        cfg.experiment.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_roundtrip() {
        let c = RunConfig::default();
        let back: RunConfig = toml::from_str(&c.to_toml_string()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn overlay_changes_only_named_keys() {
        let mut base = RunConfig::default();
        base.seed = 9;
        let c = base
            .overlay_toml("[experiment]\nn_window = 12\n[experiment.bounds]\nfpr_max = 0.1\n")
            .unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.experiment.n_window, 12);
        assert_eq!(c.experiment.bounds.fpr_max, 0.1);
        assert_eq!(c.experiment.bounds.fnr_max, 0.0);
        assert_eq!(c.scenario, base.scenario);
    }

    #[test]
    fn hash_ignores_paths_and_jobs() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.paths.dataset_dir = "elsewhere".into();
        b.jobs = Some(3);
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn unknown_values_are_rejected() {
        assert!(RunConfig::default().overlay_toml("seed = \"x\"").is_err());
    }
}

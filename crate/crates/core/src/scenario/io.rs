//! On-disk dataset layout: `manifest.json` at the root plus one CSV and one
//! JSON sidecar per trajectory under `trajectories/`.

use std::fs;
use std::path::Path;

use nalgebra::{Vector2, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use super::{contact_from_forces, file_names, Dataset, DatasetManifest, FaultSpec, Impulse, Outcome, Trajectory};
use crate::dynamics::Sample;
use crate::error::{Error, Result};
use crate::params::RobotParams;
use crate::util::{fmt_sig9, sha256_hex};

pub const CSV_HEADER: &str = "t,foot_x,foot_z,foot_ang,ankle,knee,hip,d_foot_x,d_foot_z,d_foot_ang,d_ankle,d_knee,d_hip,u_ankle,u_knee,u_hip,toe_fx,toe_fz,heel_fx,heel_fz";
const N_COLUMNS: usize = 20;

/// Per-trajectory metadata file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub id: u64,
    pub fault: FaultSpec,
    pub impulse: Impulse,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fall_time: Option<f64>,
    pub outcome: Outcome,
    pub heel_or_toe_lift: bool,
    pub max_constraint_residual: f64,
    pub config_hash: String,
}

impl Sidecar {
    pub fn of(traj: &Trajectory, config_hash: &str) -> Self {
        Self {
            id: traj.id,
            fault: traj.fault,
            impulse: traj.impulse,
            fall_time: traj.fall_time,
            outcome: traj.outcome(),
            heel_or_toe_lift: traj.heel_or_toe_lift(),
            max_constraint_residual: traj.max_constraint_residual,
            config_hash: config_hash.to_string(),
        }
    }
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(64 + traj.samples.len() * 240);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for s in &traj.samples {
        let row = std::iter::once(s.t)
            .chain(s.q.iter().copied())
            .chain(s.qd.iter().copied())
            .chain(s.u.iter().copied())
            .chain([s.contact.toe.x, s.contact.toe.y, s.contact.heel.x, s.contact.heel.y])
            .map(fmt_sig9)
            .collect::<Vec<_>>()
            .join(",");
        out.push_str(&row);
        out.push('\n');
    }
    out
}

/// Parses the CSV body into samples; contact mode and center of pressure are
/// rebuilt from the recorded forces.
pub fn read_trajectory_csv(path: &Path, text: &str, params: &RobotParams) -> Result<Vec<Sample>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        _ => return Err(Error::format(path, "missing or unexpected CSV header")),
    }
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let vals = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::format(path, format!("row {}: {e}", i + 2)))?;
        if vals.len() != N_COLUMNS {
            return Err(Error::format(path, format!("row {}: {} columns, expected {N_COLUMNS}", i + 2, vals.len())));
        }
        let q = Vector6::from_column_slice(&vals[1..7]);
        let qd = Vector6::from_column_slice(&vals[7..13]);
        let toe = Vector2::new(vals[16], vals[17]);
        let heel = Vector2::new(vals[18], vals[19]);
        samples.push(Sample {
            t: vals[0],
            q,
            qd,
            u: Vector3::from_column_slice(&vals[13..16]),
            contact: contact_from_forces(&q, toe, heel, params),
        });
    }
    Ok(samples)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes the manifest, CSVs and sidecars under `dir`.
pub fn save_dataset(dir: &Path, dataset: &Dataset) -> Result<()> {
    let traj_dir = dir.join("trajectories");
    fs::create_dir_all(&traj_dir).map_err(|e| Error::io(&traj_dir, e))?;
    let hash = &dataset.manifest.config_hash;
    for t in &dataset.trajectories {
        let (csv, meta) = file_names(t.id);
        write(&dir.join(csv), &trajectory_csv(t))?;
        let sidecar = serde_json::to_string_pretty(&Sidecar::of(t, hash)).expect("sidecar serializes") + "\n";
        write(&dir.join(meta), &sidecar)?;
    }
    write(&dir.join("manifest.json"), &dataset.manifest.to_json())
}

pub fn load_manifest(dir: &Path) -> Result<DatasetManifest> {
    let path = dir.join("manifest.json");
    serde_json::from_str(&read(&path)?).map_err(|e| Error::format(&path, e))
}

/// Loads a dataset and verifies every trajectory file against the manifest.
pub fn load_dataset(dir: &Path, params: &RobotParams) -> Result<Dataset> {
    let manifest = load_manifest(dir)?;
    if manifest.robot_params_hash != params.hash() {
        return Err(Error::HashMismatch(format!(
            "dataset was generated with robot params {} ({}), got {} ({})",
            manifest.robot_params_name,
            &manifest.robot_params_hash[..12],
            params.name,
            &params.hash()[..12]
        )));
    }
    let mut trajectories = Vec::with_capacity(manifest.trajectories.len());
    for entry in &manifest.trajectories {
        let csv_path = dir.join(&entry.file);
        let text = read(&csv_path)?;
        if sha256_hex(text.as_bytes()) != entry.sha256 {
            return Err(Error::HashMismatch(format!("{} differs from the manifest", csv_path.display())));
        }
        let meta_path = dir.join(&entry.sidecar);
        let meta: Sidecar = serde_json::from_str(&read(&meta_path)?).map_err(|e| Error::format(&meta_path, e))?;
        trajectories.push(Trajectory {
            id: entry.id,
            samples: read_trajectory_csv(&csv_path, &text, params)?,
            fault: meta.fault,
            impulse: meta.impulse,
            fall_time: meta.fall_time,
            max_constraint_residual: meta.max_constraint_residual,
        });
    }
    Ok(Dataset { manifest, trajectories })
}

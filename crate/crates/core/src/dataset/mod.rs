//! Sliding windows over per-trajectory feature series, lead-time labels,
//! min-max scaling and stratified whole-trajectory splits.

mod scaler;
mod splits;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{trajectory_features, FeatureSet};
use crate::params::RobotParams;
use crate::scenario::{FaultKind, Outcome, Trajectory};
use crate::util::fmt_sig9;

pub use scaler::{fit_scaler, ScalerParams};
pub use splits::{make_splits, FoldRoles, SplitKind, SplitPlan, StratumKey};

/// Safe trajectories are only used up to this time.
pub const SAFE_CLIP_TIME: f64 = 6.0;
pub const MAX_LEAD_TIME: f64 = 2.0;
const TIME_EPS: f64 = 1e-9;

/// What each frame of a window holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameSource {
    Features(FeatureSet),
    /// Ankle, knee and hip velocities.
    JointVelocities,
}

impl FrameSource {
    pub fn dim(self) -> usize {
        match self {
            FrameSource::Features(f) => f.dim(),
            FrameSource::JointVelocities => 3,
        }
    }
}

/// Frames of the usable part of one trajectory: safe runs are clipped to
/// [`SAFE_CLIP_TIME`] and fall runs end strictly before the fall.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedTrajectory {
    pub id: u64,
    pub kind: FaultKind,
    pub outcome: Outcome,
    pub fall_time: Option<f64>,
    pub fault_start: f64,
    pub fault_end: f64,
    pub times: Vec<f64>,
    pub frames: Vec<Vec<f64>>,
}

impl PreparedTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.frames.first().map_or(0, Vec::len)
    }

    /// Number of complete windows of `n_window` frames.
    pub fn n_windows(&self, n_window: usize) -> usize {
        (self.len() + 1).saturating_sub(n_window)
    }

    /// Flattened row-major frames of the window ending at sample `end`.
    pub fn window_data(&self, end: usize, n_window: usize) -> Vec<f64> {
        self.frames[end + 1 - n_window..=end].concat()
    }

    /// Time after which windows count as faulty, if the trajectory falls.
    pub fn fault_label_time(&self, lead: f64) -> Option<f64> {
        let fall = self.fall_time?;
        let t = fall - lead;
        Some(if self.kind == FaultKind::Abrupt { t.max(self.fault_start) } else { t })
    }
}

fn usable_len(traj: &Trajectory) -> usize {
    traj.samples
        .iter()
        .take_while(|s| match traj.fall_time {
            Some(fall) => s.t < fall,
            None => s.t <= SAFE_CLIP_TIME + TIME_EPS,
        })
        .count()
}

pub fn prepare(traj: &Trajectory, source: FrameSource, params: &RobotParams) -> PreparedTrajectory {
    let samples = &traj.samples[..usable_len(traj)];
    let frames = match source {
        FrameSource::Features(set) => trajectory_features(samples, set, params),
        FrameSource::JointVelocities => samples.iter().map(|s| s.qd.rows(3, 3).iter().copied().collect()).collect(),
    };
    PreparedTrajectory {
        id: traj.id,
        kind: traj.kind(),
        outcome: traj.outcome(),
        fall_time: traj.fall_time,
        fault_start: traj.fault.t_start,
        fault_end: traj.fault.t_end(),
        times: samples.iter().map(|s| s.t).collect(),
        frames,
    }
}

pub fn prepare_all(trajs: &[Trajectory], source: FrameSource, params: &RobotParams) -> Vec<PreparedTrajectory> {
    use rayon::prelude::*;
    trajs.par_iter().map(|t| prepare(t, source, params)).collect()
}

/// An `m × d` window flattened row-major, with its ±1 label.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureWindow {
    pub trajectory_id: u64,
    pub end_time: f64,
    pub end_index: usize,
    pub m: usize,
    pub d: usize,
    pub data: Vec<f64>,
    pub label: i8,
}

impl FeatureWindow {
    pub fn frame(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }
}

pub fn check_lead_time(lead: f64) -> Result<()> {
    if (0.0..=MAX_LEAD_TIME).contains(&lead) {
        Ok(())
    } else {
        Err(Error::LeadTimeOutOfRange(lead))
    }
}

/// Every complete window, stride one sample. A window of a fall trajectory
/// is faulty (−1) when its last sample lies after the label time; safe
/// trajectories give only +1 windows.
pub fn label_windows(traj: &PreparedTrajectory, lead: f64, n_window: usize) -> Result<Vec<FeatureWindow>> {
    check_lead_time(lead)?;
    let label_time = traj.fault_label_time(lead);
    let d = traj.dim();
    Ok((n_window.max(1) - 1..traj.len())
        .map(|end| {
            let end_time = traj.times[end];
            let faulty = label_time.is_some_and(|t| end_time > t + TIME_EPS);
            FeatureWindow {
                trajectory_id: traj.id,
                end_time,
                end_index: end,
                m: n_window,
                d,
                data: traj.window_data(end, n_window),
                label: if faulty { -1 } else { 1 },
            }
        })
        .collect())
}

/// Training windows for the fault-type identifier (+1 incipient, −1 abrupt).
///
/// Abrupt runs contribute their windows that end before the push (+1) and
/// the windows holding a sample inside the push interval (−1). Incipient
/// windows are taken every k-th so their count roughly matches the −1 class.
pub fn identifier_windows(trajs: &[&PreparedTrajectory], n_window: usize) -> Vec<FeatureWindow> {
    let mut abrupt = Vec::new();
    let mut incipient = Vec::new();
    for &traj in trajs {
        let d = traj.dim();
        for end in n_window.max(1) - 1..traj.len() {
            let times = &traj.times[end + 1 - n_window..=end];
            let label = match traj.kind {
                FaultKind::Abrupt => {
                    if traj.times[end] < traj.fault_start {
                        1
                    } else if times.iter().any(|&t| t >= traj.fault_start && t <= traj.fault_end) {
                        -1
                    } else {
                        continue;
                    }
                }
                FaultKind::Incipient => 1,
                FaultKind::None => continue,
            };
            let w = FeatureWindow {
                trajectory_id: traj.id,
                end_time: traj.times[end],
                end_index: end,
                m: n_window,
                d,
                data: traj.window_data(end, n_window),
                label,
            };
            if traj.kind == FaultKind::Abrupt {
                abrupt.push(w);
            } else {
                incipient.push(w);
            }
        }
    }
    let n_faulty = abrupt.iter().filter(|w| w.label == -1).count();
    let k = (incipient.len() / n_faulty.max(1)).max(1);
    abrupt.extend(incipient.into_iter().step_by(k));
    abrupt
}

/// One row per window: id, end time, label, then the m·d values. Each
/// `comments` line is written first, prefixed with `# `.
pub fn export_windows(path: &Path, windows: &[FeatureWindow], comments: &[String]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    for c in comments {
        writeln!(out, "# {c}").map_err(io)?;
    }
    if let Some(w) = windows.first() {
        let cols: Vec<String> = (0..w.m)
            .flat_map(|i| (0..w.d).map(move |j| format!("x{i}_{j}")))
            .collect();
        writeln!(out, "id,end_time,label,{}", cols.join(",")).map_err(io)?;
    }
    for w in windows {
        let vals: Vec<String> = w.data.iter().map(|&v| fmt_sig9(v)).collect();
        writeln!(out, "{},{},{},{}", w.trajectory_id, fmt_sig9(w.end_time), w.label, vals.join(",")).map_err(io)?;
    }
    out.flush().map_err(io)
}

//! Fault injection and trajectory generation.
//!
//! Every trajectory starts from the nominal stance, receives a random
//! impulse at t = 0 that dies out before the recorded window, and then one
//! torso push: a short abrupt one or a long, weak incipient one.

mod calibrate;
mod io;

use nalgebra::Vector2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{nominal_stance, point_kinematics, simulate_piecewise, Actuation, BodyPoint, ContactState, Sample};
use crate::error::{Error, Result};
use crate::params::RobotParams;
use crate::util::{fmt_sig9, sha256_hex, stream_rng};

pub use calibrate::{calibrate_ranges, Calibration};
pub use io::{load_dataset, load_manifest, read_trajectory_csv, save_dataset, trajectory_csv, Sidecar, CSV_HEADER};

pub const GENERATOR_VERSION: &str = concat!("falltime-", env!("CARGO_PKG_VERSION"), "/gen1");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultKind {
    Abrupt,
    Incipient,
    None,
}

impl FaultKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FaultKind::Abrupt => "abrupt",
            FaultKind::Incipient => "incipient",
            FaultKind::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "+x")]
    Forward,
    #[serde(rename = "-x")]
    Backward,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }

    fn random(rng: &mut ChaCha8Rng) -> Self {
        if rng.gen_bool(0.5) {
            Direction::Forward
        } else {
            Direction::Backward
        }
    }
}

/// Time course of the push magnitude over its duration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForceProfile {
    Constant,
    /// Linear rise from zero to the magnitude.
    Ramp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub kind: FaultKind,
    pub magnitude: f64,
    pub t_start: f64,
    pub duration: f64,
    pub direction: Direction,
    pub profile: ForceProfile,
}

impl FaultSpec {
    pub fn none() -> Self {
        Self {
            kind: FaultKind::None,
            magnitude: 0.0,
            t_start: 0.0,
            duration: 0.0,
            direction: Direction::Forward,
            profile: ForceProfile::Constant,
        }
    }

    pub fn t_end(&self) -> f64 {
        self.t_start + self.duration
    }

    /// Signed horizontal force at time `t`; active on [t_start, t_end).
    pub fn force_x(&self, t: f64) -> f64 {
        if self.kind == FaultKind::None || t < self.t_start || t >= self.t_end() {
            return 0.0;
        }
        let scale = match self.profile {
            ForceProfile::Constant => 1.0,
            ForceProfile::Ramp => (t - self.t_start) / self.duration,
        };
        self.direction.sign() * self.magnitude * scale
    }
}

/// Push applied at t = 0 to randomize the state at the start of recording.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Impulse {
    pub magnitude: f64,
    pub duration: f64,
    pub direction: Direction,
}

impl Impulse {
    pub fn zero() -> Self {
        Self {
            magnitude: 0.0,
            duration: 0.075,
            direction: Direction::Forward,
        }
    }

    pub fn force_x(&self, t: f64) -> f64 {
        if (0.0..self.duration).contains(&t) {
            self.direction.sign() * self.magnitude
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultRange {
    pub max_force: f64,
    pub t_start_min: f64,
    pub t_start_max: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub abrupt_count: usize,
    pub incipient_count: usize,
    pub abrupt: FaultRange,
    pub incipient: FaultRange,
    pub incipient_profile: ForceProfile,
    pub impulse_max: f64,
    pub impulse_duration: f64,
    /// Simulation horizon of every run.
    pub horizon: f64,
    /// Samples before this time are discarded.
    pub keep_after: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            abrupt_count: 400,
            incipient_count: 400,
            abrupt: FaultRange {
                max_force: 320.0,
                t_start_min: 2.5,
                t_start_max: 3.5,
                duration: 0.075,
            },
            incipient: FaultRange {
                max_force: 46.0,
                t_start_min: 2.0,
                t_start_max: 3.5,
                duration: 1.0,
            },
            incipient_profile: ForceProfile::Constant,
            impulse_max: 159.0,
            impulse_duration: 0.075,
            horizon: 8.0,
            keep_after: 2.0,
        }
    }
}

impl ScenarioConfig {
    pub fn range(&self, kind: FaultKind) -> Option<&FaultRange> {
        match kind {
            FaultKind::Abrupt => Some(&self.abrupt),
            FaultKind::Incipient => Some(&self.incipient),
            FaultKind::None => None,
        }
    }

    pub fn range_mut(&mut self, kind: FaultKind) -> Option<&mut FaultRange> {
        match kind {
            FaultKind::Abrupt => Some(&mut self.abrupt),
            FaultKind::Incipient => Some(&mut self.incipient),
            FaultKind::None => None,
        }
    }

    /// Fault kind of trajectory `id`: abrupt ids come first.
    pub fn kind_of(&self, id: u64) -> FaultKind {
        if (id as usize) < self.abrupt_count {
            FaultKind::Abrupt
        } else {
            FaultKind::Incipient
        }
    }

    pub fn total_count(&self) -> usize {
        self.abrupt_count + self.incipient_count
    }
}

/// Draws a fault of the given kind from the configured ranges.
pub fn sample_fault(kind: FaultKind, config: &ScenarioConfig, rng: &mut ChaCha8Rng) -> FaultSpec {
    let Some(range) = config.range(kind) else {
        return FaultSpec::none();
    };
    // Magnitude is u * max so that a common stream gives forces monotone in max.
    let magnitude = rng.gen::<f64>() * range.max_force;
    let t_start = range.t_start_min + rng.gen::<f64>() * (range.t_start_max - range.t_start_min);
    let direction = Direction::random(rng);
    let profile = match kind {
        FaultKind::Incipient => config.incipient_profile,
        _ => ForceProfile::Constant,
    };
    FaultSpec {
        kind,
        magnitude,
        t_start,
        duration: range.duration,
        direction,
        profile,
    }
}

pub fn sample_impulse(config: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Impulse {
    let magnitude = rng.gen::<f64>() * config.impulse_max;
    Impulse {
        magnitude,
        duration: config.impulse_duration,
        direction: Direction::random(rng),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Fall,
    Safe,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub id: u64,
    pub samples: Vec<Sample>,
    pub fault: FaultSpec,
    pub impulse: Impulse,
    pub fall_time: Option<f64>,
    pub max_constraint_residual: f64,
}

impl Trajectory {
    pub fn outcome(&self) -> Outcome {
        if self.fall_time.is_some() {
            Outcome::Fall
        } else {
            Outcome::Safe
        }
    }

    pub fn kind(&self) -> FaultKind {
        self.fault.kind
    }

    pub fn heel_or_toe_lift(&self) -> bool {
        self.samples.iter().any(|s| s.contact.mode.is_rotation())
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }
}

fn quantize(v: f64) -> f64 {
    fmt_sig9(v).parse().expect("formatted float parses")
}

/// Rounds every stored quantity to the 9 significant digits kept on disk and
/// rebuilds the contact summary, so in-memory and reloaded trajectories agree
/// bit for bit.
pub(crate) fn quantize_sample(s: &Sample, params: &RobotParams) -> Sample {
    let q = s.q.map(quantize);
    let qd = s.qd.map(quantize);
    let toe = s.contact.toe.map(quantize);
    let heel = s.contact.heel.map(quantize);
    Sample {
        t: quantize(s.t),
        q,
        qd,
        u: s.u.map(quantize),
        contact: contact_from_forces(&q, toe, heel, params),
    }
}

pub(crate) fn contact_from_forces(
    q: &nalgebra::Vector6<f64>,
    toe: Vector2<f64>,
    heel: Vector2<f64>,
    params: &RobotParams,
) -> ContactState {
    let zero = nalgebra::Vector6::zeros();
    let toe_x = point_kinematics(params, q, &zero, BodyPoint::Toe).pos.x;
    let heel_x = point_kinematics(params, q, &zero, BodyPoint::Heel).pos.x;
    ContactState::from_forces(toe, heel, toe_x, heel_x)
}

/// Simulates one trajectory and applies the retention rules: samples before
/// `keep_after` are dropped, and incipient runs also drop samples before the
/// fault starts. Recording stops at the first fallen sample.
pub fn generate_trajectory(
    id: u64,
    fault: &FaultSpec,
    impulse: &Impulse,
    params: &RobotParams,
    config: &ScenarioConfig,
) -> Result<Trajectory> {
    let force = |t: f64| Vector2::new(impulse.force_x(t) + fault.force_x(t), 0.0);
    let breaks = [impulse.duration, fault.t_start, fault.t_end()];
    let outcome = simulate_piecewise(nominal_stance(params), &force, &breaks, config.horizon, Actuation::Pd, params)
        .map_err(|e| match e {
            Error::IntegrationDiverged { t, .. } => Error::IntegrationDiverged { t, trajectory: Some(id) },
            other => other,
        })?;
    let first_kept = match fault.kind {
        FaultKind::Incipient => config.keep_after.max(fault.t_start),
        _ => config.keep_after,
    };
    let samples: Vec<Sample> = outcome
        .samples
        .iter()
        .filter(|s| s.t >= first_kept)
        .map(|s| quantize_sample(s, params))
        .collect();
    let fall_time = outcome.fall_time.map(quantize);
    Ok(Trajectory {
        id,
        samples,
        fault: *fault,
        impulse: *impulse,
        fall_time,
        max_constraint_residual: outcome.max_constraint_residual,
    })
}

/// Draws the fault and impulse of trajectory `id` from its own stream and
/// simulates it.
pub fn generate_one(id: u64, seed: u64, params: &RobotParams, config: &ScenarioConfig) -> Result<Trajectory> {
    let mut rng = stream_rng(seed, id);
    let fault = sample_fault(config.kind_of(id), config, &mut rng);
    let impulse = sample_impulse(config, &mut rng);
    generate_trajectory(id, &fault, &impulse, params, config)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KindSummary {
    pub count: usize,
    pub falls: usize,
    pub fall_fraction: f64,
    pub safe_with_lift: usize,
    /// Fraction of safe trajectories with a heel or toe lift.
    pub lift_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEntry {
    pub id: u64,
    pub kind: FaultKind,
    pub outcome: Outcome,
    pub file: String,
    pub sidecar: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub generator_version: String,
    pub seed: u64,
    pub config: ScenarioConfig,
    pub config_hash: String,
    pub robot_params_name: String,
    pub robot_params_hash: String,
    pub abrupt: KindSummary,
    pub incipient: KindSummary,
    pub trajectories: Vec<TrajectoryEntry>,
}

impl DatasetManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    /// SHA-256 of the manifest file contents.
    pub fn hash(&self) -> String {
        sha256_hex(self.to_json().as_bytes())
    }
}

/// Hash identifying the generation inputs.
pub fn generation_hash(config: &ScenarioConfig, seed: u64, params: &RobotParams) -> String {
    let echo = serde_json::json!({
        "generator_version": GENERATOR_VERSION,
        "seed": seed,
        "config": config,
        "robot_params_hash": params.hash(),
    });
    sha256_hex(echo.to_string().as_bytes())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub trajectories: Vec<Trajectory>,
}

impl Dataset {
    pub fn get(&self, id: u64) -> Option<&Trajectory> {
        self.trajectories.iter().find(|t| t.id == id)
    }
}

fn summarize(trajs: &[&Trajectory]) -> KindSummary {
    let count = trajs.len();
    let falls = trajs.iter().filter(|t| t.outcome() == Outcome::Fall).count();
    let safe = count - falls;
    let safe_with_lift = trajs
        .iter()
        .filter(|t| t.outcome() == Outcome::Safe && t.heel_or_toe_lift())
        .count();
    let frac = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    KindSummary {
        count,
        falls,
        fall_fraction: frac(falls, count),
        safe_with_lift,
        lift_fraction: frac(safe_with_lift, safe),
    }
}

pub fn file_names(id: u64) -> (String, String) {
    (
        format!("trajectories/traj_{id:06}.csv"),
        format!("trajectories/traj_{id:06}.meta.json"),
    )
}

/// Generates all trajectories of `config` in parallel, one random stream per
/// trajectory id, and assembles the manifest.
pub fn generate_dataset(config: &ScenarioConfig, seed: u64, params: &RobotParams) -> Result<Dataset> {
    params.validate()?;
    let n = config.total_count() as u64;
    let trajectories = (0..n)
        .into_par_iter()
        .map(|id| generate_one(id, seed, params, config))
        .collect::<Result<Vec<_>>>()?;
    let config_hash = generation_hash(config, seed, params);
    let entries = trajectories
        .iter()
        .map(|t| {
            let (file, sidecar) = file_names(t.id);
            TrajectoryEntry {
                id: t.id,
                kind: t.kind(),
                outcome: t.outcome(),
                file,
                sidecar,
                sha256: sha256_hex(trajectory_csv(t).as_bytes()),
            }
        })
        .collect();
    let of_kind = |k: FaultKind| trajectories.iter().filter(|t| t.kind() == k).collect::<Vec<_>>();
    let manifest = DatasetManifest {
        generator_version: GENERATOR_VERSION.to_string(),
        seed,
        config: config.clone(),
        config_hash,
        robot_params_name: params.name.clone(),
        robot_params_hash: params.hash(),
        abrupt: summarize(&of_kind(FaultKind::Abrupt)),
        incipient: summarize(&of_kind(FaultKind::Incipient)),
        trajectories: entries,
    };
    for (name, s) in [("abrupt", &manifest.abrupt), ("incipient", &manifest.incipient)] {
        log::info!(
            "{name}: {} trajectories, fall fraction {:.3}, lift fraction of safe {:.3}",
            s.count,
            s.fall_fraction,
            s.lift_fraction
        );
        if s.count > 0 && !(0.4..=0.6).contains(&s.fall_fraction) {
            log::warn!("{name} fall fraction {:.3} outside [0.4, 0.6]", s.fall_fraction);
        }
    }
    Ok(Dataset { manifest, trajectories })
}

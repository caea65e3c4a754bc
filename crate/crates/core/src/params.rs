//! Physical, controller and contact constants of the four-link robot.
//!
//! Every quantity the simulation depends on lives here so that a run can be
//! reproduced from a single `robot.params` file. The file is TOML with a
//! mandatory `schema_version` key.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PARAMS_SCHEMA_VERSION: u32 = 1;

/// Mass properties of one rigid link.
///
/// `com_offset` is measured from the proximal joint along the link axis. For
/// the foot the proximal joint is the ankle and the offset points down
/// towards the sole.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    pub length: f64,
    pub mass: f64,
    /// Planar moment of inertia about the link CoM.
    pub inertia: f64,
    pub com_offset: f64,
}

impl LinkParams {
    /// Uniform rod of the given length and mass, CoM at mid-length.
    pub fn uniform_rod(length: f64, mass: f64) -> Self {
        Self {
            length,
            mass,
            inertia: mass * length * length / 12.0,
            com_offset: 0.5 * length,
        }
    }
}

/// Foot geometry in the foot frame, whose origin is the ankle joint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FootGeometry {
    /// Horizontal position of the toe contact point (positive, forward).
    pub toe_x: f64,
    /// Horizontal position of the heel contact point (negative, backward).
    pub heel_x: f64,
    /// Vertical distance from the ankle down to the sole.
    pub sole_depth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactParams {
    pub normal_stiffness: f64,
    pub normal_damping: f64,
    pub tangential_stiffness: f64,
    pub tangential_damping: f64,
}

/// What the ankle channel of the PD law regulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnkleReference {
    /// Shank angle in the world frame (foot angle + ankle angle).
    Absolute,
    /// Ankle joint angle relative to the foot.
    Relative,
}

/// PD gains for ankle, knee and hip, in that order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerParams {
    pub ankle_reference: AnkleReference,
    pub kp: [f64; 3],
    pub kd: [f64; 3],
    pub setpoint: [f64; 3],
    pub torque_limit: [f64; 3],
}

/// Passive one-sided spring-damper stops on the ankle, knee and hip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLimits {
    pub lower: [f64; 3],
    pub upper: [f64; 3],
    pub stiffness: f64,
    pub damping: f64,
}

/// Where the disturbing force acts on the torso.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PushPoint {
    TorsoCom,
    TorsoTip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FallParams {
    /// Height above which a foot contact point counts as airborne.
    pub airborne_height: f64,
    /// Time both contact points must stay airborne before a fall is declared.
    pub airborne_dwell: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotParams {
    pub schema_version: u32,
    pub name: String,
    pub gravity: f64,
    pub foot: LinkParams,
    pub foot_geometry: FootGeometry,
    pub shank: LinkParams,
    pub thigh: LinkParams,
    pub torso: LinkParams,
    pub contact: ContactParams,
    pub controller: ControllerParams,
    pub joint_limits: JointLimits,
    pub fall: FallParams,
    pub push_point: PushPoint,
    /// Fixed integrator step.
    pub integrator_step: f64,
    /// Recording period of the stored trajectories.
    pub sample_period: f64,
    /// Any |q_i| or |qd_i| above this aborts the integration.
    pub divergence_bound: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        Self::atalante_scale()
    }
}

impl RobotParams {
    /// Default parameter set: an exoskeleton-plus-user sized standing robot
    /// of about 75 kg.
    pub fn atalante_scale() -> Self {
        let foot_length = 0.2;
        let sole_depth = 0.08;
        let foot_mass = 4.0;
        Self {
            schema_version: PARAMS_SCHEMA_VERSION,
            name: "atalante-scale-v1".to_string(),
            gravity: 9.81,
            foot: LinkParams {
                length: foot_length,
                mass: foot_mass,
                inertia: foot_mass * (foot_length * foot_length + sole_depth * sole_depth) / 12.0,
                com_offset: 0.5 * sole_depth,
            },
            foot_geometry: FootGeometry {
                toe_x: 0.5 * foot_length,
                heel_x: -0.5 * foot_length,
                sole_depth,
            },
            shank: LinkParams::uniform_rod(0.45, 10.0),
            thigh: LinkParams::uniform_rod(0.45, 16.0),
            torso: LinkParams::uniform_rod(0.6, 45.0),
            contact: ContactParams {
                normal_stiffness: 1.0e5,
                normal_damping: 1.0e3,
                tangential_stiffness: 1.0e5,
                tangential_damping: 1.0e3,
            },
            controller: ControllerParams {
                ankle_reference: AnkleReference::Absolute,
                kp: [2000.0, 3000.0, 2000.0],
                kd: [400.0, 100.0, 80.0],
                setpoint: [0.0, 0.0, 0.0],
                torque_limit: [150.0, 200.0, 200.0],
            },
            joint_limits: JointLimits {
                lower: [-0.45, -2.0, -2.0],
                upper: [0.45, 2.0, 2.0],
                stiffness: 2000.0,
                damping: 20.0,
            },
            fall: FallParams {
                airborne_height: 0.03,
                airborne_dwell: 0.06,
            },
            push_point: PushPoint::TorsoTip,
            integrator_step: 5.0e-4,
            sample_period: 0.03,
            divergence_bound: 1.0e3,
        }
    }

    pub fn links(&self) -> [&LinkParams; 4] {
        [&self.foot, &self.shank, &self.thigh, &self.torso]
    }

    pub fn total_mass(&self) -> f64 {
        self.links().iter().map(|l| l.mass).sum()
    }

    /// Number of integrator steps per recorded sample.
    pub fn steps_per_sample(&self) -> usize {
        (self.sample_period / self.integrator_step).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.schema_version != PARAMS_SCHEMA_VERSION {
            return bad(format!(
                "schema_version {} (expected {PARAMS_SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        for (name, link) in ["foot", "shank", "thigh", "torso"].iter().zip(self.links()) {
            if !(link.length > 0.0 && link.mass > 0.0 && link.inertia > 0.0) {
                return bad(format!("{name}: length, mass and inertia must be positive"));
            }
        }
        let c = &self.contact;
        if !(c.normal_stiffness > 0.0
            && c.normal_damping > 0.0
            && c.tangential_stiffness > 0.0
            && c.tangential_damping > 0.0)
        {
            return bad("contact stiffness and damping must be positive".into());
        }
        let ctl = &self.controller;
        if ctl.torque_limit.iter().any(|&l| l <= 0.0) {
            return bad("torque limits must be positive".into());
        }
        if ctl.kp.iter().chain(ctl.kd.iter()).any(|&g| g < 0.0) {
            return bad("controller gains must be non-negative".into());
        }
        if !(self.integrator_step > 0.0 && self.sample_period > 0.0) {
            return bad("integrator_step and sample_period must be positive".into());
        }
        let ratio = self.sample_period / self.integrator_step;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            return bad("sample_period must be an integer multiple of integrator_step".into());
        }
        let lim = &self.joint_limits;
        if (0..3).any(|j| lim.lower[j] >= lim.upper[j]) || lim.stiffness < 0.0 || lim.damping < 0.0 {
            return bad("joint limits must satisfy lower < upper with non-negative stiffness".into());
        }
        if self.foot_geometry.toe_x <= self.foot_geometry.heel_x {
            return bad("toe must lie ahead of the heel".into());
        }
        if self.gravity <= 0.0 || self.divergence_bound <= 0.0 {
            return bad("gravity and divergence_bound must be positive".into());
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("RobotParams serializes to TOML")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let params = Self::from_toml_str(&text).map_err(|m| Error::format(path, m))?;
        params.validate()?;
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()).map_err(|e| Error::io(path, e))
    }

    /// SHA-256 of the canonical TOML serialization.
    pub fn hash(&self) -> String {
        crate::util::sha256_hex(self.to_toml_string().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_about_75kg() {
        let p = RobotParams::default();
        p.validate().unwrap();
        assert!((p.total_mass() - 75.0).abs() < 1e-9);
        assert_eq!(p.steps_per_sample(), 60);
    }

    #[test]
    fn toml_roundtrip_preserves_hash() {
        let p = RobotParams::default();
        let back = RobotParams::from_toml_str(&p.to_toml_string()).unwrap();
        assert_eq!(p, back);
        assert_eq!(p.hash(), back.hash());
    }

    #[test]
    fn rejects_nonpositive_mass() {
        let mut p = RobotParams::default();
        p.thigh.mass = 0.0;
        assert!(matches!(p.validate(), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn rejects_wrong_schema_version() {
        let mut p = RobotParams::default();
        p.schema_version = 99;
        assert!(p.validate().is_err());
    }

    #[test]
    fn rejects_incommensurate_sampling() {
        let mut p = RobotParams::default();
        p.integrator_step = 0.0007;
        assert!(p.validate().is_err());
    }
}

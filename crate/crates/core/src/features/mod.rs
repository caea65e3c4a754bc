//! Whole-body kinematic summaries and the feature vectors fed to the
//! detectors.

mod dcor;
mod report;

use std::fmt;
use std::str::FromStr;

use nalgebra::{Vector2, Vector6};
use serde::{Deserialize, Serialize};

use crate::dynamics::{link_angles, point_kinematics, BodyPoint, ContactMode, ContactState, GeneralizedState, Link, Sample};
use crate::error::{Error, Result};
use crate::params::RobotParams;

pub use dcor::{distance_correlation, subsample_indices, DCOR_MAX_SAMPLES};
pub use report::{feature_report, feature_report_columns, FeatureReport};

/// CoM motion, foot landmarks and planar angular momenta of one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicsSummary {
    pub p_com: Vector2<f64>,
    pub v_com: Vector2<f64>,
    pub p_toe: Vector2<f64>,
    pub p_heel: Vector2<f64>,
    pub p_f_mid: Vector2<f64>,
    pub p_cop_x: Option<f64>,
    /// Angular momentum about the CoM.
    pub l_com: f64,
    /// Angular momentum about the ground contact point.
    pub l_cop: f64,
    pub contact_point_x: f64,
    pub total_mass: f64,
    pub q: Vector6<f64>,
    pub qd: Vector6<f64>,
}

#[inline]
fn cross(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

/// The contact point is the toe or heel while the foot rotates about it, the
/// center of pressure in flat contact and the mid-foot when airborne. It
/// lies on the ground (z = 0).
pub fn kinematics(state: &GeneralizedState, contact: &ContactState, params: &RobotParams) -> KinematicsSummary {
    let (q, qd) = (&state.q, &state.qd);
    let (_, omega) = link_angles(q, qd);
    let links: Vec<_> = Link::ALL
        .iter()
        .map(|&l| point_kinematics(params, q, qd, BodyPoint::LinkCom(l)))
        .collect();
    let masses = params.links().map(|l| l.mass);
    let inertias = params.links().map(|l| l.inertia);
    let total_mass: f64 = masses.iter().sum();

    let mut p_com = Vector2::zeros();
    let mut v_com = Vector2::zeros();
    for (k, m) in links.iter().zip(masses) {
        p_com += k.pos * m;
        v_com += k.vel * m;
    }
    p_com /= total_mass;
    v_com /= total_mass;

    let p_toe = point_kinematics(params, q, qd, BodyPoint::Toe).pos;
    let p_heel = point_kinematics(params, q, qd, BodyPoint::Heel).pos;
    let p_f_mid = (p_toe + p_heel) * 0.5;
    let contact_point_x = match contact.mode {
        ContactMode::ToeRotation => p_toe.x,
        ContactMode::HeelRotation => p_heel.x,
        ContactMode::Flat => contact.cop_x.unwrap_or(p_f_mid.x),
        ContactMode::Airborne => p_f_mid.x,
    };
    let p_contact = Vector2::new(contact_point_x, 0.0);

    let mut l_com = 0.0;
    let mut l_cop = 0.0;
    for j in 0..4 {
        let spin = inertias[j] * omega[j];
        let k = &links[j];
        l_com += masses[j] * cross(&(k.pos - p_com), &k.vel) + spin;
        l_cop += masses[j] * cross(&(k.pos - p_contact), &k.vel) + spin;
    }

    KinematicsSummary {
        p_com,
        v_com,
        p_toe,
        p_heel,
        p_f_mid,
        p_cop_x: contact.cop_x,
        l_com,
        l_cop,
        contact_point_x,
        total_mass,
        q: *q,
        qd: *qd,
    }
}

pub fn sample_kinematics(sample: &Sample, params: &RobotParams) -> KinematicsSummary {
    kinematics(&sample.state(), &sample.contact, params)
}

/// Registered feature vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureSet {
    /// Momentum, CoM and foot-geometry set used throughout (7 values).
    Default,
    /// Forward-selected set for incipient faults (4 values).
    IncipientSfs,
    /// Forward-selected set for abrupt faults (6 values).
    AbruptSfs,
    /// Set built from distance-correlation screening (8 values).
    DcorSlow,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 4] = [
        FeatureSet::Default,
        FeatureSet::IncipientSfs,
        FeatureSet::AbruptSfs,
        FeatureSet::DcorSlow,
    ];

    pub fn id(self) -> &'static str {
        match self {
            FeatureSet::Default => "default",
            FeatureSet::IncipientSfs => "incipient-sfs",
            FeatureSet::AbruptSfs => "abrupt-sfs",
            FeatureSet::DcorSlow => "dcor-slow",
        }
    }

    pub fn names(self) -> &'static [&'static str] {
        match self {
            FeatureSet::Default => &[
                "l_cop_minus_l_com",
                "p_com_x",
                "v_com_x",
                "toe_minus_com_x",
                "heel_minus_toe_x",
                "heel_minus_toe_z",
                "signed_l_sum",
            ],
            FeatureSet::IncipientSfs => &["knee", "hip", "d_hip", "signed_l_sum"],
            FeatureSet::AbruptSfs => &["p_com_x", "v_com_x", "com_minus_heel_x", "foot_x", "d_foot_z", "d_hip"],
            FeatureSet::DcorSlow => &[
                "l_com",
                "knee",
                "hip",
                "d_knee",
                "d_hip",
                "d_torso",
                "com_minus_contact_x",
                "com_minus_mid_z",
            ],
        }
    }

    pub fn dim(self) -> usize {
        self.names().len()
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureSet::ALL
            .into_iter()
            .find(|f| f.id() == s)
            .ok_or_else(|| Error::UnknownFeatureSet(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFrame {
    pub set: FeatureSet,
    pub values: Vec<f64>,
}

/// sgn with sgn(0) = +1.
#[inline]
pub fn sign_nonneg(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

pub fn feature_values(s: &KinematicsSummary, set: FeatureSet) -> Vec<f64> {
    let signed_l_sum = (s.l_cop + s.l_com) * sign_nonneg(s.p_com.x - s.p_f_mid.x);
    match set {
        FeatureSet::Default => vec![
            s.l_cop - s.l_com,
            s.p_com.x,
            s.v_com.x,
            s.p_toe.x - s.p_com.x,
            s.p_heel.x - s.p_toe.x,
            s.p_heel.y - s.p_toe.y,
            signed_l_sum,
        ],
        FeatureSet::IncipientSfs => vec![s.q[4], s.q[5], s.qd[5], signed_l_sum],
        FeatureSet::AbruptSfs => vec![
            s.p_com.x,
            s.v_com.x,
            s.p_com.x - s.p_heel.x,
            s.q[0],
            s.qd[1],
            s.qd[5],
        ],
        FeatureSet::DcorSlow => vec![
            s.l_com,
            s.q[4],
            s.q[5],
            s.qd[4],
            s.qd[5],
            s.qd.rows(2, 4).sum(),
            s.p_com.x - s.contact_point_x,
            s.p_com.y - s.p_f_mid.y,
        ],
    }
}

pub fn feature_frame(summary: &KinematicsSummary, set: FeatureSet) -> FeatureFrame {
    FeatureFrame {
        set,
        values: feature_values(summary, set),
    }
}

/// Feature vector of every sample, in time order.
pub fn trajectory_features(samples: &[Sample], set: FeatureSet, params: &RobotParams) -> Vec<Vec<f64>> {
    samples
        .iter()
        .map(|s| feature_values(&sample_kinematics(s, params), set))
        .collect()
}

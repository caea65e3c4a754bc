use nalgebra::Vector3;

use super::GeneralizedState;
use crate::params::{AnkleReference, RobotParams};

/// PD law for the ankle, knee and hip with symmetric saturation.
///
/// Knee and hip track their joint setpoints. The ankle tracks its setpoint
/// either as a joint angle or, by default, as the shank's world-frame angle,
/// which equals the joint angle whenever the foot is flat.
pub fn pd_control(state: &GeneralizedState, params: &RobotParams) -> Vector3<f64> {
    let c = &params.controller;
    Vector3::from_fn(|j, _| {
        let (angle, rate) = match (j, c.ankle_reference) {
            (0, AnkleReference::Absolute) => (state.q[2] + state.q[3], state.qd[2] + state.qd[3]),
            _ => (state.q[3 + j], state.qd[3 + j]),
        };
        let raw = c.kp[j] * (c.setpoint[j] - angle) - c.kd[j] * rate;
        raw.clamp(-c.torque_limit[j], c.torque_limit[j])
    })
}

/// Passive stop torques for joints outside their range. The stops push the
/// joint back inside and never pull.
pub fn joint_limit_torque(state: &GeneralizedState, params: &RobotParams) -> Vector3<f64> {
    let lim = &params.joint_limits;
    Vector3::from_fn(|j, _| {
        let (q, qd) = (state.q[3 + j], state.qd[3 + j]);
        if q > lim.upper[j] {
            (-lim.stiffness * (q - lim.upper[j]) - lim.damping * qd).min(0.0)
        } else if q < lim.lower[j] {
            (-lim.stiffness * (q - lim.lower[j]) - lim.damping * qd).max(0.0)
        } else {
            0.0
        }
    })
}

//! Compliant spring-damper ground contact at the toe and heel.

use nalgebra::{Vector2, Vector6};

use super::model::{point_kinematics, BodyPoint};
use crate::params::RobotParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ContactMode {
    Flat,
    ToeRotation,
    HeelRotation,
    Airborne,
}

impl ContactMode {
    pub fn is_rotation(self) -> bool {
        matches!(self, ContactMode::ToeRotation | ContactMode::HeelRotation)
    }
}

/// Ground reaction forces at the two foot contact points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactState {
    /// (f_x, f_z) at the toe.
    pub toe: Vector2<f64>,
    /// (f_x, f_z) at the heel.
    pub heel: Vector2<f64>,
    /// Center of pressure, present when the total normal force is positive.
    pub cop_x: Option<f64>,
    pub mode: ContactMode,
}

impl ContactState {
    /// Rebuilds mode and center of pressure from recorded forces and the
    /// contact point positions.
    pub fn from_forces(toe: Vector2<f64>, heel: Vector2<f64>, toe_x: f64, heel_x: f64) -> Self {
        let mode = match (toe.y > 0.0, heel.y > 0.0) {
            (true, true) => ContactMode::Flat,
            (true, false) => ContactMode::ToeRotation,
            (false, true) => ContactMode::HeelRotation,
            (false, false) => ContactMode::Airborne,
        };
        let total = toe.y + heel.y;
        let cop_x = (total > 0.0).then(|| (toe.y * toe_x + heel.y * heel_x) / total);
        Self {
            toe,
            heel,
            cop_x,
            mode,
        }
    }

    pub fn airborne() -> Self {
        Self {
            toe: Vector2::zeros(),
            heel: Vector2::zeros(),
            cop_x: None,
            mode: ContactMode::Airborne,
        }
    }
}

/// An anchor survives lift-offs lower than this, so sub-millimetre chatter
/// does not discard the tangential spring's preload.
pub const RELEASE_HEIGHT: f64 = 1e-3;

/// Touchdown positions anchoring the tangential springs. `None` once the
/// point has lifted clear of the ground.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ContactAnchors {
    pub toe: Option<f64>,
    pub heel: Option<f64>,
}

impl ContactAnchors {
    /// Sets anchors for points that touched down and releases lifted ones.
    pub fn update(&mut self, q: &Vector6<f64>, params: &RobotParams) {
        self.update_step(None, q, params);
    }

    /// Like [`update`](Self::update) after a step from `q_prev`: a new anchor
    /// is placed where the point crossed the ground, interpolated linearly.
    pub fn update_step(&mut self, q_prev: Option<&Vector6<f64>>, q: &Vector6<f64>, params: &RobotParams) {
        let zero = Vector6::zeros();
        for (point, anchor) in [(BodyPoint::Toe, &mut self.toe), (BodyPoint::Heel, &mut self.heel)] {
            let pos = point_kinematics(params, q, &zero, point).pos;
            if pos.y > RELEASE_HEIGHT {
                *anchor = None;
            } else if pos.y <= 0.0 && anchor.is_none() {
                let prev = q_prev.map(|qp| point_kinematics(params, qp, &zero, point).pos);
                *anchor = Some(match prev {
                    Some(a) if a.y > 0.0 => a.x + (pos.x - a.x) * a.y / (a.y - pos.y),
                    _ => pos.x,
                });
            }
        }
    }
}

fn point_force(
    pos: Vector2<f64>,
    vel: Vector2<f64>,
    anchor: Option<f64>,
    params: &RobotParams,
) -> Vector2<f64> {
    let c = &params.contact;
    if pos.y >= 0.0 {
        return Vector2::zeros();
    }
    let normal = (-c.normal_stiffness * pos.y - c.normal_damping * vel.y).max(0.0);
    if normal == 0.0 {
        return Vector2::zeros();
    }
    let slip = pos.x - anchor.unwrap_or(pos.x);
    let tangential = -c.tangential_stiffness * slip - c.tangential_damping * vel.x;
    Vector2::new(tangential, normal)
}

/// Contact forces, center of pressure and contact mode for the current state.
pub fn contact_forces(
    q: &Vector6<f64>,
    qd: &Vector6<f64>,
    anchors: &ContactAnchors,
    params: &RobotParams,
) -> ContactState {
    let toe = point_kinematics(params, q, qd, BodyPoint::Toe);
    let heel = point_kinematics(params, q, qd, BodyPoint::Heel);
    let toe_force = point_force(toe.pos, toe.vel, anchors.toe, params);
    let heel_force = point_force(heel.pos, heel.vel, anchors.heel, params);
    ContactState::from_forces(toe_force, heel_force, toe.pos.x, heel.pos.x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stance_q(foot_z: f64, foot_angle: f64) -> Vector6<f64> {
        Vector6::new(0.0, foot_z, foot_angle, 0.0, 0.0, 0.0)
    }

    #[test]
    fn above_ground_is_airborne() {
        let p = RobotParams::default();
        let q = stance_q(p.foot_geometry.sole_depth + 0.01, 0.0);
        let c = contact_forces(&q, &Vector6::zeros(), &ContactAnchors::default(), &p);
        assert_eq!(c.mode, ContactMode::Airborne);
        assert_eq!(c.toe, Vector2::zeros());
        assert_eq!(c.heel, Vector2::zeros());
        assert!(c.cop_x.is_none());
    }

    #[test]
    fn symmetric_penetration_puts_cop_at_midfoot() {
        let p = RobotParams::default();
        let q = stance_q(p.foot_geometry.sole_depth - 0.003, 0.0);
        let c = contact_forces(&q, &Vector6::zeros(), &ContactAnchors::default(), &p);
        assert_eq!(c.mode, ContactMode::Flat);
        let mid = 0.5 * (p.foot_geometry.toe_x + p.foot_geometry.heel_x);
        assert!((c.cop_x.unwrap() - mid).abs() < 1e-12);
        assert!((c.toe.y - 300.0).abs() < 1e-9);
    }

    #[test]
    fn toe_only_penetration_matches_hand_computation() {
        let p = RobotParams::default();
        let g = p.foot_geometry;
        // Tilt the foot nose-down about the toe so the toe sits 2 mm deep.
        let theta: f64 = -0.1;
        let toe_local_z = g.toe_x * theta.sin() - g.sole_depth * theta.cos();
        let foot_z = -0.002 - toe_local_z;
        let q = Vector6::new(0.0, foot_z, theta, 0.0, 0.0, 0.0);
        let mut qd = Vector6::zeros();
        qd[1] = -0.05; // sinking at 5 cm/s
        let toe = point_kinematics(&p, &q, &qd, BodyPoint::Toe);
        assert!((toe.pos.y + 0.002).abs() < 1e-12);
        let anchors = ContactAnchors {
            toe: Some(toe.pos.x - 0.001),
            heel: None,
        };
        let c = contact_forces(&q, &qd, &anchors, &p);
        let k = p.contact.normal_stiffness;
        let cd = p.contact.normal_damping;
        let expected_fz = k * 0.002 - cd * toe.vel.y;
        let expected_fx = -p.contact.tangential_stiffness * 0.001 - p.contact.tangential_damping * toe.vel.x;
        assert!((c.toe.y - expected_fz).abs() < 1e-9);
        assert!((c.toe.x - expected_fx).abs() < 1e-9);
        assert_eq!(c.heel, Vector2::zeros());
        assert_eq!(c.mode, ContactMode::ToeRotation);
        assert_eq!(c.cop_x, Some(toe.pos.x));
    }

    #[test]
    fn rebounding_point_exerts_no_pull() {
        let p = RobotParams::default();
        let q = stance_q(p.foot_geometry.sole_depth - 0.001, 0.0);
        let mut qd = Vector6::zeros();
        qd[1] = 1.0; // leaving the ground fast: -k z - c zd < 0
        let c = contact_forces(&q, &qd, &ContactAnchors::default(), &p);
        assert_eq!(c.mode, ContactMode::Airborne);
        assert_eq!(c.toe.y, 0.0);
    }

    #[test]
    fn anchors_follow_touchdown_and_liftoff() {
        let p = RobotParams::default();
        let mut a = ContactAnchors::default();
        a.update(&stance_q(p.foot_geometry.sole_depth - 0.001, 0.0), &p);
        assert_eq!(a.toe, Some(p.foot_geometry.toe_x));
        let mut shifted = stance_q(p.foot_geometry.sole_depth - 0.001, 0.0);
        shifted[0] = 0.05;
        a.update(&shifted, &p);
        assert_eq!(a.toe, Some(p.foot_geometry.toe_x), "anchor stays at touchdown");
        a.update(&stance_q(p.foot_geometry.sole_depth + 0.01, 0.0), &p);
        assert_eq!(a, ContactAnchors::default());
    }
}

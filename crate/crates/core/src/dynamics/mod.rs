//! Planar four-link robot: rigid-body model, compliant contact, PD standing
//! controller, RK4 integration and the fall predicate.

mod contact;
mod control;
mod model;
mod sim;

use nalgebra::Vector6;

pub use contact::{contact_forces, ContactAnchors, ContactMode, ContactState};
pub use control::{joint_limit_torque, pd_control};
pub use model::{
    dynamics_terms, kinetic_energy, link_angles, point_kinematics, potential_energy,
    torque_distribution, BodyPoint, DynamicsTerms, Matrix6x3, PointKinematics,
};
pub use sim::{
    fall_predicate, generalized_acceleration, nominal_stance, simulate, simulate_piecewise, step, step_with, Actuation,
    FallMonitor, FallStatus, Sample, SimOutcome, SimState,
};

pub const NDOF: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Link {
    Foot = 0,
    Shank = 1,
    Thigh = 2,
    Torso = 3,
}

impl Link {
    pub const ALL: [Link; 4] = [Link::Foot, Link::Shank, Link::Thigh, Link::Torso];
}

/// Time-stamped generalized coordinates and velocities.
///
/// `q` = (foot x, foot z, foot angle, ankle, knee, hip).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralizedState {
    pub t: f64,
    pub q: Vector6<f64>,
    pub qd: Vector6<f64>,
}

impl GeneralizedState {
    pub fn new(t: f64, q: Vector6<f64>, qd: Vector6<f64>) -> Self {
        Self { t, q, qd }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.q.iter().chain(self.qd.iter()).all(|v| v.is_finite())
    }
}

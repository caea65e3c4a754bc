//! Fixed-step RK4 integration and the fall predicate.

use nalgebra::{Vector2, Vector3, Vector6};

use super::contact::{contact_forces, ContactAnchors, ContactState};
use super::control::{joint_limit_torque, pd_control};
use super::model::{inertia_and_bias, point_kinematics, solve_acceleration, torque_distribution, BodyPoint};
use super::{dynamics_terms, GeneralizedState};
use crate::error::{Error, Result};
use crate::params::{PushPoint, RobotParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Actuation {
    /// PD standing controller.
    Pd,
    /// No joint torques.
    Passive,
}

/// Integrator state: the generalized state plus the tangential spring anchors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimState {
    pub state: GeneralizedState,
    pub anchors: ContactAnchors,
}

impl SimState {
    pub fn new(state: GeneralizedState, params: &RobotParams) -> Self {
        let mut anchors = ContactAnchors::default();
        anchors.update(&state.q, params);
        Self { state, anchors }
    }
}

/// Upright stance with the feet pressed into the ground by the static
/// weight share and all joints at their setpoints.
pub fn nominal_stance(params: &RobotParams) -> SimState {
    let penetration = params.total_mass() * params.gravity / (2.0 * params.contact.normal_stiffness);
    let s = params.controller.setpoint;
    let q = Vector6::new(0.0, params.foot_geometry.sole_depth - penetration, 0.0, s[0], s[1], s[2]);
    SimState::new(GeneralizedState::new(0.0, q, Vector6::zeros()), params)
}

fn push_point(params: &RobotParams) -> BodyPoint {
    match params.push_point {
        PushPoint::TorsoCom => BodyPoint::TorsoCom,
        PushPoint::TorsoTip => BodyPoint::TorsoTip,
    }
}

fn actuation_torque(state: &GeneralizedState, actuation: Actuation, params: &RobotParams) -> Vector3<f64> {
    match actuation {
        Actuation::Pd => pd_control(state, params),
        Actuation::Passive => Vector3::zeros(),
    }
}

/// Solves the equations of motion for `q̈` given actuator torques, passive
/// joint stops, contact springs and an external force on the torso.
pub fn generalized_acceleration(
    state: &GeneralizedState,
    anchors: &ContactAnchors,
    u: &Vector3<f64>,
    external_force: &Vector2<f64>,
    params: &RobotParams,
) -> Result<(Vector6<f64>, ContactState)> {
    let (q, qd) = (&state.q, &state.qd);
    let (d, cqd, g) = inertia_and_bias(params, q, qd);
    let contact = contact_forces(q, qd, anchors, params);
    let stops = joint_limit_torque(state, params);
    let mut rhs = torque_distribution() * (u + stops) - cqd - g;
    for (point, force) in [(BodyPoint::Toe, contact.toe), (BodyPoint::Heel, contact.heel)] {
        if force != Vector2::zeros() {
            rhs += point_kinematics(params, q, qd, point).jacobian.transpose() * force;
        }
    }
    if *external_force != Vector2::zeros() {
        rhs += point_kinematics(params, q, qd, push_point(params)).jacobian.transpose() * external_force;
    }
    let qdd = solve_acceleration(d, &rhs).ok_or(Error::NonFiniteState)?;
    Ok((qdd, contact))
}

fn derivative(
    t: f64,
    q: &Vector6<f64>,
    qd: &Vector6<f64>,
    anchors: &ContactAnchors,
    force: &dyn Fn(f64) -> Vector2<f64>,
    actuation: Actuation,
    params: &RobotParams,
) -> Result<(Vector6<f64>, Vector6<f64>)> {
    let state = GeneralizedState::new(t, *q, *qd);
    let u = actuation_torque(&state, actuation, params);
    let (qdd, _) = generalized_acceleration(&state, anchors, &u, &force(t), params)?;
    Ok((*qd, qdd))
}

/// One RK4 step with a time-varying torso force. Anchors are frozen during
/// the step and refreshed from the end state.
pub fn step_with(
    sim: &SimState,
    force: &dyn Fn(f64) -> Vector2<f64>,
    actuation: Actuation,
    params: &RobotParams,
) -> Result<SimState> {
    rk4(sim, force, actuation, params, params.integrator_step)
}

/// The last stage takes the force's left limit at the step end so a force
/// switching exactly there does not leak into the step.
fn rk4(
    sim: &SimState,
    force: &dyn Fn(f64) -> Vector2<f64>,
    actuation: Actuation,
    params: &RobotParams,
    h: f64,
) -> Result<SimState> {
    let GeneralizedState { t, q, qd } = sim.state;
    let a = &sim.anchors;
    let (k1q, k1v) = derivative(t, &q, &qd, a, force, actuation, params)?;
    let (k2q, k2v) = derivative(t + 0.5 * h, &(q + k1q * (0.5 * h)), &(qd + k1v * (0.5 * h)), a, force, actuation, params)?;
    let (k3q, k3v) = derivative(t + 0.5 * h, &(q + k2q * (0.5 * h)), &(qd + k2v * (0.5 * h)), a, force, actuation, params)?;
    let (k4q, k4v) = derivative((t + h).next_down(), &(q + k3q * h), &(qd + k3v * h), a, force, actuation, params)?;
    let q_next = q + (k1q + k2q * 2.0 + k3q * 2.0 + k4q) * (h / 6.0);
    let qd_next = qd + (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
    let next = GeneralizedState::new(t + h, q_next, qd_next);
    let bound = params.divergence_bound;
    if !next.is_finite() || q_next.iter().chain(qd_next.iter()).any(|v| v.abs() > bound) {
        return Err(Error::IntegrationDiverged { t: t + h, trajectory: None });
    }
    let mut anchors = sim.anchors;
    anchors.update_step(Some(&q), &q_next, params);
    Ok(SimState { state: next, anchors })
}

/// Advances from `sim.state.t` to `t_end`, splitting the step at any force
/// discontinuity in between.
fn step_to(
    sim: &SimState,
    t_end: f64,
    force: &dyn Fn(f64) -> Vector2<f64>,
    breaks: &[f64],
    actuation: Actuation,
    params: &RobotParams,
) -> Result<SimState> {
    const EDGE: f64 = 1e-12;
    let mut cur = *sim;
    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&b| b > sim.state.t + EDGE && b < t_end - EDGE)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.push(t_end);
    for cut in cuts {
        cur = rk4(&cur, force, actuation, params, cut - cur.state.t)?;
        cur.state.t = cut;
    }
    Ok(cur)
}

/// One RK4 step under the PD controller with a constant torso force.
pub fn step(sim: &SimState, external_force: Vector2<f64>, params: &RobotParams) -> Result<SimState> {
    step_with(sim, &|_| external_force, Actuation::Pd, params)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FallStatus {
    Upright,
    Fallen,
}

/// Fallen iff a knee, hip or torso-tip point reaches the ground, or both
/// feet have been airborne for at least the configured dwell time.
pub fn fall_predicate(state: &GeneralizedState, airborne_duration: f64, params: &RobotParams) -> FallStatus {
    let zero = Vector6::zeros();
    let touches = [BodyPoint::Knee, BodyPoint::Hip, BodyPoint::TorsoTip]
        .into_iter()
        .any(|p| point_kinematics(params, &state.q, &zero, p).pos.y <= 0.0);
    // Dwell is accumulated in whole steps; the slack absorbs rounding.
    if touches || airborne_duration >= params.fall.airborne_dwell - 1e-9 {
        FallStatus::Fallen
    } else {
        FallStatus::Upright
    }
}

/// Tracks how long both feet have been above the airborne height.
#[derive(Debug, Clone, Copy, Default)]
pub struct FallMonitor {
    airborne_steps: usize,
}

impl FallMonitor {
    pub fn airborne_duration(&self, params: &RobotParams) -> f64 {
        self.airborne_steps as f64 * params.integrator_step
    }

    pub fn update(&mut self, state: &GeneralizedState, params: &RobotParams) -> FallStatus {
        let zero = Vector6::zeros();
        let lifted = [BodyPoint::Toe, BodyPoint::Heel]
            .into_iter()
            .all(|p| point_kinematics(params, &state.q, &zero, p).pos.y > params.fall.airborne_height);
        self.airborne_steps = if lifted { self.airborne_steps + 1 } else { 0 };
        fall_predicate(state, self.airborne_duration(params), params)
    }
}

/// A recorded trajectory sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub q: Vector6<f64>,
    pub qd: Vector6<f64>,
    pub u: Vector3<f64>,
    pub contact: ContactState,
}

impl Sample {
    pub fn state(&self) -> GeneralizedState {
        GeneralizedState::new(self.t, self.q, self.qd)
    }
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub samples: Vec<Sample>,
    /// Time of the first recorded sample at or after the fall event.
    pub fall_time: Option<f64>,
    /// Largest rigid-contact constraint residual seen at recorded samples.
    pub max_constraint_residual: f64,
}

/// Integrates from `initial` for up to `horizon` seconds, recording a sample
/// every `sample_period`. Stops at the first recorded sample after a fall.
pub fn simulate(
    initial: SimState,
    force: &dyn Fn(f64) -> Vector2<f64>,
    horizon: f64,
    actuation: Actuation,
    params: &RobotParams,
) -> Result<SimOutcome> {
    simulate_piecewise(initial, force, &[], horizon, actuation, params)
}

/// [`simulate`] for a force that is smooth between the times in `breaks`.
/// Steps are split at those times, which keeps the integration fourth order
/// across push edges.
pub fn simulate_piecewise(
    initial: SimState,
    force: &dyn Fn(f64) -> Vector2<f64>,
    breaks: &[f64],
    horizon: f64,
    actuation: Actuation,
    params: &RobotParams,
) -> Result<SimOutcome> {
    let h = params.integrator_step;
    let per_sample = params.steps_per_sample();
    let n_steps = (horizon / h).round() as usize;
    let mut sim = initial;
    let mut monitor = FallMonitor::default();
    let mut samples = Vec::with_capacity(n_steps / per_sample + 1);
    let mut residual = 0.0_f64;
    let mut fallen = monitor.update(&sim.state, params) == FallStatus::Fallen;

    let record = |sim: &SimState, index: usize, residual: &mut f64| -> Result<Sample> {
        let t0 = sim.state.t;
        let state = GeneralizedState::new(index as f64 * params.sample_period, sim.state.q, sim.state.qd);
        let u = actuation_torque(&state, actuation, params);
        let (qdd, contact) = generalized_acceleration(&state, &sim.anchors, &u, &force(t0), params)?;
        let terms = dynamics_terms(&state.q, &state.qd, params)?;
        *residual = residual.max(terms.constraint_residual(&qdd));
        Ok(Sample {
            t: state.t,
            q: state.q,
            qd: state.qd,
            u,
            contact,
        })
    };

    samples.push(record(&sim, 0, &mut residual)?);
    if fallen {
        return Ok(SimOutcome {
            samples,
            fall_time: Some(0.0),
            max_constraint_residual: residual,
        });
    }
    for i in 1..=n_steps {
        sim = step_to(&sim, i as f64 * h, force, breaks, actuation, params)?;
        if !fallen {
            fallen = monitor.update(&sim.state, params) == FallStatus::Fallen;
        }
        if i % per_sample == 0 {
            let sample = record(&sim, i / per_sample, &mut residual)?;
            let t = sample.t;
            samples.push(sample);
            if fallen {
                return Ok(SimOutcome {
                    samples,
                    fall_time: Some(t),
                    max_constraint_residual: residual,
                });
            }
        }
    }
    Ok(SimOutcome {
        samples,
        fall_time: None,
        max_constraint_residual: residual,
    })
}

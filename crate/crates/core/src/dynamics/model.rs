//! Floating-base Lagrangian model of the planar foot/shank/thigh/torso chain.
//!
//! Generalized coordinates: foot x, foot z (the ankle joint position), foot
//! angle, then the relative ankle, knee and hip angles. Link absolute angles
//! are cumulative sums of the angle coordinates, measured counter-clockwise in
//! the x-z plane with zero meaning "pointing straight up".

use nalgebra::{Matrix2x6, Matrix6, SMatrix, Vector2, Vector6};

use super::Link;
use crate::params::RobotParams;

pub type Matrix6x3 = SMatrix<f64, 6, 3>;

/// Named points on the robot used by contact, fall detection and features.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BodyPoint {
    Toe,
    Heel,
    Ankle,
    Knee,
    Hip,
    TorsoTip,
    TorsoCom,
    LinkCom(Link),
}

#[derive(Debug, Clone, Copy)]
pub struct PointKinematics {
    pub pos: Vector2<f64>,
    pub vel: Vector2<f64>,
    pub jacobian: Matrix2x6<f64>,
    /// Velocity-product acceleration `J̇(q, q̇) q̇`.
    pub jdot_qd: Vector2<f64>,
}

#[inline]
fn rotate(phi: f64, v: &Vector2<f64>) -> Vector2<f64> {
    let (s, c) = phi.sin_cos();
    Vector2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

#[inline]
fn rotate_deriv(phi: f64, v: &Vector2<f64>) -> Vector2<f64> {
    let (s, c) = phi.sin_cos();
    Vector2::new(-s * v.x - c * v.y, c * v.x - s * v.y)
}

/// Absolute link angles and angular rates (foot, shank, thigh, torso).
pub fn link_angles(q: &Vector6<f64>, qd: &Vector6<f64>) -> ([f64; 4], [f64; 4]) {
    let mut phi = [0.0; 4];
    let mut omega = [0.0; 4];
    let (mut a, mut w) = (0.0, 0.0);
    for j in 0..4 {
        a += q[2 + j];
        w += qd[2 + j];
        phi[j] = a;
        omega[j] = w;
    }
    (phi, omega)
}

fn point_on_link(params: &RobotParams, point: BodyPoint) -> (Link, Vector2<f64>) {
    let g = &params.foot_geometry;
    match point {
        BodyPoint::Toe => (Link::Foot, Vector2::new(g.toe_x, -g.sole_depth)),
        BodyPoint::Heel => (Link::Foot, Vector2::new(g.heel_x, -g.sole_depth)),
        BodyPoint::Ankle => (Link::Foot, Vector2::zeros()),
        BodyPoint::Knee => (Link::Shank, Vector2::new(0.0, params.shank.length)),
        BodyPoint::Hip => (Link::Thigh, Vector2::new(0.0, params.thigh.length)),
        BodyPoint::TorsoTip => (Link::Torso, Vector2::new(0.0, params.torso.length)),
        BodyPoint::TorsoCom => (Link::Torso, Vector2::new(0.0, params.torso.com_offset)),
        BodyPoint::LinkCom(Link::Foot) => (Link::Foot, Vector2::new(0.0, -params.foot.com_offset)),
        BodyPoint::LinkCom(link) => (link, Vector2::new(0.0, params.links()[link as usize].com_offset)),
    }
}

/// Position, velocity, Jacobian and `J̇q̇` of a body point.
pub fn point_kinematics(
    params: &RobotParams,
    q: &Vector6<f64>,
    qd: &Vector6<f64>,
    point: BodyPoint,
) -> PointKinematics {
    let (link, local) = point_on_link(params, point);
    let (phi, omega) = link_angles(q, qd);
    let lengths = [0.0, params.shank.length, params.thigh.length];

    let mut pos = Vector2::new(q[0], q[1]);
    let mut jacobian = Matrix2x6::zeros();
    jacobian[(0, 0)] = 1.0;
    jacobian[(1, 1)] = 1.0;
    let mut jdot_qd = Vector2::zeros();

    let last = link as usize;
    // The foot frame origin is the ankle, so the foot contributes only to
    // points on the foot itself.
    for j in 0..=last {
        let v = if j == last {
            local
        } else {
            Vector2::new(0.0, lengths[j])
        };
        if v.x == 0.0 && v.y == 0.0 {
            continue;
        }
        pos += rotate(phi[j], &v);
        let dv = rotate_deriv(phi[j], &v);
        for k in 0..=j {
            jacobian[(0, 2 + k)] += dv.x;
            jacobian[(1, 2 + k)] += dv.y;
        }
        jdot_qd -= rotate(phi[j], &v) * (omega[j] * omega[j]);
    }
    let vel = jacobian * qd;
    PointKinematics {
        pos,
        vel,
        jacobian,
        jdot_qd,
    }
}

/// Row of the angular-velocity Jacobian of a link.
fn angular_jacobian(link: Link) -> Vector6<f64> {
    let mut row = Vector6::zeros();
    for k in 0..=(link as usize) {
        row[2 + k] = 1.0;
    }
    row
}

/// Terms of `D q̈ + C q̇ + G = B u + Jᵀ Γ`.
#[derive(Debug, Clone)]
pub struct DynamicsTerms {
    pub d: Matrix6<f64>,
    pub cqd: Vector6<f64>,
    pub g: Vector6<f64>,
    pub b: Matrix6x3,
    /// Stacked contact Jacobians of the currently penetrating contact points.
    pub contact_jacobian: Vec<Matrix2x6<f64>>,
    pub contact_jdot_qd: Vec<Vector2<f64>>,
}

impl DynamicsTerms {
    /// Residual `J q̈ + J̇ q̇` of the rigid-contact acceleration constraint.
    pub fn constraint_residual(&self, qdd: &Vector6<f64>) -> f64 {
        self.contact_jacobian
            .iter()
            .zip(&self.contact_jdot_qd)
            .map(|(j, jd)| (j * qdd + jd).norm())
            .fold(0.0, f64::max)
    }
}

pub fn torque_distribution() -> Matrix6x3 {
    let mut b = Matrix6x3::zeros();
    for i in 0..3 {
        b[(3 + i, i)] = 1.0;
    }
    b
}

pub(crate) fn inertia_and_bias(
    params: &RobotParams,
    q: &Vector6<f64>,
    qd: &Vector6<f64>,
) -> (Matrix6<f64>, Vector6<f64>, Vector6<f64>) {
    let mut d = Matrix6::zeros();
    let mut cqd = Vector6::zeros();
    let mut g = Vector6::zeros();
    for link in Link::ALL {
        let lp = params.links()[link as usize];
        let kin = point_kinematics(params, q, qd, BodyPoint::LinkCom(link));
        let jt = kin.jacobian.transpose();
        d += (jt * kin.jacobian) * lp.mass;
        let w = angular_jacobian(link);
        d += (w * w.transpose()) * lp.inertia;
        cqd += jt * kin.jdot_qd * lp.mass;
        g += kin.jacobian.row(1).transpose() * (lp.mass * params.gravity);
    }
    (d, cqd, g)
}

/// All model terms needed to solve for the generalized acceleration.
pub fn dynamics_terms(
    q: &Vector6<f64>,
    qd: &Vector6<f64>,
    params: &RobotParams,
) -> crate::Result<DynamicsTerms> {
    if !(q.iter().chain(qd.iter()).all(|v| v.is_finite())) {
        return Err(crate::Error::NonFiniteState);
    }
    let (d, cqd, g) = inertia_and_bias(params, q, qd);
    let mut contact_jacobian = Vec::new();
    let mut contact_jdot_qd = Vec::new();
    for point in [BodyPoint::Toe, BodyPoint::Heel] {
        let kin = point_kinematics(params, q, qd, point);
        if kin.pos.y <= 0.0 {
            contact_jacobian.push(kin.jacobian);
            contact_jdot_qd.push(kin.jdot_qd);
        }
    }
    Ok(DynamicsTerms {
        d,
        cqd,
        g,
        b: torque_distribution(),
        contact_jacobian,
        contact_jdot_qd,
    })
}

pub fn kinetic_energy(params: &RobotParams, q: &Vector6<f64>, qd: &Vector6<f64>) -> f64 {
    let (d, _, _) = inertia_and_bias(params, q, qd);
    0.5 * qd.dot(&(d * qd))
}

pub fn potential_energy(params: &RobotParams, q: &Vector6<f64>) -> f64 {
    let zero = Vector6::zeros();
    Link::ALL
        .iter()
        .map(|&link| {
            let z = point_kinematics(params, q, &zero, BodyPoint::LinkCom(link)).pos.y;
            params.links()[link as usize].mass * params.gravity * z
        })
        .sum()
}

/// Solves `D q̈ = rhs` for the generalized acceleration.
pub(crate) fn solve_acceleration(d: Matrix6<f64>, rhs: &Vector6<f64>) -> Option<Vector6<f64>> {
    d.cholesky().map(|c| c.solve(rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_state(rng: &mut impl Rng) -> (Vector6<f64>, Vector6<f64>) {
        let q = Vector6::from_fn(|i, _| match i {
            0 | 1 => rng.gen_range(-0.5..0.5),
            _ => rng.gen_range(-1.2..1.2),
        });
        let qd = Vector6::from_fn(|_, _| rng.gen_range(-2.0..2.0));
        (q, qd)
    }

    #[test]
    fn inertia_symmetric_positive_definite() {
        let p = RobotParams::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let (q, qd) = random_state(&mut rng);
            let t = dynamics_terms(&q, &qd, &p).unwrap();
            let asym = (t.d - t.d.transpose()).abs().max();
            assert!(asym <= 1e-10 * t.d.abs().max());
            let eig = t.d.symmetric_eigenvalues().min();
            assert!(eig > 0.0, "min eig {eig}");
        }
    }

    #[test]
    fn free_fall_com_acceleration_is_gravity() {
        let p = RobotParams::default();
        let mut q = Vector6::zeros();
        q[1] = 2.0;
        let qd = Vector6::zeros();
        let t = dynamics_terms(&q, &qd, &p).unwrap();
        let qdd = solve_acceleration(t.d, &(-t.g)).unwrap();
        // CoM acceleration = Σ m_i (J_i q̈ + J̇_i q̇) / M
        let mut acc = Vector2::zeros();
        for link in Link::ALL {
            let kin = point_kinematics(&p, &q, &qd, BodyPoint::LinkCom(link));
            acc += (kin.jacobian * qdd + kin.jdot_qd) * p.links()[link as usize].mass;
        }
        acc /= p.total_mass();
        assert!(acc.x.abs() < 1e-10);
        assert!((acc.y + p.gravity).abs() < 1e-10);
    }

    #[test]
    fn jacobian_matches_finite_difference_of_position() {
        let p = RobotParams::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let (q, qd) = random_state(&mut rng);
        for point in [BodyPoint::Toe, BodyPoint::Heel, BodyPoint::Knee, BodyPoint::Hip, BodyPoint::TorsoTip] {
            let kin = point_kinematics(&p, &q, &qd, point);
            let h = 1e-6;
            for k in 0..6 {
                let mut qp = q;
                let mut qm = q;
                qp[k] += h;
                qm[k] -= h;
                let fd = (point_kinematics(&p, &qp, &qd, point).pos
                    - point_kinematics(&p, &qm, &qd, point).pos)
                    / (2.0 * h);
                assert!((fd - kin.jacobian.column(k)).norm() < 1e-8);
            }
            // J̇q̇ = d/dt(J) q̇ along the motion
            let h = 1e-6;
            let jp = point_kinematics(&p, &(q + qd * h), &qd, point).jacobian;
            let jm = point_kinematics(&p, &(q - qd * h), &qd, point).jacobian;
            let fd = (jp - jm) / (2.0 * h) * qd;
            assert!((fd - kin.jdot_qd).norm() < 1e-6);
        }
    }

    #[test]
    fn nonfinite_state_rejected() {
        let p = RobotParams::default();
        let mut q = Vector6::zeros();
        q[3] = f64::NAN;
        assert!(matches!(
            dynamics_terms(&q, &Vector6::zeros(), &p),
            Err(crate::Error::NonFiniteState)
        ));
    }

    #[test]
    fn torque_distribution_rows_are_unit() {
        let b = torque_distribution();
        for r in 0..6 {
            let sum: f64 = b.row(r).iter().sum();
            assert_eq!(sum, if r >= 3 { 1.0 } else { 0.0 });
        }
    }
}

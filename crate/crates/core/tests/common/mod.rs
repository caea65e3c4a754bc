//! Independent oracles and the property checks shared by the per-module
//! integration tests and the acceptance run.

#![allow(dead_code, clippy::neg_cmp_op_on_partial_ord)]

use std::path::Path;

use falltime_core::dataset::{label_windows, prepare, FrameSource, PreparedTrajectory, SAFE_CLIP_TIME};
use falltime_core::detectors::{svm_train, switch_streams, ward_effort, ward_effort_full, Hypothesis, Score, SvmParams};
use falltime_core::dynamics::{
    dynamics_terms, kinetic_energy, nominal_stance, potential_energy, simulate_piecewise, step_with, Actuation,
    ContactState, GeneralizedState, Sample, SimState,
};
use falltime_core::features::distance_correlation;
use falltime_core::scenario::{Direction, FaultKind, FaultSpec, ForceProfile, Impulse, Trajectory};
use falltime_core::RobotParams;
use nalgebra::{DMatrix, DVector, Vector2, Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = std::result::Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

// ---------------------------------------------------------------- dCor

/// Textbook distance correlation with full n × n double-centered matrices.
pub fn naive_dcor(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let centered = |v: &[f64]| {
        let d = DMatrix::from_fn(n, n, |i, j| (v[i] - v[j]).abs());
        let rows = DVector::from_fn(n, |i, _| d.row(i).mean());
        let cols = DVector::from_fn(n, |j, _| d.column(j).mean());
        let grand = d.mean();
        DMatrix::from_fn(n, n, |i, j| d[(i, j)] - rows[i] - cols[j] + grand)
    };
    let a = centered(x);
    let b = centered(y);
    let n2 = (n * n) as f64;
    let cov = a.component_mul(&b).sum() / n2;
    let vx = a.component_mul(&a).sum() / n2;
    let vy = b.component_mul(&b).sum() / n2;
    if vx <= 0.0 || vy <= 0.0 {
        return 0.0;
    }
    (cov.max(0.0) / (vx * vy).sqrt()).sqrt()
}

pub fn check_dcor() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xdc0);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for n in [2usize, 3, 5, 17, 64, 200, 500] {
        for rep in 0..4 {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let y: Vec<f64> = match rep {
                0 => (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                1 => x.iter().map(|v| v * v + rng.gen_range(-0.1..0.1)).collect(),
                2 => x.iter().map(|v| v.sin()).collect(),
                _ => x.iter().map(|v| (v * 3.0).round()).collect(),
            };
            let got = distance_correlation(&x, &y).map_err(|e| e.to_string())?;
            let want = naive_dcor(&x, &y);
            worst = worst.max((got - want).abs());
            ensure!((got - want).abs() <= 1e-12, "n={n}: {got} vs oracle {want}");
            ensure!(got.to_bits() == distance_correlation(&y, &x).unwrap().to_bits(), "asymmetric at n={n}");
            let self_corr = distance_correlation(&x, &x).unwrap();
            ensure!((self_corr - 1.0).abs() <= 1e-12, "dCor(x,x) = {self_corr}");
            let affine: Vec<f64> = x.iter().map(|v| -2.5 * v + 7.0).collect();
            let aff = distance_correlation(&x, &affine).unwrap();
            ensure!((aff - 1.0).abs() <= 1e-12, "affine dCor = {aff}");
            cases += 1;
        }
    }
    Ok(format!("{cases} series up to n=500, max |Δ| vs naive oracle {worst:.1e}"))
}

// ---------------------------------------------------------------- Ward

/// Random symmetric positive-definite matrix with a unit diagonal.
pub fn random_correlation(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let b = DMatrix::from_fn(d, d + 2, |_, _| rng.gen_range(-1.0..1.0));
    let s: DMatrix<f64> = &b * b.transpose() + DMatrix::identity(d, d) * 0.05;
    let scale: DVector<f64> = DVector::from_fn(d, |i, _| 1.0 / s[(i, i)].sqrt());
    DMatrix::from_fn(d, d, |i, j| s[(i, j)] * scale[i] * scale[j])
}

/// Σ (x − μ)ᵀ M (x − μ) written directly on nalgebra vectors.
pub fn naive_sse(rows: &[DVector<f64>], m: &DMatrix<f64>) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let mu = rows.iter().fold(DVector::zeros(rows[0].len()), |acc, r| acc + r) / rows.len() as f64;
    rows.iter().map(|r| ((r - &mu).transpose() * m * (r - &mu))[(0, 0)]).sum()
}

pub fn check_ward(instances: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x3a7d);
    let mut worst: f64 = 0.0;
    for k in 0..instances {
        let d = rng.gen_range(1..=8);
        let n_a = rng.gen_range(2..=15);
        let r = random_correlation(d, &mut rng);
        let r_inv = r.clone().try_inverse().ok_or("singular R")?;
        let spread = 10f64.powf(rng.gen_range(-2.0..2.0));
        let a: Vec<DVector<f64>> = (0..n_a).map(|_| DVector::from_fn(d, |_, _| rng.gen_range(-spread..spread))).collect();
        let b = DVector::from_fn(d, |_, _| rng.gen_range(-spread..spread));

        let r_inv_rows: Vec<f64> = r_inv.transpose().as_slice().to_vec();
        let a_rows: Vec<Vec<f64>> = a.iter().map(|v| v.as_slice().to_vec()).collect();
        let a_refs: Vec<&[f64]> = a_rows.iter().map(Vec::as_slice).collect();
        let simplified = ward_effort(&a_refs, b.as_slice(), &r_inv_rows).map_err(|e| e.to_string())?;
        let full = ward_effort_full(&a_refs, &[b.as_slice()], &r_inv_rows);

        let mut union = a.clone();
        union.push(b.clone());
        let oracle = naive_sse(&union, &r_inv) - naive_sse(&a, &r_inv) - naive_sse(std::slice::from_ref(&b), &r_inv);
        let mu_a = a.iter().fold(DVector::zeros(d), |acc, r| acc + r) / n_a as f64;
        let closed = n_a as f64 / (n_a as f64 + 1.0) * ((&b - &mu_a).transpose() * &r_inv * (&b - &mu_a))[(0, 0)];

        let scale = oracle.abs().max(closed.abs()).max(f64::MIN_POSITIVE);
        for (name, v) in [("full", full), ("naive", oracle), ("closed form", closed)] {
            let rel = (simplified - v).abs() / scale;
            worst = worst.max(rel);
            ensure!(rel <= 1e-10, "instance {k}: simplified {simplified} vs {name} {v} (rel {rel:.2e})");
        }
        ensure!(simplified >= -1e-12 * scale, "instance {k}: negative effort {simplified}");
    }
    Ok(format!("{instances} random (A, b, R) instances, max relative deviation {worst:.1e}"))
}

// ---------------------------------------------------------------- SVM

pub struct QpOptimum {
    pub alpha: Vec<f64>,
    pub bias: Option<f64>,
    pub objective: f64,
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    (-gamma * a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>()).exp()
}

/// Exact dual optimum of the soft-margin SVM by enumerating every
/// assignment of each multiplier to {0, free, C} and solving the
/// equality-constrained KKT system of the free set. The best feasible
/// candidate of a concave program is its optimum.
pub fn exhaustive_qp(x: &[Vec<f64>], y: &[f64], c: f64, gamma: f64) -> QpOptimum {
    let n = x.len();
    let q = DMatrix::from_fn(n, n, |i, j| y[i] * y[j] * rbf(&x[i], &x[j], gamma));
    let objective = |a: &DVector<f64>| a.sum() - 0.5 * (a.transpose() * &q * a)[(0, 0)];
    let mut best: Option<QpOptimum> = None;
    let total = 3usize.pow(n as u32);
    for code in 0..total {
        let mut state = vec![0u8; n];
        let mut rest = code;
        for s in state.iter_mut() {
            *s = (rest % 3) as u8;
            rest /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 1).collect();
        let mut alpha = DVector::from_fn(n, |i, _| if state[i] == 2 { c } else { 0.0 });
        let mut bias = None;
        if free.is_empty() {
            let balance: f64 = (0..n).map(|i| y[i] * alpha[i]).sum();
            if balance.abs() > 1e-12 {
                continue;
            }
        } else {
            let f = free.len();
            let mut kkt = DMatrix::zeros(f + 1, f + 1);
            let mut rhs = DVector::zeros(f + 1);
            for (r, &i) in free.iter().enumerate() {
                for (s, &j) in free.iter().enumerate() {
                    kkt[(r, s)] = q[(i, j)];
                }
                kkt[(r, f)] = y[i];
                kkt[(f, r)] = y[i];
                rhs[r] = 1.0 - (0..n).filter(|&j| state[j] == 2).map(|j| q[(i, j)] * c).sum::<f64>();
            }
            rhs[f] = -(0..n).filter(|&j| state[j] == 2).map(|j| y[j] * c).sum::<f64>();
            let Some(sol) = kkt.lu().solve(&rhs) else { continue };
            if free.iter().enumerate().any(|(r, _)| sol[r] <= 0.0 || sol[r] >= c) {
                continue;
            }
            for (r, &i) in free.iter().enumerate() {
                alpha[i] = sol[r];
            }
            bias = Some(sol[f]);
        }
        let obj = objective(&alpha);
        if best.as_ref().is_none_or(|b| obj > b.objective) {
            best = Some(QpOptimum {
                alpha: alpha.iter().copied().collect(),
                bias,
                objective: obj,
            });
        }
    }
    best.expect("the all-zero assignment is always feasible")
}

/// Worst KKT violation of a solution on its training set.
pub fn kkt_violation(x: &[Vec<f64>], y: &[f64], alpha: &[f64], bias: f64, c: f64, gamma: f64) -> f64 {
    let n = x.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let f: f64 = (0..n).map(|j| alpha[j] * y[j] * rbf(&x[j], &x[i], gamma)).sum::<f64>() + bias;
        let yf = y[i] * f;
        let v = if alpha[i] <= 0.0 {
            (1.0 - yf).max(0.0)
        } else if alpha[i] >= c {
            (yf - 1.0).max(0.0)
        } else {
            (yf - 1.0).abs()
        };
        worst = worst.max(v);
    }
    worst
}

fn random_labeled(n: usize, d: usize, rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<f64>) {
    loop {
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|p| {
                let s = p.iter().sum::<f64>() + rng.gen_range(-0.6..0.6);
                if s >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        if y.iter().any(|&v| v > 0.0) && y.iter().any(|&v| v < 0.0) {
            return (x, y);
        }
    }
}

pub fn check_svm(datasets: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e3);
    let (mut worst_obj, mut worst_dec, mut worst_kkt): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut compared_decisions = 0;
    for k in 0..datasets {
        let d = rng.gen_range(1..=3);
        let (x, y) = random_labeled(8, d, &mut rng);
        let c = [0.5, 1.0, 10.0][k % 3];
        let gamma = rng.gen_range(0.3..3.0);
        let refs: Vec<&[f64]> = x.iter().map(Vec::as_slice).collect();
        let tight = SvmParams {
            c,
            gamma: Some(gamma),
            tol: 1e-10,
            max_iter: 0,
        };
        let sol = svm_train(&refs, &y, &tight).map_err(|e| e.to_string())?;
        let oracle = exhaustive_qp(&x, &y, c, gamma);
        let d_obj = (sol.dual_objective - oracle.objective).abs();
        worst_obj = worst_obj.max(d_obj);
        ensure!(d_obj <= 1e-6, "dataset {k}: dual objective {} vs oracle {}", sol.dual_objective, oracle.objective);
        if let Some(b) = oracle.bias {
            for p in &x {
                let want: f64 =
                    (0..8).map(|j| oracle.alpha[j] * y[j] * rbf(&x[j], p, gamma)).sum::<f64>() + b;
                let got = sol.model.decision(p);
                worst_dec = worst_dec.max((got - want).abs());
                ensure!((got - want).abs() <= 1e-6, "dataset {k}: decision {got} vs oracle {want}");
            }
            compared_decisions += 1;
        }
        // KKT at the default tolerance
        let default = SvmParams {
            c,
            gamma: Some(gamma),
            ..SvmParams::default()
        };
        let sol = svm_train(&refs, &y, &default).map_err(|e| e.to_string())?;
        let viol = kkt_violation(&x, &y, &sol.alpha, sol.model.bias, c, gamma);
        worst_kkt = worst_kkt.max(viol);
        ensure!(viol <= default.tol, "dataset {k}: KKT violation {viol} > tol {}", default.tol);
    }
    ensure!(compared_decisions * 2 >= datasets, "only {compared_decisions} datasets had free support vectors");
    Ok(format!(
        "{datasets} 8-point datasets: max |Δ objective| {worst_obj:.1e}, max |Δ decision| {worst_dec:.1e} ({compared_decisions} with a unique bias), max KKT violation {worst_kkt:.1e}"
    ))
}

// ---------------------------------------------------------------- dynamics

pub fn check_dynamics() -> Check {
    let p = RobotParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0xd1);

    // conservative system: no control, no contact, no joint stops
    let mut free = p.clone();
    free.joint_limits.lower = [-1e3; 3];
    free.joint_limits.upper = [1e3; 3];
    let mut worst_drift: f64 = 0.0;
    for _ in 0..3 {
        let q = Vector6::from_fn(|i, _| if i == 1 { 50.0 } else { rng.gen_range(-1.0..1.0) });
        let qd = Vector6::from_fn(|_, _| rng.gen_range(-2.0..2.0));
        let e0 = kinetic_energy(&free, &q, &qd) + potential_energy(&free, &q);
        let mut sim = SimState::new(GeneralizedState::new(0.0, q, qd), &free);
        for _ in 0..(1.0 / free.integrator_step).round() as usize {
            sim = step_with(&sim, &|_| Vector2::zeros(), Actuation::Passive, &free).map_err(|e| e.to_string())?;
        }
        let s = sim.state;
        let drift = ((kinetic_energy(&free, &s.q, &s.qd) + potential_energy(&free, &s.q) - e0) / e0).abs();
        worst_drift = worst_drift.max(drift);
        ensure!(drift < 1e-6, "energy drift {drift:.2e} over 1 s");
    }

    // inertia along a pushed closed-loop trajectory
    let push = |t: f64| Vector2::new(if t < 0.075 { 150.0 } else { 0.0 }, 0.0);
    let out = simulate_piecewise(nominal_stance(&p), &push, &[0.075], 6.0, Actuation::Pd, &p).map_err(|e| e.to_string())?;
    let mut min_eig = f64::INFINITY;
    for s in &out.samples {
        let d = dynamics_terms(&s.q, &s.qd, &p).map_err(|e| e.to_string())?.d;
        ensure!((d - d.transpose()).abs().max() <= 1e-10 * d.abs().max(), "D asymmetric at t={}", s.t);
        min_eig = min_eig.min(d.symmetric_eigenvalues().min());
    }
    ensure!(min_eig > 0.0, "D not positive definite (min eigenvalue {min_eig})");

    // half-step convergence on 6 s runs with pushes starting between steps
    let mut fine = p.clone();
    fine.integrator_step /= 2.0;
    let mut worst_step: f64 = 0.0;
    // short and sustained pushes below the fall thresholds
    let cases = [(50.0, 0.0, 0.0, 0.075), (-120.0, 0.0, 0.0, 0.075), (80.0, -60.0, 2.01234, 0.075), (0.0, 15.0, 3.5321, 1.0)];
    for (impulse, fault, start, duration) in cases {
        let force = move |t: f64| {
            let a = if t < 0.075 { impulse } else { 0.0 };
            let b = if t >= start && t < start + duration { fault } else { 0.0 };
            Vector2::new(a + b, 0.0)
        };
        let breaks = [0.075, start, start + duration];
        let a = simulate_piecewise(nominal_stance(&p), &force, &breaks, 6.0, Actuation::Pd, &p).map_err(|e| e.to_string())?;
        let b = simulate_piecewise(nominal_stance(&fine), &force, &breaks, 6.0, Actuation::Pd, &fine).map_err(|e| e.to_string())?;
        ensure!(a.fall_time.is_none() && b.fall_time.is_none(), "convergence run with push {fault} N from {start} s fell");
        let (sa, sb) = (a.samples.last().unwrap(), b.samples.last().unwrap());
        let diff = ((sa.q - sb.q).norm_squared() + (sa.qd - sb.qd).norm_squared()).sqrt();
        worst_step = worst_step.max(diff);
        ensure!(diff < 1e-4, "halving the step moved the 6 s state by {diff:.2e}");
    }
    Ok(format!(
        "energy drift {worst_drift:.1e}, min eig(D) {min_eig:.3}, half-step change {worst_step:.1e}"
    ))
}

// ---------------------------------------------------------------- labeling

pub fn constructed_trajectory(kind: FaultKind, t_start: f64, first: f64, last: f64, fall: bool) -> Trajectory {
    let period = 0.03;
    let n = ((last - first) / period).round() as usize + 1;
    let samples = (0..n)
        .map(|i| {
            let t = ((first / period).round() as usize + i) as f64 * period;
            let v = i as f64;
            Sample {
                t,
                q: Vector6::new(0.0, 0.1, 0.0, 0.01 * v, -0.02 * v, 0.005 * v),
                qd: Vector6::new(0.0, 0.0, 0.0, v.sin(), v.cos(), 0.1 * v),
                u: Vector3::zeros(),
                contact: ContactState::airborne(),
            }
        })
        .collect::<Vec<_>>();
    let fall_time = fall.then(|| samples.last().unwrap().t);
    Trajectory {
        id: 7,
        samples,
        fault: FaultSpec {
            kind,
            magnitude: 100.0,
            t_start,
            duration: if kind == FaultKind::Abrupt { 0.075 } else { 1.0 },
            direction: Direction::Forward,
            profile: ForceProfile::Constant,
        },
        impulse: Impulse::zero(),
        fall_time,
        max_constraint_residual: 0.0,
    }
}

fn velocities(traj: &Trajectory) -> PreparedTrajectory {
    prepare(traj, FrameSource::JointVelocities, &RobotParams::default())
}

pub fn check_labeling() -> Check {
    let n_window = 10;
    // incipient fall 1.9 s after its first kept sample
    let inc = velocities(&constructed_trajectory(FaultKind::Incipient, 3.5, 3.5, 5.4, true));
    ensure!(*inc.times.last().unwrap() < inc.fall_time.unwrap(), "fall sample kept");
    let all = label_windows(&inc, 2.0, n_window).map_err(|e| e.to_string())?;
    ensure!(all.iter().all(|w| w.label == -1), "lead 2 s left safe windows on an incipient fall");
    let none = label_windows(&inc, 0.0, n_window).map_err(|e| e.to_string())?;
    ensure!(none.iter().all(|w| w.label == 1), "lead 0 labeled faulty windows");
    ensure!(all.len() == inc.len() - n_window + 1, "window count {} for {} frames", all.len(), inc.len());

    // abrupt fall: push at 3.0 s, recorded from 2.0 s, falls at 4.2 s
    let abr = velocities(&constructed_trajectory(FaultKind::Abrupt, 3.0, 2.0, 4.2, true));
    let w = label_windows(&abr, 2.0, n_window).map_err(|e| e.to_string())?;
    ensure!(w.iter().all(|w| (w.label == -1) == (w.end_time > 3.0 + 1e-9)), "abrupt labels not clamped to the push onset");
    ensure!(w.iter().any(|w| w.label == 1) && w.iter().any(|w| w.label == -1), "clamp produced a single class");
    let none = label_windows(&abr, 0.0, n_window).map_err(|e| e.to_string())?;
    ensure!(none.iter().all(|w| w.label == 1), "lead 0 labeled faulty abrupt windows");

    // safe trajectory recorded to 8 s is cut at 6 s and never faulty
    let safe_raw = constructed_trajectory(FaultKind::Abrupt, 3.0, 2.0, 8.0, false);
    let safe = velocities(&safe_raw);
    ensure!(*safe.times.last().unwrap() <= SAFE_CLIP_TIME + 1e-9, "safe run kept t = {}", safe.times.last().unwrap());
    ensure!((*safe.times.last().unwrap() - SAFE_CLIP_TIME).abs() < 1e-9, "6 s sample dropped");
    let w = label_windows(&safe, 2.0, n_window).map_err(|e| e.to_string())?;
    ensure!(w.iter().all(|w| w.label == 1), "safe windows labeled faulty");
    // a fall trajectory is not clipped
    let long_fall = velocities(&constructed_trajectory(FaultKind::Incipient, 4.0, 4.0, 7.5, true));
    ensure!(*long_fall.times.last().unwrap() > SAFE_CLIP_TIME, "fall trajectory was clipped");
    Ok(format!(
        "{} incipient, {} abrupt and {} safe windows checked",
        all.len(),
        none.len(),
        w.len()
    ))
}

// ---------------------------------------------------------------- switching

fn scores(values: &[f64]) -> Vec<Score> {
    values.iter().map(|&v| Score { value: v, faulty: v < 0.0 }).collect()
}

pub fn check_switching() -> Check {
    let inc = scores(&[1.0, 0.5, -0.1, 0.3, -2.0, 0.7]);
    let abr = scores(&[-1.0, 2.0, 0.4, -0.6, 0.9, -0.2]);
    let n = inc.len();
    let cases: [(&str, Vec<bool>, usize); 3] = [
        ("never fires", vec![false; n], n),
        ("fires at start", vec![true, false, false, false, false, false], 0),
        ("fires mid", vec![false, false, false, true, false, false], 3),
    ];
    for (name, id, latch_at) in cases {
        let out = switch_streams(&id, &inc, &abr);
        ensure!(out.len() == n, "{name}: {} steps", out.len());
        for (k, step) in out.iter().enumerate() {
            let (want_h, want_s) = if k >= latch_at { (Hypothesis::Abrupt, abr[k]) } else { (Hypothesis::Incipient, inc[k]) };
            ensure!(step.hypothesis == want_h && step.score == want_s, "{name}: step {k} is {step:?}");
        }
    }
    Ok("never-fires, fires-at-start and fires-mid traces match".into())
}

// ---------------------------------------------------------------- files

/// Every file below `dir`, relative path → bytes, in path order.
pub fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

// ---------------------------------------------------------------- determinism

pub fn small_dataset(abrupt: usize, incipient: usize, seed: u64) -> falltime_core::scenario::Dataset {
    let config = falltime_core::scenario::ScenarioConfig {
        abrupt_count: abrupt,
        incipient_count: incipient,
        ..Default::default()
    };
    falltime_core::scenario::generate_dataset(&config, seed, &RobotParams::default()).unwrap()
}

fn models_json(report: &falltime_core::eval::ExperimentReport) -> Vec<String> {
    let binary = report.cells.iter().map(|c| serde_json::to_string(&(&c.model, c.training_lead_time)).unwrap());
    let multi = report
        .multiclass
        .iter()
        .map(|c| serde_json::to_string(&(&c.model, c.incipient_lead, c.abrupt_lead)).unwrap());
    binary.chain(multi).collect()
}

/// Regenerates, retrains and re-reports from the same seeds and compares
/// bytes; then perturbs every test trajectory and checks that no trained
/// parameter moves.
pub fn check_determinism() -> Check {
    use falltime_core::detectors::DetectorKind;
    use falltime_core::eval::{run_experiment, split_plan, ExperimentConfig, Regime};
    use falltime_core::scenario::save_dataset;

    let params = RobotParams::default();
    let a = small_dataset(25, 25, 5);
    let b = small_dataset(25, 25, 5);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    save_dataset(&dir.path().join("a"), &a).map_err(|e| e.to_string())?;
    save_dataset(&dir.path().join("b"), &b).map_err(|e| e.to_string())?;
    let (fa, fb) = (dir_bytes(&dir.path().join("a")), dir_bytes(&dir.path().join("b")));
    ensure!(!fa.is_empty() && fa == fb, "dataset files differ between identical seeds");

    // binary cells for both detectors, plus the (cheaper) multiclass SVM pipeline
    let configs = [
        ExperimentConfig {
            folds: Some(vec![0]),
            detectors: vec![DetectorKind::Nn, DetectorKind::Svm],
            regimes: vec![Regime::Both],
            ..Default::default()
        },
        ExperimentConfig {
            folds: Some(vec![0]),
            detectors: vec![DetectorKind::Svm],
            regimes: vec![Regime::Multiclass],
            ..Default::default()
        },
    ];
    let plan = split_plan(&a, configs[0].split, configs[0].split_seed).map_err(|e| e.to_string())?;
    let test = plan.roles(0).test;
    let mut mutated = a.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for t in mutated.trajectories.iter_mut().filter(|t| test.contains(&t.id)) {
        for s in &mut t.samples {
            s.q = s.q.map(|v| v * rng.gen_range(0.5..1.5) + rng.gen_range(-0.1..0.1));
            s.qd = s.qd.map(|v| v * rng.gen_range(-2.0..2.0));
        }
    }
    let mut n_models = 0;
    for config in &configs {
        let ra = run_experiment(&a, &params, config).map_err(|e| e.to_string())?;
        let rb = run_experiment(&b, &params, config).map_err(|e| e.to_string())?;
        let ja = serde_json::to_string(&ra).unwrap();
        ensure!(ja == serde_json::to_string(&rb).unwrap(), "reports differ between identical runs");
        let models = models_json(&ra);
        ensure!(models.iter().all(|m| !m.starts_with("[null")), "a cell produced no model: {:?}", ra.errors());
        let rm = run_experiment(&mutated, &params, config).map_err(|e| e.to_string())?;
        ensure!(models_json(&rm) == models, "a trained parameter changed after mutating test trajectories");
        ensure!(
            serde_json::to_string(&rm).unwrap() != ja,
            "mutating the test trajectories left the test results unchanged"
        );
        n_models += models.len();
    }
    Ok(format!(
        "{} dataset files, {} models and the report reproduced byte for byte; {} test trajectories perturbed without moving any trained parameter",
        fa.len(),
        n_models,
        test.len()
    ))
}

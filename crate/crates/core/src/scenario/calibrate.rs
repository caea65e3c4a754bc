//! Bisection on the upper end of the uniform force range so that a pilot
//! batch ends in a fall about half of the time.

use rayon::prelude::*;

use super::{generate_trajectory, sample_fault, sample_impulse, FaultKind, Outcome, ScenarioConfig};
use crate::error::{Error, Result};
use crate::params::RobotParams;
use crate::util::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub max_force: f64,
    pub fall_fraction: f64,
    /// Pilot batches simulated.
    pub evaluations: usize,
    /// False when the bracket collapsed without reaching the tolerance.
    pub converged: bool,
}

const MAX_EXPANSIONS: usize = 6;
const MAX_BISECTIONS: usize = 40;

fn pilot_fall_fraction(
    kind: FaultKind,
    max_force: f64,
    params: &RobotParams,
    config: &ScenarioConfig,
    pilot_size: usize,
    seed: u64,
) -> Result<f64> {
    let mut cfg = config.clone();
    if let Some(r) = cfg.range_mut(kind) {
        r.max_force = max_force;
    }
    let falls = (0..pilot_size as u64)
        .into_par_iter()
        .map(|id| {
            let mut rng = stream_rng(seed, id);
            let fault = sample_fault(kind, &cfg, &mut rng);
            let impulse = sample_impulse(&cfg, &mut rng);
            generate_trajectory(id, &fault, &impulse, params, &cfg).map(|t| t.outcome() == Outcome::Fall)
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(falls.iter().filter(|&&f| f).count() as f64 / pilot_size.max(1) as f64)
}

/// Finds a maximum force for `kind` whose pilot fall fraction is within
/// `tolerance` of one half. Every pilot batch reuses the same random streams,
/// so forces scale linearly with the candidate maximum.
pub fn calibrate_ranges(
    kind: FaultKind,
    params: &RobotParams,
    config: &ScenarioConfig,
    tolerance: f64,
    pilot_size: usize,
    seed: u64,
) -> Result<Calibration> {
    let Some(range) = config.range(kind) else {
        return Err(Error::CalibrationFailed("fault kind `none` has no force range".into()));
    };
    let start = range.max_force;
    if tolerance >= 0.5 {
        return Ok(Calibration {
            max_force: start,
            fall_fraction: f64::NAN,
            evaluations: 0,
            converged: true,
        });
    }
    let mut evaluations = 0;
    let mut frac = |f: f64| {
        evaluations += 1;
        let v = pilot_fall_fraction(kind, f, params, config, pilot_size, seed);
        if let Ok(v) = v {
            log::info!("calibration {}: max force {f:.2} N -> fall fraction {v:.3}", kind.as_str());
        }
        v
    };
    let ok = |v: f64| (v - 0.5).abs() <= tolerance;

    let mut lo = 0.0;
    let mut hi = start;
    let mut f_hi = frac(hi)?;
    let mut expansions = 0;
    while f_hi < 0.5 - tolerance {
        if expansions == MAX_EXPANSIONS {
            return Err(Error::CalibrationFailed(format!(
                "fall fraction {f_hi:.3} at {hi:.1} N is still below {:.3}",
                0.5 - tolerance
            )));
        }
        lo = hi;
        hi *= 2.0;
        f_hi = frac(hi)?;
        expansions += 1;
    }
    if ok(f_hi) {
        return Ok(Calibration {
            max_force: hi,
            fall_fraction: f_hi,
            evaluations,
            converged: true,
        });
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let f = frac(mid)?;
        if ok(f) {
            return Ok(Calibration {
                max_force: mid,
                fall_fraction: f,
                evaluations,
                converged: true,
            });
        }
        if f > 0.5 {
            hi = mid;
            f_hi = f;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-3 * start {
            break;
        }
    }
    log::warn!(
        "calibration of {} did not reach 0.5 ± {tolerance}; returning bracket edge {hi:.3} N (fall fraction {f_hi:.3})",
        kind.as_str()
    );
    Ok(Calibration {
        max_force: hi,
        fall_fraction: f_hi,
        evaluations,
        converged: false,
    })
}

//! Distance-correlation diagnostics of candidate features against the time
//! remaining until the fall.

use std::fmt::Write;

use super::{distance_correlation, subsample_indices, trajectory_features, FeatureSet, DCOR_MAX_SAMPLES};
use crate::error::{Error, Result};
use crate::params::RobotParams;
use crate::scenario::Trajectory;
use crate::util::fmt_sig9;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureReport {
    pub names: Vec<String>,
    /// dCor of each feature with the remaining time to fall.
    pub lead_dcor: Vec<f64>,
    pub pairwise: Vec<Vec<f64>>,
    pub n_samples: usize,
}

impl FeatureReport {
    /// `feature,lead_time,<names...>` followed by one row per feature.
    pub fn to_csv(&self) -> String {
        let mut out = format!("feature,lead_time,{}\n", self.names.join(","));
        for (i, name) in self.names.iter().enumerate() {
            let row: Vec<String> = self.pairwise[i].iter().map(|&v| fmt_sig9(v)).collect();
            let _ = writeln!(out, "{name},{},{}", fmt_sig9(self.lead_dcor[i]), row.join(","));
        }
        out
    }
}

/// Report over arbitrary named columns aligned with `lead`.
pub fn feature_report_columns(names: &[String], columns: &[Vec<f64>], lead: &[f64]) -> Result<FeatureReport> {
    let idx = subsample_indices(lead.len(), DCOR_MAX_SAMPLES);
    let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<f64>>();
    let lead_s = pick(lead);
    let cols: Vec<Vec<f64>> = columns.iter().map(|c| pick(c)).collect();
    let d = cols.len();
    let mut pairwise = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in i..d {
            let v = distance_correlation(&cols[i], &cols[j])?;
            pairwise[i][j] = v;
            pairwise[j][i] = v;
        }
    }
    let lead_dcor = cols
        .iter()
        .map(|c| distance_correlation(c, &lead_s))
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureReport {
        names: names.to_vec(),
        lead_dcor,
        pairwise,
        n_samples: lead.len(),
    })
}

/// Pools every sample of the fall trajectories and correlates the chosen
/// feature set with `fall_time - t`.
pub fn feature_report(trajectories: &[Trajectory], set: FeatureSet, params: &RobotParams) -> Result<FeatureReport> {
    let mut columns = vec![Vec::new(); set.dim()];
    let mut lead = Vec::new();
    for traj in trajectories {
        let Some(fall) = traj.fall_time else { continue };
        for (s, f) in traj.samples.iter().zip(trajectory_features(&traj.samples, set, params)) {
            lead.push(fall - s.t);
            for (c, v) in columns.iter_mut().zip(f) {
                c.push(v);
            }
        }
    }
    if lead.len() < 2 {
        return Err(Error::InsufficientData("feature report needs fall trajectories".into()));
    }
    let names: Vec<String> = set.names().iter().map(|s| s.to_string()).collect();
    feature_report_columns(&names, &columns, &lead)
}

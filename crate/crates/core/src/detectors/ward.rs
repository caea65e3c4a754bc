//! Ward minimum-variance effort of merging the newest frame into the rest
//! of its window, under a distance-correlation metric.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::Score;
use crate::dataset::FeatureWindow;
use crate::error::{Error, Result};
use crate::features::{distance_correlation, subsample_indices, DCOR_MAX_SAMPLES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnModel {
    pub d: usize,
    pub n_window: usize,
    pub lambda: f64,
    /// Row-major d × d distance-correlation matrix.
    pub r: Vec<f64>,
    /// Row-major (R + λI)⁻¹.
    pub r_inv: Vec<f64>,
    pub threshold: f64,
}

fn quad_form(r_inv: &[f64], v: &[f64]) -> f64 {
    let d = v.len();
    let mut s = 0.0;
    for i in 0..d {
        let row = &r_inv[i * d..(i + 1) * d];
        s += v[i] * row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    }
    s
}

fn mean(rows: &[&[f64]]) -> Vec<f64> {
    let d = rows[0].len();
    let mut mu = vec![0.0; d];
    for r in rows {
        for (m, v) in mu.iter_mut().zip(r.iter()) {
            *m += v;
        }
    }
    let n = rows.len() as f64;
    mu.iter_mut().for_each(|m| *m /= n);
    mu
}

/// Σ (x − μ)ᵀ R⁻¹ (x − μ) over the rows of a cluster.
pub fn sse(rows: &[&[f64]], r_inv: &[f64]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let mu = mean(rows);
    rows.iter()
        .map(|r| {
            let dev: Vec<f64> = r.iter().zip(&mu).map(|(x, m)| x - m).collect();
            quad_form(r_inv, &dev)
        })
        .sum()
}

/// Increase in SSE when frame `b` joins cluster `a` (at least two rows).
pub fn ward_effort(a: &[&[f64]], b: &[f64], r_inv: &[f64]) -> Result<f64> {
    if a.len() < 2 {
        return Err(Error::InsufficientData(format!("cluster A needs 2 rows, got {}", a.len())));
    }
    let mut union: Vec<&[f64]> = a.to_vec();
    union.push(b);
    Ok(sse(&union, r_inv) - sse(a, r_inv))
}

/// General form SSE(A ∪ B) − SSE(A) − SSE(B).
pub fn ward_effort_full(a: &[&[f64]], b: &[&[f64]], r_inv: &[f64]) -> f64 {
    let union: Vec<&[f64]> = a.iter().chain(b.iter()).copied().collect();
    sse(&union, r_inv) - sse(a, r_inv) - sse(b, r_inv)
}

/// Pairwise distance-correlation matrix of the columns of `frames`, with a
/// unit diagonal.
pub fn correlation_matrix(frames: &[&[f64]]) -> Result<Vec<f64>> {
    if frames.len() < 2 {
        return Err(Error::InsufficientData(format!("{} frames for the correlation matrix", frames.len())));
    }
    let d = frames[0].len();
    let idx = subsample_indices(frames.len(), DCOR_MAX_SAMPLES);
    let cols: Vec<Vec<f64>> = (0..d).map(|j| idx.iter().map(|&i| frames[i][j]).collect()).collect();
    let mut r = vec![0.0; d * d];
    for i in 0..d {
        r[i * d + i] = 1.0;
        for j in i + 1..d {
            let v = distance_correlation(&cols[i], &cols[j])?;
            r[i * d + j] = v;
            r[j * d + i] = v;
        }
    }
    Ok(r)
}

/// (R + λI)⁻¹, symmetrized.
pub fn regularized_inverse(r: &[f64], d: usize, lambda: f64) -> Result<Vec<f64>> {
    let m = DMatrix::from_row_slice(d, d, r) + DMatrix::identity(d, d) * lambda;
    let inv = match m.clone().cholesky() {
        Some(c) => c.inverse(),
        None => m.try_inverse().ok_or(Error::SingularR)?,
    };
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularR);
    }
    let sym = (&inv + inv.transpose()) * 0.5;
    Ok(sym.transpose().as_slice().to_vec())
}

/// Effort of the window's last frame against its earlier frames.
pub fn window_effort(window: &FeatureWindow, r_inv: &[f64]) -> Result<f64> {
    let frames: Vec<&[f64]> = window.frames().collect();
    let (b, a) = frames.split_last().ok_or_else(|| Error::InsufficientData("empty window".into()))?;
    ward_effort(a, b, r_inv)
}

/// Fits R on the frames of the safe windows and sets the threshold to the
/// largest safe effort.
pub fn nn_train(safe: &[FeatureWindow], lambda: f64) -> Result<NnModel> {
    let first = safe
        .first()
        .ok_or_else(|| Error::InsufficientData("no safe training windows".into()))?;
    let (d, n_window) = (first.d, first.m);
    let frames: Vec<&[f64]> = safe.iter().flat_map(|w| w.frames()).collect();
    let r = correlation_matrix(&frames)?;
    let r_inv = regularized_inverse(&r, d, lambda)?;
    let mut threshold = f64::NEG_INFINITY;
    for w in safe {
        threshold = threshold.max(window_effort(w, &r_inv)?);
    }
    let min_eig = DMatrix::from_row_slice(d, d, &r).symmetric_eigenvalues().min();
    if min_eig + lambda <= 0.0 {
        log::warn!("distance-correlation matrix is indefinite (min eigenvalue {min_eig:.3e})");
    }
    Ok(NnModel {
        d,
        n_window,
        lambda,
        r,
        r_inv,
        threshold,
    })
}

impl NnModel {
    /// Faulty iff the effort strictly exceeds the threshold.
    pub fn score(&self, window: &FeatureWindow) -> Score {
        self.score_data(&window.data)
    }

    pub fn score_data(&self, data: &[f64]) -> Score {
        let d = self.d;
        let m = data.len() / d;
        let a: Vec<&[f64]> = (0..m - 1).map(|i| &data[i * d..(i + 1) * d]).collect();
        let b = &data[(m - 1) * d..];
        let value = ward_effort(&a, b, &self.r_inv).unwrap_or(f64::NAN);
        Score {
            value,
            faulty: value > self.threshold,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn identity(d: usize) -> Vec<f64> {
        (0..d * d).map(|k| if k % (d + 1) == 0 { 1.0 } else { 0.0 }).collect()
    }

    fn window(frames: &[Vec<f64>]) -> FeatureWindow {
        FeatureWindow {
            trajectory_id: 0,
            end_time: 0.0,
            end_index: frames.len() - 1,
            m: frames.len(),
            d: frames[0].len(),
            data: frames.concat(),
            label: 1,
        }
    }

    #[test]
    fn identical_rows_cost_nothing() {
        let row = [0.3, -1.0, 2.0];
        let a: Vec<&[f64]> = vec![&row, &row, &row];
        assert_eq!(ward_effort(&a, &row, &identity(3)).unwrap(), 0.0);
    }

    #[test]
    fn needs_two_rows() {
        let row = [1.0];
        assert!(ward_effort(&[&row], &row, &identity(1)).is_err());
    }

    #[test]
    fn single_window_threshold_is_its_own_effort() {
        let frames: Vec<Vec<f64>> = (0..10).map(|i| vec![(i as f64).sin(), (i as f64 * 0.7).cos()]).collect();
        let w = window(&frames);
        let model = nn_train(&[w.clone()], 1e-6).unwrap();
        assert_eq!(model.threshold, window_effort(&w, &model.r_inv).unwrap());
        assert!(!model.score(&w).faulty, "a tie is safe");
    }

    #[test]
    fn displaced_frame_is_faulty() {
        let frames: Vec<Vec<f64>> = (0..10).map(|i| vec![(i as f64).sin(), (i as f64 * 0.7).cos()]).collect();
        let model = nn_train(&[window(&frames)], 1e-6).unwrap();
        let mut far = frames.clone();
        let mut shift = 1.0;
        loop {
            far[9] = vec![frames[9][0] + shift, frames[9][1] - shift];
            if model.score(&window(&far)).faulty {
                break;
            }
            shift *= 2.0;
            assert!(shift < 1e6);
        }
    }

    #[test]
    fn correlation_matrix_has_unit_diagonal() {
        let frames: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, (i as f64).powi(2), 1.0]).collect();
        let refs: Vec<&[f64]> = frames.iter().map(Vec::as_slice).collect();
        let r = correlation_matrix(&refs).unwrap();
        assert_eq!((r[0], r[4], r[8]), (1.0, 1.0, 1.0));
        assert_eq!(r[1], r[3]);
        assert_eq!(r[2], 0.0, "constant column is uncorrelated");
    }

    proptest! {
        #[test]
        fn simplified_matches_full_for_singleton(
            a in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 2..8),
            b in prop::collection::vec(-3.0f64..3.0, 3),
        ) {
            let r_inv = identity(3);
            let rows: Vec<&[f64]> = a.iter().map(Vec::as_slice).collect();
            let simple = ward_effort(&rows, &b, &r_inv).unwrap();
            let full = ward_effort_full(&rows, &[&b], &r_inv);
            prop_assert!((simple - full).abs() <= 1e-10 * simple.abs().max(1.0));
            prop_assert!(simple >= -1e-12);
        }

        #[test]
        fn adding_windows_never_lowers_threshold(seed in 0u64..500) {
            use rand::Rng;
            let mut rng = crate::util::stream_rng(seed, 0);
            let ws: Vec<FeatureWindow> = (0..4)
                .map(|_| window(&(0..6).map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()]).collect::<Vec<_>>()))
                .collect();
            let m = nn_train(&ws, 1e-6).unwrap();
            let r_inv = m.r_inv.clone();
            let t3 = ws[..3].iter().map(|w| window_effort(w, &r_inv).unwrap()).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(m.threshold >= t3);
        }
    }
}

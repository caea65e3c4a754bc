use crate::error::{Error, Result};

/// Longer series are uniformly subsampled to this length first.
pub const DCOR_MAX_SAMPLES: usize = 2000;

/// Evenly spaced indices selecting at most `max` of `n` samples.
pub fn subsample_indices(n: usize, max: usize) -> Vec<usize> {
    if n <= max {
        (0..n).collect()
    } else {
        (0..max).map(|i| i * n / max).collect()
    }
}

fn row_means(x: &[f64]) -> (Vec<f64>, f64) {
    let n = x.len() as f64;
    let rows: Vec<f64> = x.iter().map(|&a| x.iter().map(|&b| (a - b).abs()).sum::<f64>() / n).collect();
    let grand = rows.iter().sum::<f64>() / n;
    (rows, grand)
}

/// Sample distance correlation from double-centered distance matrices,
/// streamed row by row so memory stays linear. Constant series give 0.
pub fn distance_correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len().min(y.len());
    if n < 2 {
        return Err(Error::DegenerateSeries(n));
    }
    let idx = subsample_indices(n, DCOR_MAX_SAMPLES);
    let xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();

    let (ax, gx) = row_means(&xs);
    let (ay, gy) = row_means(&ys);
    let (mut cov, mut vx, mut vy) = (0.0, 0.0, 0.0);
    for i in 0..xs.len() {
        for j in 0..xs.len() {
            let a = (xs[i] - xs[j]).abs() - ax[i] - ax[j] + gx;
            let b = (ys[i] - ys[j]).abs() - ay[i] - ay[j] + gy;
            cov += a * b;
            vx += a * a;
            vy += b * b;
        }
    }
    if vx <= 0.0 || vy <= 0.0 {
        return Ok(0.0);
    }
    Ok((cov.max(0.0) / (vx * vy).sqrt()).sqrt().min(1.0))
}

use serde::Serialize;

use crate::error::{HfeError, Result};

/// Least-squares comparison of predicted (dependent) against measured
/// (independent) values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegressionMetrics {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Same units as the inputs.
    pub rmse: f64,
    /// RMSE as a percentage of the largest measured magnitude.
    pub rmse_percent: f64,
    pub max_abs_error: f64,
    pub n_points: usize,
}

/// Ordinary least squares of `predicted` on `measured`.
pub fn regression_metrics(measured: &[f64], predicted: &[f64]) -> Result<RegressionMetrics> {
    if measured.len() != predicted.len() {
        return Err(HfeError::Contract(format!(
            "{} measured values vs {} predicted",
            measured.len(),
            predicted.len()
        )));
    }
    let n = measured.len();
    if n < 3 {
        return Err(HfeError::InsufficientData {
            needed: 3,
            found: n,
        });
    }
    let nf = n as f64;
    let mx = measured.iter().sum::<f64>() / nf;
    let my = predicted.iter().sum::<f64>() / nf;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    let (mut sq, mut max_err, mut max_meas) = (0.0, 0.0_f64, 0.0_f64);
    for (&x, &y) in measured.iter().zip(predicted) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
        let e = y - x;
        sq += e * e;
        max_err = max_err.max(e.abs());
        max_meas = max_meas.max(x.abs());
    }
    if !(sxx > 0.0) {
        return Err(HfeError::DegenerateRegression);
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let rmse = (sq / nf).sqrt();
    Ok(RegressionMetrics {
        slope,
        intercept: my - slope * mx,
        r2,
        rmse,
        rmse_percent: 100.0 * rmse / max_meas,
        max_abs_error: max_err,
        n_points: n,
    })
}

//! Ordinary least-squares line fits used by the verifiers and experiment suites.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points required by [`fit_line`].
pub const MIN_FIT_POINTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub r_squared: f64,
    /// Range of the abscissa actually fitted.
    pub window: (f64, f64),
    pub points: usize,
}

/// Least-squares line `y = slope x + intercept` through at least [`MIN_FIT_POINTS`] points.
pub fn fit_line(x: &[f64], y: &[f64]) -> Result<FitResult> {
    fit_line_min(x, y, MIN_FIT_POINTS)
}

/// As [`fit_line`] with an explicit minimum point count (at least 3).
pub fn fit_line_min(x: &[f64], y: &[f64], min_points: usize) -> Result<FitResult> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("{} abscissae, {} ordinates", x.len(), y.len())));
    }
    let min_points = min_points.max(3);
    if x.len() < min_points {
        return Err(Error::Precondition(format!(
            "a fit needs at least {min_points} points, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::domain("fit data must be finite"));
    }
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("fit abscissae are all equal"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let slope_stderr = (sse / (m - 2.0) / sxx).sqrt();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(FitResult {
        slope,
        intercept,
        slope_stderr,
        r_squared,
        window: (lo, hi),
        points: x.len(),
    })
}

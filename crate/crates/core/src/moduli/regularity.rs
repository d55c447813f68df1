use serde::Serialize;

use super::family::ModulusSpec;

/// Which derivative bound to test near zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularityMode {
    /// `s^k mu^(k)(s) = O(mu(s))` for `k = 1, 2`.
    BlowupCond,
    /// `s^k mu^(k)(s) = O(mu^(k-1)(s))` for `k = 1, 2`.
    LifespanCond,
    /// `s mu'(s) = O(mu(s))`.
    GlobalCond,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    pub mode: RegularityMode,
    pub passed: bool,
    pub worst_ratio: f64,
    pub worst_s: f64,
    /// Slope of log-ratio against log-s over the smallest decade of the grid.
    pub trend_slope: f64,
}

const GRID_LOW: f64 = 1e-12;
const GRID_POINTS: usize = 481;
const TREND_THRESHOLD: f64 = -0.01;

/// Bounded-ratio proxy for the asymptotic derivative conditions: the ratio must stay finite
/// on a log-spaced grid and show no growth trend toward zero.
pub fn check_regularity(spec: &ModulusSpec, mode: RegularityMode) -> RegularityReport {
    // Keep the top point inside the open interval where derivatives exist.
    let high = spec.cutoff() * (1.0 - 1e-9);
    let (la, lb) = (GRID_LOW.ln(), high.ln());
    let mut worst_ratio = 0.0_f64;
    let mut worst_s = GRID_LOW;
    let mut finite = true;
    let mut trend_points = Vec::new();
    for i in 0..GRID_POINTS {
        let ls = la + (lb - la) * i as f64 / (GRID_POINTS - 1) as f64;
        let s = ls.exp();
        let ratio = match ratio_at(spec, mode, s) {
            Some(r) if r.is_finite() => r,
            _ => {
                finite = false;
                f64::INFINITY
            }
        };
        if ratio > worst_ratio || (i == 0 && ratio >= worst_ratio) {
            worst_ratio = ratio;
            worst_s = s;
        }
        if ls <= la + std::f64::consts::LN_10 && ratio > 0.0 && ratio.is_finite() {
            trend_points.push((ls, ratio.ln()));
        }
    }
    let trend_slope = least_squares_slope(&trend_points);
    RegularityReport {
        mode,
        passed: finite && trend_slope >= TREND_THRESHOLD,
        worst_ratio,
        worst_s,
        trend_slope,
    }
}

fn ratio_at(spec: &ModulusSpec, mode: RegularityMode, s: f64) -> Option<f64> {
    let mu = spec.eval(s).ok()?;
    let d1 = spec.derivative(s, 1).ok()?;
    let r1 = quotient((s * d1).abs(), mu.abs());
    match mode {
        RegularityMode::GlobalCond => Some(r1),
        RegularityMode::BlowupCond => {
            let d2 = spec.derivative(s, 2).ok()?;
            Some(r1.max(quotient((s * s * d2).abs(), mu.abs())))
        }
        RegularityMode::LifespanCond => {
            let d2 = spec.derivative(s, 2).ok()?;
            Some(r1.max(quotient((s * s * d2).abs(), d1.abs())))
        }
    }
}

// 0/0 counts as a zero ratio; x/0 with x > 0 is unbounded.
fn quotient(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

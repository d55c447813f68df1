use rayon::prelude::*;
use serde::Serialize;

use super::fraclap::{fractional_laplacian_direct, FracLapControls, PhiPower};
use super::profile::{phi_power, phi_power_derivatives};
use crate::error::{Error, Result};
use crate::fit::fit_line;

/// Relative change of `C_max` tolerated between a grid and its refinement.
pub const REFINEMENT_TOLERANCE: f64 = 0.02;

/// Largest log-log slope of the ratio over the last decade still counted as "no growth".
pub const TREND_TOLERANCE: f64 = 0.05;

/// A ratio still rising over the last decade counts as bounded when its rise over the second
/// half-decade is at most this fraction of the rise over the first. Logarithmic growth gives 1.
pub const DECELERATION_TOLERANCE: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    /// Largest ratio on the coarse grid.
    pub c_max: f64,
    /// Largest ratio on the refined grid (twice the points).
    pub c_max_refined: f64,
    pub argmax: f64,
    /// Log-log slope of the ratio over `|x| ∈ [r_max/10, r_max]`.
    pub tail_slope: f64,
    /// Rise of the ratio over `[r_max/√10, r_max]` divided by its rise over
    /// `[r_max/10, r_max/√10]`; zero when the ratio does not rise.
    pub deceleration: f64,
    pub finite: bool,
    pub stable: bool,
    pub bounded: bool,
    pub passed: bool,
}

/// Radial grid `r_max (i/(m-1))^2`, dense near the origin where the profile bends.
pub fn radial_grid(points: usize, r_max: f64) -> Vec<f64> {
    let m = points.max(2);
    (0..m)
        .map(|i| r_max * (i as f64 / (m - 1) as f64).powi(2))
        .collect()
}

fn report(coarse: &[(f64, f64)], fine: &[(f64, f64)], r_max: f64) -> Result<BoundReport> {
    let best = |v: &[(f64, f64)]| {
        v.iter()
            .copied()
            .fold((0.0, f64::NEG_INFINITY), |acc, (r, c)| if c > acc.1 { (r, c) } else { acc })
    };
    let (argmax, c_max) = best(coarse);
    let (_, c_max_refined) = best(fine);
    let finite = fine.iter().chain(coarse).all(|(_, c)| c.is_finite());
    let tail: Vec<(f64, f64)> = fine
        .iter()
        .copied()
        .filter(|(r, c)| *r >= r_max / 10.0 && *c > 0.0)
        .collect();
    let tail_slope = if tail.len() >= 5 {
        let x: Vec<f64> = tail.iter().map(|(r, _)| r.ln()).collect();
        let y: Vec<f64> = tail.iter().map(|(_, c)| c.ln()).collect();
        fit_line(&x, &y)?.slope
    } else {
        0.0
    };
    let stable = c_max > 0.0 && ((c_max_refined - c_max) / c_max).abs() < REFINEMENT_TOLERANCE;
    let at = |r: f64| interpolate(fine, r);
    let mid = r_max / 10f64.sqrt();
    let early = at(mid) - at(r_max / 10.0);
    let late = at(r_max) - at(mid);
    let deceleration = if early > 0.0 { (late / early).max(0.0) } else { 0.0 };
    let bounded = tail_slope <= TREND_TOLERANCE || deceleration <= DECELERATION_TOLERANCE;
    Ok(BoundReport {
        c_max,
        c_max_refined,
        argmax,
        tail_slope,
        deceleration,
        finite,
        stable,
        bounded,
        passed: finite && stable && bounded,
    })
}

/// Piecewise-linear value of sorted samples at `r`.
fn interpolate(v: &[(f64, f64)], r: f64) -> f64 {
    let i = v.partition_point(|(x, _)| *x < r);
    if i == 0 {
        return v[0].1;
    }
    if i >= v.len() {
        return v[v.len() - 1].1;
    }
    let (x0, y0) = v[i - 1];
    let (x1, y1) = v[i];
    y0 + (y1 - y0) * (r - x0) / (x1 - x0)
}

/// Pointwise ratio `|∂^α φ^q| / φ^{q+|α|}` at radius `r` in dimension `n`.
///
/// For `|α| = 2` the largest Hessian eigenvalue modulus is used: `|g''|` along the radius and
/// `|g'|/r` across it (the latter only when `n = 2`).
pub fn lemma8_ratio(q: f64, order: u8, n: u32, r: f64) -> f64 {
    let (g1, g2) = phi_power_derivatives(r, q);
    match order {
        1 => g1.abs() / phi_power(r, q + 1.0),
        _ => {
            let across = if n >= 2 && r > 0.0 { (g1 / r).abs() } else { 0.0 };
            g2.abs().max(across) / phi_power(r, q + 2.0)
        }
    }
}

pub fn verify_lemma_bound_8(q: f64, order: u8, n: u32, points: usize, r_max: f64) -> Result<BoundReport> {
    if !(q > 0.0) {
        return Err(Error::domain(format!("q must be positive, got {q}")));
    }
    if !(order == 1 || order == 2) {
        return Err(Error::domain(format!("derivative order must be 1 or 2, got {order}")));
    }
    let eval = |m: usize| -> Vec<(f64, f64)> {
        radial_grid(m, r_max)
            .into_iter()
            .map(|r| (r, lemma8_ratio(q, order, n, r)))
            .collect()
    };
    report(&eval(points), &eval(2 * points), r_max)
}

/// `|(-Δ)^s φ^k(x)| / φ^k(x)` on the radial grid.
///
/// The exponent `k` is a parameter: the literal statement uses `k = -n - 2s`, for which the
/// integral diverges (growth faster than `|x|^{2s}`), while the blow-up argument needs
/// `k = n + 2σ`. The default elsewhere is the latter.
pub fn verify_lemma_bound_9(
    s: f64,
    n: u32,
    power: f64,
    points: usize,
    r_max: f64,
    controls: &FracLapControls,
) -> Result<BoundReport> {
    if !(s > 0.0 && s <= 0.5) {
        return Err(Error::domain(format!("s must lie in (0, 1/2], got {s}")));
    }
    let profile = PhiPower { power, scale: 1.0 };
    let eval = |m: usize| -> Result<Vec<(f64, f64)>> {
        radial_grid(m, r_max)
            .into_par_iter()
            .map(|r| {
                let v = fractional_laplacian_direct(&profile, n, s, r, controls)?;
                Ok((r, v.abs() / phi_power(r, power)))
            })
            .collect()
    };
    report(&eval(points)?, &eval(2 * points)?, r_max)
}

use rayon::prelude::*;
use serde::Serialize;

use super::fraclap::{fractional_laplacian_direct, FracLapControls, PhiPower};
use super::profile::{eta_with_derivatives, phi_power, phi_power_derivatives, TestFunctionFamily};
use crate::error::Result;

/// Largest ratio of each derivative of `Φ_R` to its envelope on a sample grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub r: f64,
    /// `|∂_t Φ_R| / (R^{σ-1} φ_R^{n+2σ} (η*_R)^{ν+1})`.
    pub dt: f64,
    /// `|∂²_t Φ_R| / (R^{2(σ-1)} φ_R^{n+2σ} (η*_R)^ν)`.
    pub dtt: f64,
    /// `|ΔΦ_R| / (R^{-1} η_R^{ν+2} (φ*_R)^{n+2σ+2})`.
    pub laplacian: f64,
    /// `|(-Δ)^σ ∂_t Φ_R| / (R^{-1} (η*_R)^{ν+1} φ_R^{n+2σ})`.
    pub fractional: f64,
    /// `|∂²_tΦ_R - ΔΦ_R - (-Δ)^σ∂_tΦ_R| / (R^{-1}(Φ¹_R + Φ²_R))`.
    pub combined: f64,
    /// Largest `|ΔΦ_R|` inside `|x| < R^{1/2}`, where it must vanish.
    pub inner_laplacian: f64,
    /// Largest `|∂_tΦ_R|` for `t < R^{1-σ}/2`, where it must vanish.
    pub early_time_derivative: f64,
}

impl EnvelopeReport {
    pub fn finite(&self) -> bool {
        [self.dt, self.dtt, self.laplacian, self.fractional, self.combined]
            .iter()
            .all(|v| v.is_finite())
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num.abs() / den
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Evaluates every envelope ratio on `radial_points × time_points` samples of
/// `|x| ∈ [0, x_extent R^{1/2}]`, `t ∈ [0, R^{1-σ}]`.
pub fn derivative_envelopes(
    fam: &TestFunctionFamily,
    radial_points: usize,
    time_points: usize,
    x_extent: f64,
    controls: &FracLapControls,
) -> Result<EnvelopeReport> {
    let r = fam.r;
    let root = fam.space_scale();
    let time = fam.time_scale();
    let k = fam.spatial_power();
    let nu = fam.nu;
    let n = fam.n;
    let sigma = fam.sigma;

    let xs: Vec<f64> = (0..radial_points)
        .map(|i| x_extent * root * i as f64 / (radial_points - 1).max(1) as f64)
        .collect();
    let ts: Vec<f64> = (0..time_points)
        .map(|j| time * j as f64 / (time_points - 1).max(1) as f64)
        .collect();

    // Spatial factors, one per radius.
    let profile = PhiPower { power: k, scale: root };
    let spatial: Vec<[f64; 4]> = xs
        .par_iter()
        .map(|&x| -> Result<[f64; 4]> {
            let y = x / root;
            let phik = phi_power(y, k);
            let (g1, g2) = phi_power_derivatives(y, k);
            let lap = if y == 0.0 {
                n as f64 * g2
            } else {
                g2 + (n as f64 - 1.0) * g1 / y
            } / r;
            let frac = if sigma == 0.0 {
                phik
            } else {
                fractional_laplacian_direct(&profile, n, sigma, x, controls)?
            };
            let star = if y < 1.0 { 0.0 } else { phi_power(y, k + 2.0) };
            Ok([phik, lap, frac, star])
        })
        .collect::<Result<_>>()?;

    let mut rep = EnvelopeReport {
        r,
        dt: 0.0,
        dtt: 0.0,
        laplacian: 0.0,
        fractional: 0.0,
        combined: 0.0,
        inner_laplacian: 0.0,
        early_time_derivative: 0.0,
    };
    for &t in &ts {
        let s = t / time;
        let [e, e1, e2] = eta_with_derivatives(s);
        let (e1, e2) = (e1 / time, e2 / (time * time));
        let e_star = if s < 0.5 { 0.0 } else { e };
        let eta_nu2 = e.powf(nu + 2.0);
        let d_eta = (nu + 2.0) * e.powf(nu + 1.0) * e1;
        let dd_eta = (nu + 2.0) * (nu + 1.0) * e.powf(nu) * e1 * e1 + (nu + 2.0) * e.powf(nu + 1.0) * e2;
        for (x, &[phik, lap, frac, star]) in xs.iter().zip(&spatial) {
            let dt = phik * d_eta;
            let dtt = phik * dd_eta;
            let lap_full = eta_nu2 * lap;
            let frac_dt = frac * d_eta;
            rep.dt = rep.dt.max(ratio(dt, r.powf(sigma - 1.0) * phik * e_star.powf(nu + 1.0)));
            rep.dtt = rep.dtt.max(ratio(dtt, r.powf(2.0 * (sigma - 1.0)) * phik * e_star.powf(nu)));
            rep.laplacian = rep.laplacian.max(ratio(lap_full, eta_nu2 * star / r));
            rep.fractional = rep.fractional.max(ratio(frac_dt, e_star.powf(nu + 1.0) * phik / r));
            let phi1 = star * e.powf(nu);
            let phi2 = phik * e_star.powf(nu);
            rep.combined = rep.combined.max(ratio(dtt - lap_full - frac_dt, (phi1 + phi2) / r));
            if *x < root {
                rep.inner_laplacian = rep.inner_laplacian.max(lap_full.abs());
            }
            if s < 0.5 {
                rep.early_time_derivative = rep.early_time_derivative.max(dt.abs());
            }
        }
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderReport {
    pub reports: Vec<EnvelopeReport>,
    /// Largest relative spread of the combined ratio across the ladder.
    pub combined_spread: f64,
    pub passed: bool,
}

/// Runs [`derivative_envelopes`] across `r_values`; passes when every ratio is finite and the
/// combined ratio varies by less than `spread_tolerance` relative.
pub fn envelope_ladder(
    fam: &TestFunctionFamily,
    r_values: &[f64],
    radial_points: usize,
    time_points: usize,
    spread_tolerance: f64,
    controls: &FracLapControls,
) -> Result<LadderReport> {
    let reports = r_values
        .iter()
        .map(|&r| derivative_envelopes(&fam.with_r(r), radial_points, time_points, 8.0, controls))
        .collect::<Result<Vec<_>>>()?;
    let hi = reports.iter().map(|r| r.combined).fold(f64::NEG_INFINITY, f64::max);
    let lo = reports.iter().map(|r| r.combined).fold(f64::INFINITY, f64::min);
    let combined_spread = if hi > 0.0 { (hi - lo) / hi } else { 0.0 };
    let passed = reports.iter().all(|r| r.finite()) && combined_spread < spread_tolerance;
    Ok(LadderReport {
        reports,
        combined_spread,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moduli::SystemParams;

    #[test]
    fn flat_regions_have_zero_derivatives() {
        let sys = SystemParams::new(0.25, 1, 2.0, 2.0).unwrap();
        let fam = TestFunctionFamily::new(&sys, 100.0, None).unwrap();
        let c = FracLapControls { rel_tol: 1e-7, ..Default::default() };
        let rep = derivative_envelopes(&fam, 33, 41, 8.0, &c).unwrap();
        assert_eq!(rep.inner_laplacian, 0.0);
        assert_eq!(rep.early_time_derivative, 0.0);
        assert!(rep.finite(), "{rep:?}");
    }

    #[test]
    fn combined_ratio_is_stable_across_r() {
        let sys = SystemParams::new(0.5, 2, 2.0, 2.0).unwrap();
        let fam = TestFunctionFamily::new(&sys, 100.0, None).unwrap();
        let c = FracLapControls { rel_tol: 1e-7, ..Default::default() };
        let rep = envelope_ladder(&fam, &[1e2, 1e3, 1e4], 33, 41, 0.10, &c).unwrap();
        assert!(rep.passed, "{rep:?}");
    }
}

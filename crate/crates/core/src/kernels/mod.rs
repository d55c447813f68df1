//! Fourier multipliers of the linear damped wave operator `∂_tt + |ξ|^{2σ} ∂_t + |ξ|^2`.
//!
//! With `b = |ξ|^{2σ}/2`, `Δ = 1 - 4|ξ|^{2-4σ}`, `a = bt` and `z = Δa²`:
//!
//! ```text
//! K0 = e^{-a} ch(z),   K1 = t e^{-a} shc(z)
//! R0 = K0 + b K1,      R1 = K1
//! ```
//!
//! where `ch(z) = cosh(√z)` and `shc(z) = sinh(√z)/√z` (continued to `z < 0` as `cos`, `sin`).
//! `R0`, `R1` are the multipliers of the displacement and velocity data.

mod propagator;

use serde::Serialize;

pub use propagator::{apply_propagator, PropagatedPair, RadialIndex};
#[allow(unused_imports)]
pub(crate) use propagator::StepWeights;

use crate::error::Result;
use crate::moduli::check_sigma;

/// `|z|` below which the even power series replaces the closed forms.
pub const SERIES_THRESHOLD: f64 = 1e-4;
const SERIES_TERMS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelPoint {
    pub t: f64,
    pub xi: f64,
    pub sigma: f64,
    pub k0: f64,
    pub k1: f64,
    pub r0: f64,
    pub r1: f64,
}

/// Time derivatives of the multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelRates {
    pub dk0: f64,
    pub dk1: f64,
    pub dr0: f64,
    pub dr1: f64,
}

/// `|ξ|^{2σ}` with `0^0 = 1`, so at `σ = 0` the damping is the identity for every mode.
pub fn damping(xi: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        1.0
    } else {
        xi.powf(2.0 * sigma)
    }
}

/// Branch point `|ξ| = 2^{-1/(1-2σ)}` where `Δ = 0`; none at `σ = 1/2`.
pub fn branch_point(sigma: f64) -> Option<f64> {
    (sigma < 0.5).then(|| 2f64.powf(-1.0 / (1.0 - 2.0 * sigma)))
}

/// `4|ξ|^{2-4σ}`, i.e. `1 - Δ`.
fn one_minus_delta(xi: f64, sigma: f64) -> f64 {
    if sigma == 0.5 {
        4.0
    } else {
        4.0 * xi.powf(2.0 - 4.0 * sigma)
    }
}

fn series(z: f64) -> (f64, f64) {
    // ch = sum z^k/(2k)!, shc = sum z^k/(2k+1)!
    let mut ch = 0.0;
    let mut shc = 0.0;
    let mut term = 1.0;
    for k in 0..SERIES_TERMS {
        ch += term;
        let next = term / (2 * k + 1) as f64;
        shc += next;
        term = next * z / (2 * k + 2) as f64;
    }
    (ch, shc)
}

/// `(K0, K1)` at `(t, ξ)`.
fn k_pair(t: f64, xi: f64, sigma: f64) -> (f64, f64) {
    let b = damping(xi, sigma) / 2.0;
    let a = b * t;
    let gap = one_minus_delta(xi, sigma);
    let delta = 1.0 - gap;
    let z = delta * a * a;
    if z.abs() < SERIES_THRESHOLD {
        let (ch, shc) = series(z);
        let e = (-a).exp();
        return (e * ch, t * e * shc);
    }
    if delta > 0.0 {
        // Low frequency: real roots -b(1 ± √Δ). 1 - √Δ is formed without cancellation.
        let root = delta.sqrt();
        let slow = (-a * gap / (1.0 + root)).exp();
        let fast_ratio = (-2.0 * a * root).exp();
        let k0 = 0.5 * slow * (1.0 + fast_ratio);
        let k1 = -slow * (-2.0 * a * root).exp_m1() / (2.0 * b * root);
        (k0, k1)
    } else {
        let omega = (-delta).sqrt();
        let e = (-a).exp();
        let phase = omega * a;
        (e * phase.cos(), e * phase.sin() / (omega * b))
    }
}

/// Evaluates `K0, K1, R0, R1` at time `t` and radial frequency `xi`.
pub fn eval_kernels(t: f64, xi: f64, sigma: f64) -> Result<KernelPoint> {
    check_args(t, xi, sigma)?;
    Ok(point(t, xi, sigma))
}

fn point(t: f64, xi: f64, sigma: f64) -> KernelPoint {
    let (k0, k1) = k_pair(t, xi, sigma);
    let b = damping(xi, sigma) / 2.0;
    KernelPoint {
        t,
        xi,
        sigma,
        k0,
        k1,
        r0: k0 + b * k1,
        r1: k1,
    }
}

/// Multipliers with their exact time derivatives.
pub fn eval_kernels_with_rates(t: f64, xi: f64, sigma: f64) -> Result<(KernelPoint, KernelRates)> {
    check_args(t, xi, sigma)?;
    Ok(point_with_rates(t, xi, sigma))
}

pub(crate) fn point_with_rates(t: f64, xi: f64, sigma: f64) -> (KernelPoint, KernelRates) {
    let p = point(t, xi, sigma);
    let b = damping(xi, sigma) / 2.0;
    let xi2 = xi * xi;
    let rates = KernelRates {
        dk0: -b * p.k0 + (b * b - xi2) * p.k1,
        dk1: p.k0 - b * p.k1,
        dr0: -xi2 * p.k1,
        dr1: p.k0 - b * p.k1,
    };
    (p, rates)
}

fn check_args(t: f64, xi: f64, sigma: f64) -> Result<()> {
    check_sigma(sigma)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(crate::Error::Domain(format!("t must be finite and >= 0, got {t}")));
    }
    if !(xi >= 0.0 && xi.is_finite()) {
        return Err(crate::Error::Domain(format!("xi must be finite and >= 0, got {xi}")));
    }
    Ok(())
}

/// Normalised residual of `K'' + |ξ|^{2σ} K' + |ξ|^2 K = 0` by central differences, maximised
/// over `K0` and `K1`.
///
/// Each residual is divided by `A (1 + |ξ|^{2σ} + |ξ|^2)`, where
/// `A = sqrt(K^2 + (K'/max(1, |ξ|))^2)` is the local oscillation amplitude, so zero crossings
/// do not inflate the ratio.
pub fn kernel_ode_residual(t: f64, xi: f64, sigma: f64, h: f64) -> Result<f64> {
    check_args(t, xi, sigma)?;
    if !(h > 0.0 && t >= 2.0 * h) {
        return Err(crate::Error::Domain(format!("need h > 0 and t >= 2h, got t = {t}, h = {h}")));
    }
    let d = damping(xi, sigma);
    let xi2 = xi * xi;
    let (lo, mid, hi) = (point(t - h, xi, sigma), point_with_rates(t, xi, sigma), point(t + h, xi, sigma));
    let (p, r) = mid;
    let freq = xi.max(1.0);
    let scale = 1.0 + d + xi2;
    let mut worst = 0.0_f64;
    for (km, k, kp, dk) in [(lo.k0, p.k0, hi.k0, r.dk0), (lo.k1, p.k1, hi.k1, r.dk1)] {
        let dtt = (kp - 2.0 * k + km) / (h * h);
        let dt = (kp - km) / (2.0 * h);
        let res = dtt + d * dt + xi2 * k;
        let amplitude = k.hypot(dk / freq);
        if res == 0.0 {
            continue;
        }
        worst = worst.max(res.abs() / (amplitude * scale));
    }
    Ok(worst)
}

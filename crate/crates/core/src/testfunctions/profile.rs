use serde::Serialize;

use crate::error::{Error, Result};
use crate::moduli::SystemParams;

/// `φ(r) = 1` for `r <= 1`, `(1 + (r-1)^4)^{-1/4}` beyond.
pub fn phi(r: f64) -> f64 {
    phi_power(r, 1.0)
}

/// `φ*`: zero inside the unit ball, `φ` outside.
pub fn phi_star(r: f64) -> f64 {
    if r < 1.0 {
        0.0
    } else {
        phi(r)
    }
}

/// `φ(r)^q`, valid for any real `q`.
pub fn phi_power(r: f64, q: f64) -> f64 {
    if r <= 1.0 {
        1.0
    } else {
        (1.0 + (r - 1.0).powi(4)).powf(-q / 4.0)
    }
}

/// First and second radial derivatives of `φ^q`.
///
/// With `h = 1 + (r-1)^4`: `g' = -q (r-1)^3 h^{-q/4-1}` and
/// `g'' = -q (r-1)^2 h^{-q/4-2} [3h - (q+4)(r-1)^4]`. Both vanish at the join `r = 1`.
pub fn phi_power_derivatives(r: f64, q: f64) -> (f64, f64) {
    if r <= 1.0 {
        return (0.0, 0.0);
    }
    let d = r - 1.0;
    let d4 = d.powi(4);
    let h = 1.0 + d4;
    let g1 = -q * d.powi(3) * h.powf(-q / 4.0 - 1.0);
    let g2 = -q * d * d * h.powf(-q / 4.0 - 2.0) * (3.0 * h - (q + 4.0) * d4);
    (g1, g2)
}

/// Smooth step `S(u) = 1 / (1 + exp(-ψ(u)))`, `ψ(u) = 1/(1-u) - 1/u`, with `S(0) = 0`, `S(1) = 1`.
///
/// Equivalently `f(u) / (f(u) + f(1-u))` with `f(u) = e^{-1/u}`, so every derivative vanishes at
/// both ends.
fn smooth_step(u: f64) -> [f64; 3] {
    if u <= 0.0 {
        return [0.0, 0.0, 0.0];
    }
    if u >= 1.0 {
        return [1.0, 0.0, 0.0];
    }
    let psi = 1.0 / (1.0 - u) - 1.0 / u;
    let s = if psi >= 0.0 {
        1.0 / (1.0 + (-psi).exp())
    } else {
        let e = psi.exp();
        e / (1.0 + e)
    };
    // s (1 - s) without cancellation.
    let w = (-psi.abs()).exp() / (1.0 + (-psi.abs()).exp()).powi(2);
    let d1 = 1.0 / (u * u) + 1.0 / ((1.0 - u) * (1.0 - u));
    let d2 = -2.0 / u.powi(3) + 2.0 / (1.0 - u).powi(3);
    let s1 = if w == 0.0 { 0.0 } else { w * d1 };
    let s2 = if w == 0.0 {
        0.0
    } else {
        w * ((1.0 - 2.0 * s) * d1 * d1 + d2)
    };
    [s, s1, s2]
}

/// `η` with `η = 1` on `[0, 1/2]`, `η = 0` on `[1, ∞)`, and `η(t) = 1 - S(2t - 1)` between.
/// Returns `[η, η', η'']`.
pub fn eta_with_derivatives(t: f64) -> [f64; 3] {
    let [s, s1, s2] = smooth_step(2.0 * t - 1.0);
    [1.0 - s, -2.0 * s1, -4.0 * s2]
}

pub fn eta(t: f64) -> f64 {
    eta_with_derivatives(t)[0]
}

/// `η*`: zero before `t = 1/2`, `η` after.
pub fn eta_star(t: f64) -> f64 {
    if t < 0.5 {
        0.0
    } else {
        eta(t)
    }
}

/// Parameters of the scaled test functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestFunctionFamily {
    pub r: f64,
    pub n: u32,
    pub sigma: f64,
    pub p_star: f64,
    pub q_star: f64,
    pub delta: f64,
    pub delta1: f64,
    pub nu: f64,
}

/// Values of the scaled test functions at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaledValues {
    pub phi_r: f64,
    pub phi_star_r: f64,
    pub eta_r: f64,
    pub eta_star_r: f64,
    /// `Φ_R = φ_R^{n+2σ} η_R^{ν+2}`.
    pub big_phi: f64,
    /// `Φ¹_R = (φ*_R)^{n+2σ+2} η_R^ν`.
    pub big_phi1: f64,
    /// `Φ²_R = φ_R^{n+2σ} (η*_R)^ν`.
    pub big_phi2: f64,
}

const NU_SLACK: f64 = 1e-9;

/// Lower end of the admissible `δ` interval: `n/(n+2σ)`, or `n/(n+2)` when `σ = 0`, where
/// only the `Φ¹` moment is finite.
pub fn delta_lower(n: u32, sigma: f64) -> f64 {
    let n = n as f64;
    if sigma == 0.0 {
        n / (n + 2.0)
    } else {
        n / (n + 2.0 * sigma)
    }
}

impl TestFunctionFamily {
    /// Defaults: `δ` at the middle of its interval, `δ1 = min((p-1)δ/p, (p-1)(1-δ)) / 2`,
    /// `ν` the smallest admissible integer.
    pub fn new(sys: &SystemParams, r: f64, delta: Option<f64>) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::domain(format!("R must be positive, got {r}")));
        }
        let lo = delta_lower(sys.n(), sys.sigma());
        let delta = delta.unwrap_or(0.5 * (lo + 1.0));
        if !(delta > lo && delta < 1.0) {
            return Err(Error::domain(format!("delta must lie in ({lo}, 1), got {delta}")));
        }
        let p = sys.p_star();
        let q = sys.q_star();
        let delta1 = 0.5 * ((p - 1.0) * delta / p).min((p - 1.0) * (1.0 - delta));
        let gap_p = (p - 1.0) * (1.0 - delta) - delta1;
        let gap_q = (q - 1.0) * (1.0 - delta) - delta1;
        // Rounding can push an integral bound just above itself; ceil would then skip it.
        let nu = ((2.0 / gap_p).max(2.0 / gap_q) * (1.0 - NU_SLACK)).ceil();
        let fam = Self {
            r,
            n: sys.n(),
            sigma: sys.sigma(),
            p_star: p,
            q_star: q,
            delta,
            delta1,
            nu,
        };
        fam.validate()?;
        Ok(fam)
    }

    pub fn with_r(mut self, r: f64) -> Self {
        self.r = r;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (p, q) = (self.p_star, self.q_star);
        let d = self.delta;
        let d1 = self.delta1;
        if !(d1 > 0.0 && d1 < (p - 1.0) * (d - d1)) {
            return Err(Error::domain(format!("delta1 = {d1} violates 0 < delta1 < (p-1)(delta-delta1)")));
        }
        let gap_p = p + (1.0 - p) * d - d1 - 1.0;
        let gap_q = q + (1.0 - q) * d - d1 - 1.0;
        if !(gap_p > 0.0 && gap_q > 0.0) {
            return Err(Error::domain("delta1 too large: p + (1-p)delta - delta1 - 1 must be positive"));
        }
        let bound = (2.0 / gap_p).max(2.0 / gap_q);
        if self.nu < bound * (1.0 - NU_SLACK) {
            return Err(Error::domain(format!("nu = {} is below the lower bound {bound}", self.nu)));
        }
        Ok(())
    }

    /// `R^{1/2}`, the spatial scale.
    pub fn space_scale(&self) -> f64 {
        self.r.sqrt()
    }

    /// `R^{1-σ}`, the temporal support.
    pub fn time_scale(&self) -> f64 {
        self.r.powf(1.0 - self.sigma)
    }

    pub fn spatial_power(&self) -> f64 {
        self.n as f64 + 2.0 * self.sigma
    }

    pub fn eval(&self, x_norm: f64, t: f64) -> ScaledValues {
        let y = x_norm / self.space_scale();
        let s = t / self.time_scale();
        let k = self.spatial_power();
        let phi_r = phi(y);
        let phi_star_r = phi_star(y);
        let eta_r = eta(s);
        let eta_star_r = eta_star(s);
        ScaledValues {
            phi_r,
            phi_star_r,
            eta_r,
            eta_star_r,
            big_phi: phi_power(y, k) * eta_r.powf(self.nu + 2.0),
            big_phi1: if y < 1.0 { 0.0 } else { phi_power(y, k + 2.0) } * eta_r.powf(self.nu),
            big_phi2: phi_power(y, k) * eta_star_r.powf(self.nu),
        }
    }
}

use std::f64::consts::PI;

use statrs::function::gamma::gamma;

use super::profile::{phi_power, phi_power_derivatives};
use crate::error::{Error, Result};
use crate::quadrature::Integrator;

/// A radial function `f(|x|)` with its first two radial derivatives.
pub trait RadialProfile: Sync {
    fn value(&self, r: f64) -> f64;
    /// `(f'(r), f''(r))`.
    fn derivatives(&self, r: f64) -> (f64, f64);
    /// Length over which the profile varies.
    fn scale(&self) -> f64;
    /// `Some((A, k))` when `f(r) ~ A r^{-k}` for large `r`; `None` for faster decay.
    fn decay(&self) -> Option<(f64, f64)>;
}

/// `φ(r / scale)^power`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiPower {
    pub power: f64,
    pub scale: f64,
}

impl RadialProfile for PhiPower {
    fn value(&self, r: f64) -> f64 {
        phi_power(r / self.scale, self.power)
    }
    fn derivatives(&self, r: f64) -> (f64, f64) {
        let (g1, g2) = phi_power_derivatives(r / self.scale, self.power);
        (g1 / self.scale, g2 / (self.scale * self.scale))
    }
    fn scale(&self) -> f64 {
        self.scale
    }
    fn decay(&self) -> Option<(f64, f64)> {
        // φ(r/L)^k ~ (r/L)^{-k}.
        Some((self.scale.powf(self.power), self.power))
    }
}

/// `exp(-r^2 / width^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub width: f64,
}

impl RadialProfile for Gaussian {
    fn value(&self, r: f64) -> f64 {
        (-(r / self.width).powi(2)).exp()
    }
    fn derivatives(&self, r: f64) -> (f64, f64) {
        let w2 = self.width * self.width;
        let e = self.value(r);
        (-2.0 * r / w2 * e, (4.0 * r * r / (w2 * w2) - 2.0 / w2) * e)
    }
    fn scale(&self) -> f64 {
        self.width
    }
    fn decay(&self) -> Option<(f64, f64)> {
        None
    }
}

/// `f ≡ value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantProfile {
    pub value: f64,
}

impl RadialProfile for ConstantProfile {
    fn value(&self, _: f64) -> f64 {
        self.value
    }
    fn derivatives(&self, _: f64) -> (f64, f64) {
        (0.0, 0.0)
    }
    fn scale(&self) -> f64 {
        1.0
    }
    fn decay(&self) -> Option<(f64, f64)> {
        Some((self.value, 0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FracLapControls {
    /// Relative tolerance of every shell integral.
    pub rel_tol: f64,
    /// Radius of the inner ball, as a fraction of the profile scale.
    pub inner_fraction: f64,
    /// Outer radius as a multiple of `|x| + scale`.
    pub outer_factor: f64,
}

impl Default for FracLapControls {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            inner_fraction: 1e-3,
            outer_factor: 1e5,
        }
    }
}

/// `C_{n,s} = 4^s Γ(n/2 + s) / (π^{n/2} |Γ(-s)|)`.
pub fn normalization_constant(n: u32, s: f64) -> f64 {
    let nh = n as f64 / 2.0;
    4f64.powf(s) * gamma(nh + s) / (PI.powf(nh) * gamma(-s).abs())
}

fn sphere_area(n: u32) -> f64 {
    if n == 1 {
        2.0
    } else {
        2.0 * PI
    }
}

/// `(-Δ)^s f(x)` for a radial `f`, from the second-difference singular integral
/// `-(C_{n,s}/2) ∫ (f(x+y) + f(x-y) - 2 f(x)) / |y|^{n+2s} dy`.
///
/// The ball `|y| < ρ_in` uses the Taylor expansion `f(x+y)+f(x-y)-2f(x) ≈ yᵀ H y`, whose
/// angular mean is `|y|^2 Δf / n`. Dyadic shells cover `[ρ_in, ρ_out]`, each integrated
/// adaptively in `|y|` with an inner adaptive angular integral for `n = 2`. Beyond `ρ_out`
/// the `-2f(x)` part is integrated exactly and the shifted terms use `f(r) ≈ A r^{-k}`.
pub fn fractional_laplacian_direct(
    f: &dyn RadialProfile,
    n: u32,
    s: f64,
    x: f64,
    controls: &FracLapControls,
) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::domain(format!("s must lie in (0, 1), got {s}")));
    }
    if !(n == 1 || n == 2) {
        return Err(Error::domain(format!("dimension must be 1 or 2, got {n}")));
    }
    let x = x.abs();
    if !x.is_finite() {
        return Err(Error::domain("evaluation point must be finite"));
    }
    if let Some((_, k)) = f.decay() {
        if k <= -2.0 * s {
            return Err(Error::domain(format!(
                "profile grows like r^{}, so the integral diverges for s = {s}",
                -k
            )));
        }
    }
    let scale = f.scale();
    let area = sphere_area(n);
    let fx = f.value(x);

    // Inner ball.
    let (d1, d2) = f.derivatives(x);
    let lap = if x == 0.0 {
        n as f64 * d2
    } else {
        d2 + (n as f64 - 1.0) * d1 / x
    };
    let rho_in = controls.inner_fraction * scale;
    let mut total = area * lap / n as f64 * rho_in.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s);

    // Shells.
    let second_difference = |rho: f64, c: f64| -> f64 {
        let base = x * x + rho * rho;
        let plus = (base + 2.0 * x * rho * c).max(0.0).sqrt();
        let minus = (base - 2.0 * x * rho * c).max(0.0).sqrt();
        f.value(plus) + f.value(minus) - 2.0 * fx
    };
    let fmax = f.value(0.0).abs().max(fx.abs()).max(f64::MIN_POSITIVE);
    // Second differences carry rounding noise of a few ulps of `fmax`; tolerances below that
    // cannot be met.
    let noise = 1e2 * f64::EPSILON * fmax;
    let angular = Integrator {
        abs_tol: noise,
        rel_tol: controls.rel_tol,
        max_subdivisions: 2000,
    };
    let angular_integral = |rho: f64| -> Result<f64> {
        if n == 1 || x == 0.0 {
            Ok(area * second_difference(rho, 1.0))
        } else {
            // D(ρ, θ) = D(ρ, π - θ) = D(ρ, -θ), so the circle reduces to a quarter.
            let est = angular.integrate(|th| second_difference(rho, th.cos()), 0.0, PI / 2.0)?;
            Ok(4.0 * est.value)
        }
    };
    let radial = |lo: f64| Integrator {
        abs_tol: 10.0 * noise * lo.powf(-2.0 * s),
        rel_tol: controls.rel_tol,
        max_subdivisions: 2000,
    };
    let rho_out = controls.outer_factor * (x + scale);
    let mut lo = rho_in;
    while lo < rho_out {
        let hi = (2.0 * lo).min(rho_out);
        let mut err = None;
        let est = radial(lo).integrate(
            |rho| match angular_integral(rho) {
                Ok(a) => a * rho.powf(-1.0 - 2.0 * s),
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            },
            lo,
            hi,
        )?;
        if let Some(e) = err {
            return Err(Error::Quadrature(format!("angular integral failed: {e}")));
        }
        total += est.value;
        lo = hi;
    }

    // Tail.
    total -= 2.0 * fx * area * rho_out.powf(-2.0 * s) / (2.0 * s);
    if let Some((a, k)) = f.decay() {
        total += 2.0 * area * a * rho_out.powf(-k - 2.0 * s) / (k + 2.0 * s);
    }
    Ok(-0.5 * normalization_constant(n, s) * total)
}

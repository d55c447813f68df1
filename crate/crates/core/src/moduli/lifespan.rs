use serde::{Deserialize, Serialize};

use super::criticality::critical_integral;
use super::curve::SystemParams;
use super::family::{ModulusFamily, ModulusSpec};
use crate::error::{Error, Result};
use crate::quadrature::Integrator;

pub const DEFAULT_R0: f64 = 10.0;
pub const DEFAULT_C_SCALE: f64 = 1.0;

// Upper end of the bracket search for the inverse.
const R_MAX: f64 = 1e300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExponentKind {
    Equal,
    Unequal,
}

/// Constants of the lifespan scaling function `psi` and the exponent of `1/eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LifespanModel {
    pub r0: f64,
    pub c_scale: f64,
    pub kind: ExponentKind,
    pub alpha_life: f64,
}

impl LifespanModel {
    pub fn new(sys: &SystemParams, r0: f64, c_scale: f64) -> Result<Self> {
        if !(r0.is_finite() && r0 > 0.0) {
            return Err(Error::domain(format!("R0 must be positive, got {r0}")));
        }
        if !(c_scale.is_finite() && c_scale > 0.0) {
            return Err(Error::domain(format!("C_scale must be positive, got {c_scale}")));
        }
        let (p, q) = (sys.p_star(), sys.q_star());
        let (kind, alpha_life) = if p == q {
            (ExponentKind::Equal, p - 1.0)
        } else {
            (ExponentKind::Unequal, q * (p * q - 1.0) / (q + 1.0))
        };
        Ok(Self {
            r0,
            c_scale,
            kind,
            alpha_life,
        })
    }

    pub fn with_defaults(sys: &SystemParams) -> Result<Self> {
        Self::new(sys, DEFAULT_R0, DEFAULT_C_SCALE)
    }
}

/// `mu1^(q/(q+1)) mu2^(1/(q+1))` and the log-scale integrals built from it.
#[derive(Debug, Clone, Copy)]
struct Mixed<'a> {
    mu1: &'a ModulusSpec,
    mu2: &'a ModulusSpec,
    a: f64,
    b: f64,
}

impl<'a> Mixed<'a> {
    fn new(mu1: &'a ModulusSpec, mu2: &'a ModulusSpec, q: f64) -> Self {
        Self {
            mu1,
            mu2,
            a: q / (q + 1.0),
            b: 1.0 / (q + 1.0),
        }
    }

    fn at(&self, s: f64) -> f64 {
        let m1 = self.mu1.eval(s).unwrap_or(0.0);
        let m2 = self.mu2.eval(s).unwrap_or(0.0);
        m1.powf(self.a) * m2.powf(self.b)
    }

    /// `int_{x0}^{x1} F(scale exp(-rate x)) dx` with `x0 <= x1`.
    fn log_scale_integral(&self, scale: f64, rate: f64, x0: f64, x1: f64) -> Result<f64> {
        if x1 <= x0 {
            return Ok(0.0);
        }
        // Split where the argument crosses either cutoff; each piece has a single regime.
        let mut cuts = vec![x0, x1];
        for c in [self.mu1.cutoff(), self.mu2.cutoff()] {
            let x = (scale / c).ln() / rate;
            if x > x0 && x < x1 {
                cuts.push(x);
            }
        }
        cuts.sort_by(f64::total_cmp);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            total += self.piece(scale, rate, w[0], w[1])?;
        }
        Ok(total)
    }

    fn piece(&self, scale: f64, rate: f64, x0: f64, x1: f64) -> Result<f64> {
        if x1 <= x0 {
            return Ok(0.0);
        }
        let s_mid = scale * (-rate * 0.5 * (x0 + x1)).exp();
        // Classify each factor on this piece: constant, (log 1/s)^-w or s^rho.
        let mut coefficient = 1.0;
        let mut w = 0.0;
        let mut rho = 0.0;
        for (mu, e) in [(self.mu1, self.a), (self.mu2, self.b)] {
            let flat = s_mid >= mu.cutoff() || mu.is_constant();
            if flat {
                coefficient *= mu.eval(s_mid)?.powf(e);
                continue;
            }
            match mu.family() {
                ModulusFamily::PowerLog { alpha } => w += e * alpha,
                ModulusFamily::PurePower { delta } => rho += e * delta,
                _ => return self.quadrature(scale, rate, x0, x1),
            }
        }
        if coefficient == 0.0 {
            return Ok(0.0);
        }
        // u = log(1/s) = rate x - log(scale), du = rate dx.
        let u0 = rate * x0 - scale.ln();
        let u1 = rate * x1 - scale.ln();
        let value = match (w > 0.0, rho > 0.0) {
            (false, false) => coefficient * (x1 - x0),
            (true, false) => {
                if u0 <= 0.0 {
                    return self.quadrature(scale, rate, x0, x1);
                }
                let prim = |u: f64| {
                    if (w - 1.0).abs() < 1e-12 {
                        u.ln()
                    } else {
                        u.powf(1.0 - w) / (1.0 - w)
                    }
                };
                coefficient * (prim(u1) - prim(u0)) / rate
            }
            (false, true) => {
                coefficient * ((-rho * u0).exp() - (-rho * u1).exp()) / (rho * rate)
            }
            (true, true) => return self.quadrature(scale, rate, x0, x1),
        };
        Ok(value)
    }

    fn quadrature(&self, scale: f64, rate: f64, x0: f64, x1: f64) -> Result<f64> {
        Ok(Integrator::with_rel_tol(1e-13)
            .integrate(|x| self.at(scale * (-rate * x).exp()), x0, x1)?
            .value)
    }
}

fn kappa(sys: &SystemParams) -> f64 {
    sys.n() as f64 / 2.0 - sys.sigma()
}

/// `psi(R) = int_{R0}^{R} r^-1 F(C r^(sigma - n/2)) dr`.
pub fn psi(
    r: f64,
    model: &LifespanModel,
    sys: &SystemParams,
    mu1: &ModulusSpec,
    mu2: &ModulusSpec,
) -> Result<f64> {
    if !(r >= model.r0) || !r.is_finite() {
        return Err(Error::domain(format!("psi needs R >= R0 = {}, got {r}", model.r0)));
    }
    Mixed::new(mu1, mu2, sys.q_star()).log_scale_integral(
        model.c_scale,
        kappa(sys),
        model.r0.ln(),
        r.ln(),
    )
}

/// Inverse of [`psi`] by bracket doubling in `log R` and bisection.
pub fn psi_inverse(
    y: f64,
    model: &LifespanModel,
    sys: &SystemParams,
    mu1: &ModulusSpec,
    mu2: &ModulusSpec,
) -> Result<f64> {
    if !(y >= 0.0) || !y.is_finite() {
        return Err(Error::domain(format!("psi inverse needs finite y >= 0, got {y}")));
    }
    if y == 0.0 {
        return Ok(model.r0);
    }
    let mixed = Mixed::new(mu1, mu2, sys.q_star());
    let (scale, rate) = (model.c_scale, kappa(sys));
    if mu1.is_constant() && mu2.is_constant() {
        let f = mixed.at(1.0);
        if f > 0.0 {
            let x = model.r0.ln() + y / f;
            if x <= R_MAX.ln() {
                return Ok(x.exp());
            }
        }
        return Err(Error::Convergence(format!("psi never reaches {y} below R = {R_MAX:e}")));
    }
    let x_max = R_MAX.ln();
    let mut lo = model.r0.ln();
    let mut psi_lo = 0.0;
    let mut step = std::f64::consts::LN_2;
    let (mut hi, mut psi_hi);
    loop {
        hi = (lo + step).min(x_max);
        psi_hi = psi_lo + mixed.log_scale_integral(scale, rate, lo, hi)?;
        if psi_hi >= y {
            break;
        }
        if hi >= x_max {
            return Err(Error::Convergence(format!(
                "psi stays below {y} up to R = {R_MAX:e} (reached {psi_hi:e})"
            )));
        }
        lo = hi;
        psi_lo = psi_hi;
        step *= 2.0;
    }
    while hi - lo > 1e-13 * hi.abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let psi_mid = psi_lo + mixed.log_scale_integral(scale, rate, lo, mid)?;
        if psi_mid < y {
            lo = mid;
            psi_lo = psi_mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// `(psi^-1(C eps^-alpha_life))^(1 - sigma)`.
pub fn lifespan_bound(
    eps: f64,
    model: &LifespanModel,
    sys: &SystemParams,
    mu1: &ModulusSpec,
    mu2: &ModulusSpec,
    c: f64,
) -> Result<f64> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::domain(format!("eps must lie in (0, 1], got {eps}")));
    }
    if !(c >= 0.0) {
        return Err(Error::domain(format!("C must be nonnegative, got {c}")));
    }
    let y = c * eps.powf(-model.alpha_life);
    let r = psi_inverse(y, model, sys, mu1, mu2)?;
    Ok(r.powf(1.0 - sys.sigma()))
}

/// Time exponent inside the accumulated scaling function and the weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeExponent {
    Gamma(f64),
    /// `(n - 2 sigma) / (2 (1 - sigma))`.
    Refined,
}

impl TimeExponent {
    fn value(&self, sys: &SystemParams) -> f64 {
        match *self {
            TimeExponent::Gamma(g) => g,
            TimeExponent::Refined => kappa(sys) / (1.0 - sys.sigma()),
        }
    }
}

/// `Psi(t) = int_0^t (1+tau)^-1 F(C1 (1+tau)^-gamma) dtau`.
pub fn psi_accumulated(
    t: f64,
    exponent: TimeExponent,
    sys: &SystemParams,
    mu1: &ModulusSpec,
    mu2: &ModulusSpec,
    c1: f64,
) -> Result<f64> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("t must be finite and >= 0, got {t}")));
    }
    if !(c1 > 0.0) {
        return Err(Error::domain(format!("C1 must be positive, got {c1}")));
    }
    let gamma = exponent.value(sys);
    if !(gamma > 0.0) {
        return Err(Error::domain(format!("time exponent must be positive, got {gamma}")));
    }
    Mixed::new(mu1, mu2, sys.q_star()).log_scale_integral(c1, gamma, 0.0, t.ln_1p())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum EllVariant {
    /// `(mu1/mu2)^(1/(q+1))` at `scale (1+t)^-gamma`, or 1 when both `int mu_j/s` converge.
    GammaSmall { gamma: f64, scale: f64 },
    /// `mu1(scale (1+t)^-(1+q)/((1-sigma)(pq-1)))`.
    Refined { scale: f64 },
}

/// The weight `l(t)` with its branch decided once up front.
#[derive(Debug, Clone)]
pub struct EllWeight {
    mu1: ModulusSpec,
    mu2: ModulusSpec,
    q: f64,
    exponent: f64,
    scale: f64,
    form: EllForm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum EllForm {
    One,
    Ratio,
    Refined,
}

impl EllWeight {
    pub fn new(
        sys: &SystemParams,
        mu1: &ModulusSpec,
        mu2: &ModulusSpec,
        variant: EllVariant,
    ) -> Result<Self> {
        let (exponent, scale, form) = match variant {
            EllVariant::GammaSmall { gamma, scale } => {
                if !(gamma > 0.0) {
                    return Err(Error::domain(format!("gamma must be positive, got {gamma}")));
                }
                let c = mu1.cutoff().min(mu2.cutoff());
                let q = sys.q_star();
                let both_finite = !critical_integral(mu1, mu1, q, c)?.diverges()
                    && !critical_integral(mu2, mu2, q, c)?.diverges();
                let form = if both_finite { EllForm::One } else { EllForm::Ratio };
                (gamma, scale, form)
            }
            EllVariant::Refined { scale } => (sys.refined_exponent(), scale, EllForm::Refined),
        };
        if !(scale > 0.0) {
            return Err(Error::domain(format!("weight scale must be positive, got {scale}")));
        }
        Ok(Self {
            mu1: mu1.clone(),
            mu2: mu2.clone(),
            q: sys.q_star(),
            exponent,
            scale,
            form,
        })
    }

    pub fn at(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::domain(format!("t must be >= 0, got {t}")));
        }
        let s = self.scale * (1.0 + t).powf(-self.exponent);
        match self.form {
            EllForm::One => Ok(1.0),
            EllForm::Refined => self.mu1.eval(s),
            EllForm::Ratio => {
                let m1 = self.mu1.eval(s)?;
                let m2 = self.mu2.eval(s)?;
                if m2 == 0.0 {
                    return Err(Error::domain(format!("mu2 vanishes at s = {s:e}")));
                }
                Ok((m1 / m2).powf(1.0 / (self.q + 1.0)))
            }
        }
    }
}

pub fn ell_weight(
    t: f64,
    sys: &SystemParams,
    mu1: &ModulusSpec,
    mu2: &ModulusSpec,
    variant: EllVariant,
) -> Result<f64> {
    EllWeight::new(sys, mu1, mu2, variant)?.at(t)
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for membership of the critical curve.
pub const CURVE_TOLERANCE: f64 = 1e-12;

/// Damping order, dimension and the exponent pair `(p*, q*)` with `p* <= q*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSystem", into = "RawSystem")]
pub struct SystemParams {
    sigma: f64,
    n: u32,
    p_star: f64,
    q_star: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    sigma: f64,
    n: u32,
    p: f64,
    q: f64,
}

impl TryFrom<RawSystem> for SystemParams {
    type Error = Error;
    fn try_from(raw: RawSystem) -> Result<Self> {
        SystemParams::new(raw.sigma, raw.n, raw.p, raw.q)
    }
}

impl From<SystemParams> for RawSystem {
    fn from(sys: SystemParams) -> Self {
        RawSystem {
            sigma: sys.sigma,
            n: sys.n,
            p: sys.p_star,
            q: sys.q_star,
        }
    }
}

/// Sign of `1 - beta q*` together with `beta` itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaExponent {
    pub beta: f64,
    pub one_minus_beta_q: f64,
}

impl SystemParams {
    pub fn new(sigma: f64, n: u32, p_star: f64, q_star: f64) -> Result<Self> {
        check_sigma(sigma)?;
        if n == 0 {
            return Err(Error::domain("dimension n must be positive"));
        }
        if (n as f64) <= 2.0 * sigma {
            return Err(Error::domain(format!("need n > 2 sigma, got n = {n}, sigma = {sigma}")));
        }
        if !(p_star.is_finite() && q_star.is_finite() && p_star > 1.0 && q_star > 1.0) {
            return Err(Error::domain(format!(
                "exponents must be finite and > 1, got p = {p_star}, q = {q_star}"
            )));
        }
        if p_star > q_star {
            return Err(Error::domain(format!(
                "exponents must be ordered p <= q, got p = {p_star}, q = {q_star}"
            )));
        }
        Ok(Self {
            sigma,
            n,
            p_star,
            q_star,
        })
    }

    /// The curve point with the given `p*`.
    pub fn on_curve(sigma: f64, n: u32, p_star: f64) -> Result<Self> {
        let q = curve_q_from_p(p_star, n, sigma)?;
        Self::new(sigma, n, p_star, q)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn n(&self) -> u32 {
        self.n
    }
    pub fn p_star(&self) -> f64 {
        self.p_star
    }
    pub fn q_star(&self) -> f64 {
        self.q_star
    }

    /// `(n - 2 sigma) / 2`.
    pub fn half_gap(&self) -> f64 {
        (self.n as f64 - 2.0 * self.sigma) / 2.0
    }

    /// `(1 + q) / (pq - 1) - (n - 2 sigma) / 2`, relative to the right-hand side.
    pub fn curve_residual(&self) -> f64 {
        let (p, q) = (self.p_star, self.q_star);
        let lhs = (1.0 + q) / (p * q - 1.0);
        (lhs - self.half_gap()) / self.half_gap()
    }

    pub fn on_critical_curve(&self) -> bool {
        self.curve_residual().abs() <= CURVE_TOLERANCE
    }

    /// `n > 4 sigma` for `sigma < 1/2`; any `n` at `sigma = 1/2`.
    pub fn satisfies_dimension_condition(&self) -> bool {
        self.sigma == 0.5 || self.n as f64 > 4.0 * self.sigma
    }

    pub fn s_shift(&self) -> f64 {
        let (p, q) = (self.p_star, self.q_star);
        (q - p) / ((1.0 - self.sigma) * (p * q - 1.0))
    }

    pub fn beta_exponent(&self) -> BetaExponent {
        let beta = (self.n as f64 - 2.0 * self.sigma) * (self.p_star - 1.0) / (2.0 * self.q_star);
        BetaExponent {
            beta,
            one_minus_beta_q: 1.0 - beta * self.q_star,
        }
    }

    /// Time exponent `(1 + q) / ((1 - sigma)(pq - 1))` of the refined weight argument.
    pub fn refined_exponent(&self) -> f64 {
        let (p, q) = (self.p_star, self.q_star);
        (1.0 + q) / ((1.0 - self.sigma) * (p * q - 1.0))
    }
}

pub(crate) fn check_sigma(sigma: f64) -> Result<()> {
    if !(0.0..=0.5).contains(&sigma) {
        return Err(Error::domain(format!("sigma must lie in [0, 1/2], got {sigma}")));
    }
    Ok(())
}

pub fn p_crit(n: u32, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    let gap = n as f64 - 2.0 * sigma;
    if gap <= 0.0 {
        return Err(Error::domain(format!("need n > 2 sigma, got n = {n}, sigma = {sigma}")));
    }
    Ok(1.0 + 2.0 / gap)
}

/// Solves `(1 + q) / (pq - 1) = d` with `d = (n - 2 sigma)/2` for `q`: `q = (1 + d) / (dp - 1)`.
pub fn curve_q_from_p(p_star: f64, n: u32, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    if !(p_star > 1.0) {
        return Err(Error::domain(format!("p must exceed 1, got {p_star}")));
    }
    let d = (n as f64 - 2.0 * sigma) / 2.0;
    if d <= 0.0 {
        return Err(Error::domain(format!("need n > 2 sigma, got n = {n}, sigma = {sigma}")));
    }
    let denom = d * p_star - 1.0;
    if denom <= 0.0 {
        return Err(Error::domain(format!(
            "p = {p_star} is too small for a curve point in n = {n}, sigma = {sigma}"
        )));
    }
    let q = (1.0 + d) / denom;
    if q < p_star * (1.0 - 1e-14) {
        return Err(Error::domain(format!(
            "curve point has q = {q} < p = {p_star}; take p <= p_crit"
        )));
    }
    // p = p_crit lands on q = p up to rounding.
    if (q - p_star).abs() <= 1e-12 * p_star {
        return Ok(p_star);
    }
    Ok(q)
}

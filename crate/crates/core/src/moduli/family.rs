use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cutoff below which a modulus formula applies.
pub const DEFAULT_CUTOFF: f64 = 0.1;

/// Smallest positive argument accepted by the logarithmic families.
pub const LOG_FAMILY_FLOOR: f64 = f64::MIN_POSITIVE;

/// Closed-form or sampled shape of a modulus of continuity near zero.
#[derive(Debug, Clone, PartialEq)]
pub enum ModulusFamily {
    /// `mu(s) = value` everywhere.
    Constant { value: f64 },
    /// `mu(s) = (log 1/s)^(-alpha)`.
    PowerLog { alpha: f64 },
    /// `mu(s) = (L1 L2 ... L_{m-1})^(-1) L_m^(-alpha)` with `L1 = log 1/s`, `L_{k+1} = log L_k`.
    IteratedLog { depth: u32, alpha: f64 },
    /// `mu(s) = s^delta`.
    PurePower { delta: f64 },
    /// Samples `(s_i, mu_i)`, interpolated piecewise linearly in log-log coordinates.
    Tabulated { s: Vec<f64>, mu: Vec<f64> },
}

/// A modulus of continuity: a family formula on `[0, cutoff]`, continued by the constant
/// `mu(cutoff)` above the cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModulus", into = "RawModulus")]
pub struct ModulusSpec {
    family: ModulusFamily,
    cutoff: f64,
}

/// Leading behaviour as `s -> 0`: `mu(s) ~ coefficient * s^power * prod_k L_k^(-logs[k])`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Asymptotics {
    pub coefficient: f64,
    pub power: f64,
    pub logs: Vec<f64>,
}

impl ModulusSpec {
    pub fn new(family: ModulusFamily, cutoff: f64) -> Result<Self> {
        let spec = Self { family, cutoff };
        spec.validate()?;
        Ok(spec)
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::new(ModulusFamily::Constant { value }, DEFAULT_CUTOFF)
    }

    pub fn power_log(alpha: f64) -> Result<Self> {
        Self::new(ModulusFamily::PowerLog { alpha }, DEFAULT_CUTOFF)
    }

    pub fn iterated_log(depth: u32, alpha: f64) -> Result<Self> {
        let cutoff = DEFAULT_CUTOFF.min(0.5 * iterated_log_ceiling(depth));
        Self::new(ModulusFamily::IteratedLog { depth, alpha }, cutoff)
    }

    pub fn pure_power(delta: f64) -> Result<Self> {
        Self::new(ModulusFamily::PurePower { delta }, DEFAULT_CUTOFF)
    }

    pub fn tabulated(s: Vec<f64>, mu: Vec<f64>) -> Result<Self> {
        let cutoff = s.last().copied().unwrap_or(DEFAULT_CUTOFF).min(1.0 - 1e-12);
        Self::new(ModulusFamily::Tabulated { s, mu }, cutoff)
    }

    pub fn with_cutoff(self, cutoff: f64) -> Result<Self> {
        Self::new(self.family, cutoff)
    }

    pub fn family(&self) -> &ModulusFamily {
        &self.family
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// Arguments in `(0, floor)` are rejected by [`Self::eval`].
    pub fn validity_floor(&self) -> f64 {
        match self.family {
            ModulusFamily::PowerLog { .. } | ModulusFamily::IteratedLog { .. } => LOG_FAMILY_FLOOR,
            _ => 0.0,
        }
    }

    /// True for `Constant(0)`, which switches a nonlinearity off.
    pub fn is_identically_zero(&self) -> bool {
        matches!(self.family, ModulusFamily::Constant { value } if value == 0.0)
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.family, ModulusFamily::Constant { .. })
    }

    fn validate(&self) -> Result<()> {
        let c = self.cutoff;
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::domain(format!("cutoff must lie in (0, 1), got {c}")));
        }
        match &self.family {
            ModulusFamily::Constant { value } => {
                if !(value.is_finite() && *value >= 0.0) {
                    return Err(Error::domain(format!(
                        "constant modulus must be finite and nonnegative, got {value}"
                    )));
                }
            }
            ModulusFamily::PowerLog { alpha } => {
                if !(alpha.is_finite() && *alpha >= 0.0) {
                    return Err(Error::domain(format!("power-log alpha must be >= 0, got {alpha}")));
                }
            }
            ModulusFamily::IteratedLog { depth, alpha } => {
                if *depth < 1 {
                    return Err(Error::domain("iterated-log depth must be at least 1"));
                }
                if !(alpha.is_finite() && *alpha > 0.0) {
                    return Err(Error::domain(format!("iterated-log alpha must be > 0, got {alpha}")));
                }
                let ceiling = iterated_log_ceiling(*depth);
                if c >= ceiling {
                    return Err(Error::domain(format!(
                        "iterated log of depth {depth} needs cutoff below {ceiling:e} so every log stays positive, got {c}"
                    )));
                }
            }
            ModulusFamily::PurePower { delta } => {
                if !(delta.is_finite() && *delta > 0.0) {
                    return Err(Error::domain(format!("pure-power delta must be > 0, got {delta}")));
                }
            }
            ModulusFamily::Tabulated { s, mu } => {
                if s.len() < 2 || s.len() != mu.len() {
                    return Err(Error::domain(
                        "tabulated modulus needs at least two (s, mu) samples of equal length",
                    ));
                }
                if s.iter().any(|&x| !(x.is_finite() && x > 0.0))
                    || mu.iter().any(|&m| !(m.is_finite() && m > 0.0))
                {
                    return Err(Error::domain("tabulated samples must be finite and positive"));
                }
                if s.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::domain("tabulated s must be strictly increasing"));
                }
                if mu.windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::domain("tabulated mu must be nondecreasing"));
                }
            }
        }
        Ok(())
    }

    /// Evaluates `mu(s)`.
    pub fn eval(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) || s.is_infinite() {
            return Err(Error::domain(format!("modulus argument must be finite and >= 0, got {s}")));
        }
        if let ModulusFamily::Constant { value } = self.family {
            return Ok(value);
        }
        if s == 0.0 {
            return Ok(0.0);
        }
        if s < self.validity_floor() {
            return Err(Error::domain(format!(
                "argument {s:e} is below the validity floor {:e}",
                self.validity_floor()
            )));
        }
        let s = s.min(self.cutoff);
        Ok(match &self.family {
            ModulusFamily::Constant { .. } => unreachable!(),
            ModulusFamily::PurePower { delta } => s.powf(*delta),
            ModulusFamily::PowerLog { alpha } => self.log_coordinate(-s.ln(), 1, *alpha)?,
            ModulusFamily::IteratedLog { depth, alpha } => {
                self.log_coordinate(-s.ln(), *depth, *alpha)?
            }
            ModulusFamily::Tabulated { s: xs, mu } => tabulated_eval(xs, mu, s),
        })
    }

    /// Evaluates `mu` at `s = exp(-u)` without forming `s`, so `u` may exceed the range of
    /// representable arguments. Only valid below the cutoff (`u >= ln(1/cutoff)`).
    pub(crate) fn eval_log_coordinate(&self, u: f64) -> Result<f64> {
        match &self.family {
            ModulusFamily::Constant { value } => Ok(*value),
            ModulusFamily::PurePower { delta } => Ok((-delta * u).exp()),
            ModulusFamily::PowerLog { alpha } => self.log_coordinate(u, 1, *alpha),
            ModulusFamily::IteratedLog { depth, alpha } => self.log_coordinate(u, *depth, *alpha),
            ModulusFamily::Tabulated { .. } => self.eval((-u).exp()),
        }
    }

    fn log_coordinate(&self, u: f64, depth: u32, alpha: f64) -> Result<f64> {
        let mut level = u;
        let mut mu = 1.0;
        for k in 1..=depth {
            if k > 1 {
                level = level.ln();
            }
            if !(level > 0.0) {
                return Err(Error::domain(format!(
                    "iterated logarithm of order {k} is not positive at log(1/s) = {u}"
                )));
            }
            mu /= if k == depth { level.powf(alpha) } else { level };
        }
        Ok(mu)
    }

    /// Derivative of order 1 or 2 on the open interval `(0, cutoff)`.
    pub fn derivative(&self, s: f64, order: u8) -> Result<f64> {
        if !(order == 1 || order == 2) {
            return Err(Error::domain(format!("derivative order must be 1 or 2, got {order}")));
        }
        if !(s > 0.0 && s < self.cutoff) {
            return Err(Error::domain(format!(
                "derivative needs s in (0, {}), got {s}",
                self.cutoff
            )));
        }
        if s < self.validity_floor() {
            return Err(Error::domain(format!("argument {s:e} is below the validity floor")));
        }
        Ok(match &self.family {
            ModulusFamily::Constant { .. } => 0.0,
            ModulusFamily::PurePower { delta } => {
                if order == 1 {
                    delta * s.powf(delta - 1.0)
                } else {
                    delta * (delta - 1.0) * s.powf(delta - 2.0)
                }
            }
            ModulusFamily::PowerLog { alpha } => iterated_log_derivative(s, 1, *alpha, order),
            ModulusFamily::IteratedLog { depth, alpha } => {
                iterated_log_derivative(s, *depth, *alpha, order)
            }
            ModulusFamily::Tabulated { .. } => {
                let h = s * 1e-5;
                let up = self.eval(s + h)?;
                let down = self.eval(s - h)?;
                if order == 1 {
                    (up - down) / (2.0 * h)
                } else {
                    (up - 2.0 * self.eval(s)? + down) / (h * h)
                }
            }
        })
    }

    pub(crate) fn asymptotics(&self) -> Option<Asymptotics> {
        match &self.family {
            ModulusFamily::Constant { value } => Some(Asymptotics {
                coefficient: *value,
                power: 0.0,
                logs: Vec::new(),
            }),
            ModulusFamily::PowerLog { alpha } => Some(Asymptotics {
                coefficient: 1.0,
                power: 0.0,
                logs: vec![*alpha],
            }),
            ModulusFamily::IteratedLog { depth, alpha } => {
                let mut logs = vec![1.0; *depth as usize];
                logs[*depth as usize - 1] = *alpha;
                Some(Asymptotics {
                    coefficient: 1.0,
                    power: 0.0,
                    logs,
                })
            }
            ModulusFamily::PurePower { delta } => Some(Asymptotics {
                coefficient: 1.0,
                power: *delta,
                logs: Vec::new(),
            }),
            ModulusFamily::Tabulated { .. } => None,
        }
    }
}

/// Largest `s` at which all `depth` iterated logarithms of `1/s` are positive.
pub fn iterated_log_ceiling(depth: u32) -> f64 {
    // L_depth(s) > 0  <=>  L_{depth-1}(s) > 1  <=>  ...  <=>  log(1/s) > exp^(depth-2)(1).
    let mut threshold = 0.0_f64;
    for _ in 1..depth {
        threshold = threshold.exp();
    }
    (-threshold).exp()
}

fn iterated_log_derivative(s: f64, depth: u32, alpha: f64, order: u8) -> f64 {
    // mu = exp(g), g = -sum_k w_k ln L_k. With Q_k = 1/(s L_1 ... L_k):
    //   g' = sum_k w_k Q_k,  Q_k' = Q_k (-1/s + sum_{j<=k} Q_j).
    let mut levels = Vec::with_capacity(depth as usize);
    let mut level = -s.ln();
    for k in 0..depth {
        if k > 0 {
            level = level.ln();
        }
        levels.push(level);
    }
    let mut log_mu = 0.0;
    let mut q = 1.0 / s;
    let mut q_sum = 0.0;
    let mut g1 = 0.0;
    let mut g2 = 0.0;
    for (k, &l) in levels.iter().enumerate() {
        let w = if k + 1 == depth as usize { alpha } else { 1.0 };
        log_mu -= w * l.ln();
        q /= l;
        q_sum += q;
        g1 += w * q;
        g2 += w * q * (-1.0 / s + q_sum);
    }
    let mu = log_mu.exp();
    if order == 1 {
        mu * g1
    } else {
        mu * (g2 + g1 * g1)
    }
}

fn tabulated_eval(xs: &[f64], mu: &[f64], s: f64) -> f64 {
    let last = xs.len() - 1;
    if s >= xs[last] {
        return mu[last];
    }
    if s <= xs[0] {
        // Power-law continuation toward zero with the first segment's log-log slope.
        let slope = (mu[1] / mu[0]).ln() / (xs[1] / xs[0]).ln();
        return mu[0] * (s / xs[0]).powf(slope);
    }
    let i = xs.partition_point(|&x| x <= s) - 1;
    let t = (s / xs[i]).ln() / (xs[i + 1] / xs[i]).ln();
    (mu[i].ln() * (1.0 - t) + mu[i + 1].ln() * t).exp()
}

// Serialized form: the family tag, its parameters and an optional cutoff.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
enum RawModulus {
    Constant {
        value: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cutoff: Option<f64>,
    },
    PowerLog {
        alpha: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cutoff: Option<f64>,
    },
    IteratedLog {
        depth: u32,
        alpha: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cutoff: Option<f64>,
    },
    PurePower {
        delta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cutoff: Option<f64>,
    },
    Tabulated {
        s: Vec<f64>,
        mu: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cutoff: Option<f64>,
    },
}

impl TryFrom<RawModulus> for ModulusSpec {
    type Error = Error;

    fn try_from(raw: RawModulus) -> Result<Self> {
        let (spec, cutoff) = match raw {
            RawModulus::Constant { value, cutoff } => (Self::constant(value)?, cutoff),
            RawModulus::PowerLog { alpha, cutoff } => (Self::power_log(alpha)?, cutoff),
            RawModulus::IteratedLog {
                depth,
                alpha,
                cutoff,
            } => {
                // Validate with the caller's cutoff directly; the default may not suit the depth.
                let c = cutoff.unwrap_or(DEFAULT_CUTOFF.min(0.5 * iterated_log_ceiling(depth)));
                return Self::new(ModulusFamily::IteratedLog { depth, alpha }, c);
            }
            RawModulus::PurePower { delta, cutoff } => (Self::pure_power(delta)?, cutoff),
            RawModulus::Tabulated { s, mu, cutoff } => (Self::tabulated(s, mu)?, cutoff),
        };
        match cutoff {
            Some(c) => spec.with_cutoff(c),
            None => Ok(spec),
        }
    }
}

impl From<ModulusSpec> for RawModulus {
    fn from(spec: ModulusSpec) -> Self {
        let cutoff = Some(spec.cutoff);
        match spec.family {
            ModulusFamily::Constant { value } => RawModulus::Constant { value, cutoff },
            ModulusFamily::PowerLog { alpha } => RawModulus::PowerLog { alpha, cutoff },
            ModulusFamily::IteratedLog { depth, alpha } => RawModulus::IteratedLog {
                depth,
                alpha,
                cutoff,
            },
            ModulusFamily::PurePower { delta } => RawModulus::PurePower { delta, cutoff },
            ModulusFamily::Tabulated { s, mu } => RawModulus::Tabulated { s, mu, cutoff },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn power_log_at_inverse_e_is_one() {
        let mu = ModulusSpec::power_log(1.0).unwrap().with_cutoff(0.5).unwrap();
        assert!(close(mu.eval(E.recip()).unwrap(), 1.0, 1e-15));
    }

    #[test]
    fn power_log_alpha_two_at_e_minus_two() {
        // (log 1/s)^-2 with log 1/s = 2; high-precision reference: 0.25 exactly.
        // e^-2 lies above the default cutoff, so raise it.
        let mu = ModulusSpec::power_log(2.0).unwrap().with_cutoff(0.5).unwrap();
        assert!(close(mu.eval((-2.0_f64).exp()).unwrap(), 0.25, 1e-15));
    }

    #[test]
    fn constant_ignores_argument() {
        let mu = ModulusSpec::constant(1.0).unwrap();
        for s in [0.0, 1e-200, 0.05, 3.0, 1e9] {
            assert_eq!(mu.eval(s).unwrap(), 1.0);
        }
    }

    #[test]
    fn zero_maps_to_zero_for_non_constant_families() {
        for mu in [
            ModulusSpec::power_log(1.0).unwrap(),
            ModulusSpec::iterated_log(2, 1.0).unwrap(),
            ModulusSpec::pure_power(0.5).unwrap(),
            ModulusSpec::tabulated(vec![1e-3, 1e-2], vec![0.1, 0.2]).unwrap(),
        ] {
            assert_eq!(mu.eval(0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn constant_continuation_above_cutoff() {
        let mu = ModulusSpec::pure_power(1.0).unwrap();
        assert_eq!(mu.eval(0.5).unwrap(), mu.eval(0.1).unwrap());
        assert!(close(mu.eval(0.1).unwrap(), 0.1, 1e-15));
    }

    #[test]
    fn log_families_reject_subnormal_arguments() {
        let mu = ModulusSpec::power_log(1.0).unwrap();
        assert!(matches!(mu.eval(1e-320), Err(Error::Domain(_))));
        assert!(mu.eval(1e-300).is_ok());
        assert!(matches!(mu.eval(-1.0), Err(Error::Domain(_))));
        assert!(matches!(mu.eval(f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn iterated_log_matches_explicit_product() {
        let mu = ModulusSpec::iterated_log(3, 0.7).unwrap();
        let s: f64 = 1e-20;
        let l1 = (1.0 / s).ln();
        let l2 = l1.ln();
        let l3 = l2.ln();
        let expected = 1.0 / (l1 * l2 * l3.powf(0.7));
        assert!(close(mu.eval(s).unwrap(), expected, 1e-13));
        let log_coord = mu.eval_log_coordinate(l1).unwrap();
        assert!(close(log_coord, expected, 1e-13));
    }

    #[test]
    fn iterated_log_cutoff_must_keep_logs_positive() {
        assert!((iterated_log_ceiling(1) - 1.0).abs() < 1e-15);
        assert!((iterated_log_ceiling(2) - E.recip()).abs() < 1e-15);
        assert!((iterated_log_ceiling(3) - (-E).exp()).abs() < 1e-15);
        let err = ModulusSpec::new(ModulusFamily::IteratedLog { depth: 3, alpha: 1.0 }, 0.1);
        assert!(matches!(err, Err(Error::Domain(_))));
    }

    #[test]
    fn derivative_examples() {
        let lin = ModulusSpec::pure_power(1.0).unwrap();
        for s in [1e-8, 1e-3, 0.05] {
            assert!(close(lin.derivative(s, 1).unwrap(), 1.0, 1e-14));
        }
        assert_eq!(ModulusSpec::constant(2.0).unwrap().derivative(0.01, 1).unwrap(), 0.0);
        let pl = ModulusSpec::power_log(1.0).unwrap();
        for s in [1e-10_f64, 1e-4, 0.05] {
            let l = (1.0 / s).ln();
            let symbolic = 1.0 / (s * l * l);
            assert!(close(pl.derivative(s, 1).unwrap(), symbolic, 1e-13));
        }
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let specs = [
            ModulusSpec::power_log(1.7).unwrap(),
            ModulusSpec::iterated_log(2, 0.6).unwrap(),
            ModulusSpec::iterated_log(3, 1.3).unwrap(),
            ModulusSpec::pure_power(0.35).unwrap(),
        ];
        for mu in &specs {
            for &s in &[1e-9, 1e-5, 0.3 * mu.cutoff()] {
                let h = s * 1e-4;
                let fd1 = (mu.eval(s + h).unwrap() - mu.eval(s - h).unwrap()) / (2.0 * h);
                let fd2 = (mu.eval(s + h).unwrap() - 2.0 * mu.eval(s).unwrap()
                    + mu.eval(s - h).unwrap())
                    / (h * h);
                let d1 = mu.derivative(s, 1).unwrap();
                let d2 = mu.derivative(s, 2).unwrap();
                assert!(close(d1, fd1, 1e-6), "{mu:?} s={s} d1={d1} fd={fd1}");
                assert!((d2 - fd2).abs() <= 1e-4 * d2.abs().max(d1.abs() / s), "{mu:?} s={s} d2={d2} fd={fd2}");
            }
        }
    }

    #[test]
    fn derivative_outside_open_interval_is_domain_error() {
        let mu = ModulusSpec::power_log(1.0).unwrap();
        assert!(mu.derivative(0.0, 1).is_err());
        assert!(mu.derivative(0.1, 1).is_err());
        assert!(mu.derivative(0.01, 3).is_err());
    }

    #[test]
    fn tabulated_interpolates_in_log_log() {
        let mu = ModulusSpec::tabulated(vec![1e-4, 1e-2], vec![1e-2, 1e-1]).unwrap();
        // Geometric midpoint maps to geometric midpoint.
        assert!(close(mu.eval(1e-3).unwrap(), 10f64.powf(-1.5), 1e-12));
        // Below the table the first segment's power law continues.
        assert!(close(mu.eval(1e-6).unwrap(), 1e-3, 1e-12));
    }

    #[test]
    fn tabulated_rejects_decreasing_samples() {
        assert!(ModulusSpec::tabulated(vec![1e-3, 1e-2], vec![0.2, 0.1]).is_err());
        assert!(ModulusSpec::tabulated(vec![1e-2, 1e-3], vec![0.1, 0.2]).is_err());
    }

    #[test]
    fn config_round_trip_and_unknown_keys() {
        let doc = "family = \"power_log\"\nalpha = 1.5\ncutoff = 0.05\n";
        let mu: ModulusSpec = toml::from_str(doc).unwrap();
        assert_eq!(mu.family(), &ModulusFamily::PowerLog { alpha: 1.5 });
        assert_eq!(mu.cutoff(), 0.05);
        let back: ModulusSpec = toml::from_str(&toml::to_string(&mu).unwrap()).unwrap();
        assert_eq!(back, mu);
        let bad = "family = \"power_log\"\nalpah = 1.5\n";
        let err = toml::from_str::<ModulusSpec>(bad).unwrap_err().to_string();
        assert!(err.contains("alpah"), "{err}");
    }
}

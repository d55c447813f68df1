use serde::Serialize;

use super::curve::SystemParams;
use super::family::{Asymptotics, ModulusSpec};
use super::regularity::{check_regularity, RegularityMode, RegularityReport};
use crate::error::{Error, Result};
use crate::quadrature::Integrator;

/// Increment ratio above which successive partial integrals count as divergent.
pub const DIVERGENCE_RATIO: f64 = 0.9;

// Exponents this close to 1 are treated as exactly 1.
const UNIT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Analytic,
    Numeric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Divergence {
    Diverges { method: Method },
    Converges { value: f64, method: Method },
}

impl Divergence {
    pub fn diverges(&self) -> bool {
        matches!(self, Divergence::Diverges { .. })
    }

    pub fn method(&self) -> Method {
        match self {
            Divergence::Diverges { method } | Divergence::Converges { method, .. } => *method,
        }
    }
}

/// Decides whether `int_0^c s^-1 mu1(s)^(q/(q+1)) mu2(s)^(1/(q+1)) ds` is infinite.
pub fn critical_integral(
    mu1: &ModulusSpec,
    mu2: &ModulusSpec,
    q_star: f64,
    c: f64,
) -> Result<Divergence> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::Precondition(format!("c must lie in (0, 1), got {c}")));
    }
    if !(q_star > 1.0) {
        return Err(Error::Precondition(format!("q* must exceed 1, got {q_star}")));
    }
    let a = q_star / (q_star + 1.0);
    let b = 1.0 / (q_star + 1.0);
    match (mu1.asymptotics(), mu2.asymptotics()) {
        (Some(x1), Some(x2)) => analytic(mu1, mu2, &x1, &x2, a, b, c),
        _ => numeric(mu1, mu2, a, b, c),
    }
}

fn integrand_at_u(mu1: &ModulusSpec, mu2: &ModulusSpec, a: f64, b: f64, u: f64) -> f64 {
    let s = (-u).exp();
    let m1 = mu1.eval(s).unwrap_or(0.0);
    let m2 = mu2.eval(s).unwrap_or(0.0);
    m1.powf(a) * m2.powf(b)
}

fn analytic(
    mu1: &ModulusSpec,
    mu2: &ModulusSpec,
    x1: &Asymptotics,
    x2: &Asymptotics,
    a: f64,
    b: f64,
    c: f64,
) -> Result<Divergence> {
    let coefficient = x1.coefficient.powf(a) * x2.coefficient.powf(b);
    let power = a * x1.power + b * x2.power;
    let depth = x1.logs.len().max(x2.logs.len());
    let logs: Vec<f64> = (0..depth)
        .map(|k| a * x1.logs.get(k).copied().unwrap_or(0.0) + b * x2.logs.get(k).copied().unwrap_or(0.0))
        .collect();
    let method = Method::Analytic;
    if coefficient == 0.0 {
        return Ok(Divergence::Converges { value: 0.0, method });
    }

    // The formulas hold below both cutoffs; between that point and c the integrand is smooth.
    let inner = c.min(mu1.cutoff()).min(mu2.cutoff());
    let u_inner = -inner.ln();
    let integrator = Integrator::with_rel_tol(1e-11);
    let outer = integrator
        .integrate(|u| integrand_at_u(mu1, mu2, a, b, u), -c.ln(), u_inner)?
        .value;

    if power > 0.0 {
        // Exponential decay in u = log 1/s: integrate until the factor exp(-power u) is negligible.
        let span = 60.0 / power;
        let head = integrator.integrate(
            |u| {
                let m1 = mu1.eval_log_coordinate(u).unwrap_or(0.0);
                let m2 = mu2.eval_log_coordinate(u).unwrap_or(0.0);
                m1.powf(a) * m2.powf(b)
            },
            u_inner,
            u_inner + span,
        )?;
        return Ok(Divergence::Converges {
            value: outer + head.value,
            method,
        });
    }
    if power < 0.0 {
        return Ok(Divergence::Diverges { method });
    }

    // Pure log behaviour: find the first level whose exponent is not 1.
    let level = logs.iter().position(|&e| (e - 1.0).abs() > UNIT_TOLERANCE);
    let Some(k) = level else {
        return Ok(Divergence::Diverges { method });
    };
    let e_k = logs[k];
    if e_k < 1.0 {
        return Ok(Divergence::Diverges { method });
    }

    // Convergent. In y = L_{k+1}(s) the Jacobian cancels the unit-exponent factors, leaving
    // coefficient * y^(-e_k) * prod_{j>k} L_j^(-e_j). Substitute y = exp(x) and integrate.
    let mut y0 = u_inner;
    for _ in 0..k {
        y0 = y0.ln();
    }
    let deeper = &logs[k + 1..];
    let h = |x: f64| -> f64 {
        let y = x.exp();
        let mut log_val = (1.0 - e_k) * x;
        let mut level = y;
        for &e in deeper {
            level = level.ln();
            log_val -= e * level.ln();
        }
        coefficient * log_val.exp()
    };
    let x0 = y0.ln();
    let rate = e_k - 1.0;
    // Stop where the exponential factor has decayed by e^-40 or y nears overflow.
    let x_end = (x0 + 40.0 / rate).min(700.0).max(x0);
    let body = integrator.integrate(h, x0, x_end)?.value;
    // Tail beyond x_end, treating the deeper logs as constant.
    let tail = h(x_end) / rate;
    Ok(Divergence::Converges {
        value: outer + body + tail,
        method,
    })
}

fn numeric(mu1: &ModulusSpec, mu2: &ModulusSpec, a: f64, b: f64, c: f64) -> Result<Divergence> {
    let integrator = Integrator::with_rel_tol(1e-12);
    let u_c = -c.ln();
    // eps_k = c exp(-2^k) until eps drops below 1e-300.
    let mut ladder = vec![u_c];
    let mut k = 0;
    loop {
        let u = u_c + 2f64.powi(k);
        if u > 300.0 * std::f64::consts::LN_10 {
            break;
        }
        ladder.push(u);
        k += 1;
    }
    let mut increments = Vec::new();
    let mut total = 0.0;
    for w in ladder.windows(2) {
        let inc = integrator
            .integrate(|u| integrand_at_u(mu1, mu2, a, b, u), w[0], w[1])?
            .value;
        total += inc;
        increments.push(inc);
    }
    let ratios: Vec<f64> = increments
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
        .collect();
    let n = ratios.len();
    if n < 2 {
        return Err(Error::Inconclusive("too few ladder points".into()));
    }
    let last = ratios[n - 1];
    let prev = ratios[n - 2];
    let method = Method::Numeric;
    match (last > DIVERGENCE_RATIO, prev > DIVERGENCE_RATIO) {
        (true, true) => Ok(Divergence::Diverges { method }),
        (false, false) => {
            // Geometric extrapolation of the remaining increments.
            let tail = if last > 0.0 {
                increments[increments.len() - 1] * last / (1.0 - last)
            } else {
                0.0
            };
            Ok(Divergence::Converges {
                value: total + tail,
                method,
            })
        }
        _ => Err(Error::Inconclusive(format!(
            "increment ratios {prev:.4} and {last:.4} straddle {DIVERGENCE_RATIO}"
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    GlobalExistence,
    BlowUp,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub integral: Divergence,
    pub regularity_mu1: RegularityReport,
    pub regularity_mu2: RegularityReport,
    /// Present when `p* = q*`: whether `mu1/mu2` is weakly decreasing on the sample grid.
    pub ratio_decreasing: Option<bool>,
    pub rationale: String,
}

/// Blow-up iff the mixed critical integral diverges; requires a point on the critical curve
/// and the derivative conditions matching the verdict.
pub fn classify_system(
    sys: &SystemParams,
    mu1: &ModulusSpec,
    mu2: &ModulusSpec,
) -> Result<Classification> {
    if !sys.on_critical_curve() {
        return Err(Error::Precondition(format!(
            "(p, q) = ({}, {}) is not on the critical curve (relative residual {:e})",
            sys.p_star(),
            sys.q_star(),
            sys.curve_residual()
        )));
    }
    let c = mu1.cutoff().min(mu2.cutoff());
    let integral = critical_integral(mu1, mu2, sys.q_star(), c)?;
    let mode = if integral.diverges() {
        RegularityMode::BlowupCond
    } else {
        RegularityMode::GlobalCond
    };
    let regularity_mu1 = check_regularity(mu1, mode);
    let regularity_mu2 = check_regularity(mu2, mode);
    for (name, r) in [("mu1", &regularity_mu1), ("mu2", &regularity_mu2)] {
        if !r.passed {
            return Err(Error::Precondition(format!(
                "{name} fails the {mode:?} check (worst ratio {:e} at s = {:e}, trend {:.4})",
                r.worst_ratio, r.worst_s, r.trend_slope
            )));
        }
    }
    let ratio_decreasing = (sys.p_star() == sys.q_star()).then(|| ratio_weakly_decreasing(mu1, mu2, c));
    let (verdict, rationale) = if integral.diverges() {
        (
            Verdict::BlowUp,
            "critical integral diverges; blow-up for data with positive mean velocity".to_string(),
        )
    } else {
        let mut text = "critical integral converges; small data solutions exist globally".to_string();
        if ratio_decreasing == Some(false) {
            text.push_str(" (warning: mu1/mu2 is not decreasing on the sample grid)");
        }
        (Verdict::GlobalExistence, text)
    };
    Ok(Classification {
        verdict,
        integral,
        regularity_mu1,
        regularity_mu2,
        ratio_decreasing,
        rationale,
    })
}

fn ratio_weakly_decreasing(mu1: &ModulusSpec, mu2: &ModulusSpec, c: f64) -> bool {
    let points = 400;
    let (la, lb) = (1e-12_f64.ln(), c.ln());
    let mut prev: Option<f64> = None;
    for i in 0..points {
        let s = (la + (lb - la) * i as f64 / (points - 1) as f64).exp();
        let (Ok(m1), Ok(m2)) = (mu1.eval(s), mu2.eval(s)) else {
            return false;
        };
        if m2 == 0.0 {
            return false;
        }
        let r = m1 / m2;
        if let Some(p) = prev {
            if r > p * (1.0 + 1e-12) {
                return false;
            }
        }
        prev = Some(r);
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one() -> ModulusSpec {
        ModulusSpec::constant(1.0).unwrap()
    }

    #[test]
    fn constant_pair_diverges() {
        let d = critical_integral(&one(), &one(), 3.0, 0.1).unwrap();
        assert_eq!(d, Divergence::Diverges { method: Method::Analytic });
    }

    #[test]
    fn linear_pair_converges_to_c() {
        let lin = ModulusSpec::pure_power(1.0).unwrap();
        match critical_integral(&lin, &lin, 2.0, 0.1).unwrap() {
            Divergence::Converges { value, .. } => assert!((value - 0.1).abs() < 1e-10, "{value}"),
            d => panic!("{d:?}"),
        }
    }

    #[test]
    fn power_log_threshold() {
        for (a1, a2, q, diverges) in [(1.0, 1.0, 2.0, true), (2.0, 2.0, 2.0, false), (0.5, 2.0, 3.0, true), (1.2, 1.0, 4.0, false)] {
            let d = critical_integral(
                &ModulusSpec::power_log(a1).unwrap(),
                &ModulusSpec::power_log(a2).unwrap(),
                q,
                0.1,
            )
            .unwrap();
            assert_eq!(d.diverges(), diverges, "{a1} {a2} {q}");
        }
    }

    #[test]
    fn power_log_value_matches_closed_form() {
        // int_0^c s^-1 (log 1/s)^-2 ds = 1 / log(1/c).
        let mu = ModulusSpec::power_log(2.0).unwrap();
        match critical_integral(&mu, &mu, 3.0, 0.1).unwrap() {
            Divergence::Converges { value, .. } => {
                let exact = 1.0 / 10f64.ln();
                assert!((value - exact).abs() < 1e-8 * exact, "{value} vs {exact}");
            }
            d => panic!("{d:?}"),
        }
    }

    #[test]
    fn iterated_log_value_matches_closed_form() {
        // With mu = (L1 L2^2)^-1 the integral is 1 / L2(c).
        let mu = ModulusSpec::iterated_log(2, 2.0).unwrap();
        let c = mu.cutoff();
        match critical_integral(&mu, &mu, 2.0, c).unwrap() {
            Divergence::Converges { value, .. } => {
                let exact = 1.0 / (1.0 / c).ln().ln();
                assert!((value - exact).abs() < 1e-8 * exact, "{value} vs {exact}");
            }
            d => panic!("{d:?}"),
        }
        let borderline = ModulusSpec::iterated_log(2, 1.0).unwrap();
        assert!(critical_integral(&borderline, &borderline, 2.0, c).unwrap().diverges());
    }

    #[test]
    fn zero_modulus_converges_to_zero() {
        let zero = ModulusSpec::constant(0.0).unwrap();
        let d = critical_integral(&zero, &one(), 2.0, 0.1).unwrap();
        assert_eq!(d, Divergence::Converges { value: 0.0, method: Method::Analytic });
    }

    #[test]
    fn numeric_path_agrees_with_analytic_on_tabulated_power_law() {
        // mu(s) = s^0.5 sampled exactly; power-law continuation makes it exact below the table.
        let s: Vec<f64> = (0..=20).map(|k| 1e-6 * 10f64.powf(k as f64 * 0.25)).collect();
        let mu: Vec<f64> = s.iter().map(|x| x.sqrt()).collect();
        let tab = ModulusSpec::tabulated(s, mu).unwrap();
        match critical_integral(&tab, &tab, 2.0, 0.1).unwrap() {
            Divergence::Converges { value, method } => {
                assert_eq!(method, Method::Numeric);
                let exact = 2.0 * 0.1f64.sqrt();
                assert!((value - exact).abs() < 1e-6, "{value}");
            }
            d => panic!("{d:?}"),
        }
    }

    #[test]
    fn numeric_path_detects_divergence() {
        let tab = ModulusSpec::tabulated(vec![1e-3, 1e-1], vec![0.5, 0.5]).unwrap();
        let d = critical_integral(&tab, &tab, 2.0, 0.1).unwrap();
        assert_eq!(d, Divergence::Diverges { method: Method::Numeric });
    }

    #[test]
    fn independent_quadrature_oracle_for_mixed_pair() {
        // In u = log 1/s the integrand is u^-w, so the integral is u0^(1-w) / (w-1).
        let (a1, a2, q) = (1.5, 3.0, 2.0);
        let w = (q * a1 + a2) / (q + 1.0);
        let u0 = 10f64.ln();
        let oracle = u0.powf(1.0 - w) / (w - 1.0);
        match critical_integral(
            &ModulusSpec::power_log(a1).unwrap(),
            &ModulusSpec::power_log(a2).unwrap(),
            q,
            0.1,
        )
        .unwrap()
        {
            Divergence::Converges { value, .. } => assert!((value - oracle).abs() < 1e-8 * oracle),
            d => panic!("{d:?}"),
        }
    }

    #[test]
    fn classify_examples() {
        let sys = SystemParams::on_curve(0.0, 1, 3.0).unwrap();
        let c = classify_system(&sys, &one(), &one()).unwrap();
        assert_eq!(c.verdict, Verdict::BlowUp);
        assert_eq!(c.ratio_decreasing, Some(true));
        let pl2 = ModulusSpec::power_log(2.0).unwrap();
        assert_eq!(classify_system(&sys, &pl2, &pl2).unwrap().verdict, Verdict::GlobalExistence);
        let pl1 = ModulusSpec::power_log(1.0).unwrap();
        assert_eq!(classify_system(&sys, &pl1, &pl1).unwrap().verdict, Verdict::BlowUp);
    }

    #[test]
    fn classify_requires_curve_point() {
        let sys = SystemParams::new(0.0, 1, 5.0, 5.0).unwrap();
        assert!(matches!(classify_system(&sys, &one(), &one()), Err(Error::Precondition(_))));
    }

    #[test]
    fn report_serializes() {
        let sys = SystemParams::on_curve(0.0, 1, 3.0).unwrap();
        let c = classify_system(&sys, &one(), &one()).unwrap();
        let text = toml::to_string(&c).unwrap();
        assert!(text.contains("verdict = \"blow_up\""), "{text}");
    }
}

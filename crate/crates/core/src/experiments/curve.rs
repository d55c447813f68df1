use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::runs::{
    decaying_over_final_decade, detected_time, end_time, final_sup, modulus_label, status_label, threshold_check,
    ModulusPair, Scenario,
};
use crate::error::{Error, Result};
use crate::moduli::{classify_system, curve_q_from_p, SystemParams, Verdict};
use crate::solver::RunStatus;

pub const FINITE_HORIZON_CAVEAT: &str =
    "a run that decays by t_max is evidence of global existence, not a proof";

/// An exponent pair; `q` defaults to the point of the critical curve above `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentPair {
    pub p: f64,
    #[serde(default)]
    pub q: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveConfig {
    pub sigma: f64,
    pub eps: f64,
    pub scenario: Scenario,
    pub exponents: Vec<ExponentPair>,
    pub moduli: Vec<ModulusPair>,
    /// Detected blow-ups are repeated with the threshold raised by this factor.
    #[serde(default = "default_factor")]
    pub threshold_factor: f64,
}

pub(crate) fn default_factor() -> f64 {
    10.0
}

impl CurveConfig {
    pub fn systems(&self) -> Result<Vec<SystemParams>> {
        let n = self.scenario.grid.n;
        self.exponents
            .iter()
            .map(|e| {
                let q = match e.q {
                    Some(q) => q,
                    None => curve_q_from_p(e.p, n, self.sigma)?,
                };
                SystemParams::new(self.sigma, n, e.p, q)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.exponents.is_empty() || self.moduli.is_empty() {
            return Err(Error::config("curve sweep needs at least one exponent pair and one modulus pair"));
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(Error::config(format!("eps must be finite and nonnegative, got {}", self.eps)));
        }
        if !(self.threshold_factor > 1.0) {
            return Err(Error::config("threshold_factor must exceed 1"));
        }
        self.systems().map_err(|e| Error::config(e.to_string()))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvePosition {
    /// `(1 + q)/(pq - 1)` above `(n - 2σ)/2`: subcritical.
    Below,
    On,
    /// Supercritical.
    Above,
}

pub fn curve_position(sys: &SystemParams) -> CurvePosition {
    if sys.on_critical_curve() {
        CurvePosition::On
    } else if sys.curve_residual() > 0.0 {
        CurvePosition::Below
    } else {
        CurvePosition::Above
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub case: usize,
    pub p: f64,
    pub q: f64,
    pub mu1: String,
    pub mu2: String,
    pub position: CurvePosition,
    /// Verdict of the classifier on the curve, or the reason it gave none.
    pub analytic: String,
    pub expect_blow_up: Option<bool>,
    pub status: &'static str,
    pub t_end: f64,
    pub t_detect: Option<f64>,
    pub t_detect_high: Option<f64>,
    pub threshold_shift: Option<f64>,
    pub final_linf: f64,
    pub final_decade_decaying: bool,
    /// Whether the observed outcome matches the expectation; empty when either is unknown.
    pub agrees: Option<bool>,
    pub error: Option<String>,
}

fn analytic(sys: &SystemParams, pair: &ModulusPair) -> (String, Option<bool>) {
    match curve_position(sys) {
        CurvePosition::On => match classify_system(sys, &pair.mu1, &pair.mu2) {
            Ok(c) => match c.verdict {
                Verdict::BlowUp => ("blow_up".into(), Some(true)),
                Verdict::GlobalExistence => ("global_existence".into(), Some(false)),
            },
            Err(e) => (format!("unclassified: {e}"), None),
        },
        CurvePosition::Below => ("subcritical".into(), Some(true)),
        CurvePosition::Above => ("supercritical".into(), Some(false)),
    }
}

/// Runs every (exponent pair, modulus pair) combination at amplitude `eps`.
///
/// An observed blow-up is a detected one; an observed global solution is a run that reached
/// `t_max` with the supremum decaying over the last decade. Anything else leaves `agrees`
/// empty.
pub fn curve_sweep(cfg: &CurveConfig) -> Result<Vec<CurveRow>> {
    cfg.validate()?;
    let systems = cfg.systems()?;
    let cases: Vec<(SystemParams, &ModulusPair)> = systems
        .iter()
        .flat_map(|s| cfg.moduli.iter().map(move |m| (*s, m)))
        .collect();
    let rows = cases
        .par_iter()
        .enumerate()
        .map(|(i, &(sys, pair))| {
            let (analytic, mut expect) = analytic(&sys, pair);
            if cfg.eps == 0.0 {
                // The zero solution is global whatever the exponents.
                expect = Some(false);
            }
            let mut row = CurveRow {
                case: i,
                p: sys.p_star(),
                q: sys.q_star(),
                mu1: modulus_label(&pair.mu1),
                mu2: modulus_label(&pair.mu2),
                position: curve_position(&sys),
                analytic,
                expect_blow_up: expect,
                status: "error",
                t_end: f64::NAN,
                t_detect: None,
                t_detect_high: None,
                threshold_shift: None,
                final_linf: f64::NAN,
                final_decade_decaying: false,
                agrees: None,
                error: None,
            };
            let outcome = cfg.scenario.run(sys, pair, cfg.eps, None).and_then(|out| {
                let check = threshold_check(&cfg.scenario, sys, pair, cfg.eps, &out, cfg.threshold_factor)?;
                Ok((out, check))
            });
            match outcome {
                Ok((out, check)) => {
                    row.status = status_label(&out.status);
                    row.t_end = end_time(&out);
                    row.t_detect = detected_time(&out.status);
                    row.t_detect_high = check.and_then(|c| c.t_detect_high);
                    row.threshold_shift = check.and_then(|c| c.shift);
                    row.final_linf = final_sup(&out.history);
                    row.final_decade_decaying = decaying_over_final_decade(&out.history);
                    let observed = match out.status {
                        RunStatus::BlowUp { .. } => Some(true),
                        RunStatus::ReachedTmax if row.final_decade_decaying || row.final_linf == 0.0 => Some(false),
                        _ => None,
                    };
                    row.agrees = expect.zip(observed).map(|(e, o)| e == o);
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            row
        })
        .collect();
    Ok(rows)
}

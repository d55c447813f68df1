use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::curve::default_factor;
use super::runs::{end_time, status_label, threshold_check, ModulusPair, Scenario, ThresholdCheck};
use crate::error::{Error, Result};
use crate::fit::{fit_line_min, FitResult};
use crate::moduli::{lifespan_bound, LifespanModel, ModulusSpec, SystemParams, DEFAULT_C_SCALE, DEFAULT_R0};
use crate::solver::RunStatus;

/// Smallest `R²` of the transformed fit counted as linear.
pub const MIN_R_SQUARED: f64 = 0.9;

pub const MIN_LADDER: usize = 4;

pub const SHAPE_CAVEAT: &str = "lifespans grow exponentially as eps decreases, so the full asymptotic law \
cannot be reached at desk scale; censored runs plus a shape fit stand in for it";

/// Constants of the analytic lifespan column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundConstants {
    pub r0: f64,
    pub c_scale: f64,
    /// Multiplier of `eps^{-α}` inside `ψ^{-1}`.
    pub c: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        Self {
            r0: DEFAULT_R0,
            c_scale: DEFAULT_C_SCALE,
            c: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LifespanConfig {
    pub system: SystemParams,
    pub mu1: ModulusSpec,
    pub mu2: ModulusSpec,
    pub scenario: Scenario,
    /// Geometric ladder of amplitudes, at least four.
    pub eps: Vec<f64>,
    #[serde(default = "default_factor")]
    pub threshold_factor: f64,
    #[serde(default)]
    pub bound: BoundConstants,
}

impl LifespanConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if !self.system.on_critical_curve() {
            return Err(Error::config(format!(
                "lifespan sweep needs (p, q) on the critical curve; relative residual {:e}",
                self.system.curve_residual()
            )));
        }
        if self.system.n() != self.scenario.grid.n {
            return Err(Error::config("system and grid dimensions differ"));
        }
        if self.eps.len() < MIN_LADDER {
            return Err(Error::config(format!(
                "eps ladder needs at least {MIN_LADDER} points, got {}",
                self.eps.len()
            )));
        }
        if self.eps.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
            return Err(Error::config("every eps must lie in (0, 1]"));
        }
        let ratio = self.eps[1] / self.eps[0];
        if ratio == 1.0 || self.eps.windows(2).any(|w| ((w[1] / w[0]) / ratio - 1.0).abs() > 1e-9) {
            return Err(Error::config("eps ladder must be geometric with a ratio other than 1"));
        }
        if !(self.threshold_factor > 1.0) {
            return Err(Error::config("threshold_factor must exceed 1"));
        }
        LifespanModel::new(&self.system, self.bound.r0, self.bound.c_scale).map_err(|e| Error::config(e.to_string()))?;
        Ok(())
    }

    fn pair(&self) -> ModulusPair {
        ModulusPair {
            mu1: self.mu1.clone(),
            mu2: self.mu2.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LifespanRow {
    pub eps: f64,
    pub status: &'static str,
    /// Detection time, or the stopping time as a lower bound when censored.
    pub t_detect: f64,
    pub censored: bool,
    pub t_detect_high: Option<f64>,
    pub threshold_shift: Option<f64>,
    /// `eps^{-α}` with `α` the lifespan exponent of the system.
    pub x: f64,
    /// `log T^{1/(1-σ)}`.
    pub y: f64,
    pub lifespan_bound: Option<f64>,
    pub accepted_steps: u64,
    pub rejected_steps: u64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LifespanReport {
    /// Rows sorted by decreasing `eps`.
    pub rows: Vec<LifespanRow>,
    /// Fit of `y` against `x` over uncensored rows; absent below three of them.
    pub fit: Option<FitResult>,
    pub uncensored: usize,
    /// `T_detect` strictly increases as `eps` decreases over uncensored rows.
    pub monotone: bool,
    pub slope_positive: bool,
    pub linear: bool,
    /// Every uncensored detection moved by less than 5% under the raised threshold.
    pub threshold_robust: bool,
    pub passed: bool,
}

fn run_one(cfg: &LifespanConfig, model: &LifespanModel, eps: f64) -> LifespanRow {
    let sys = cfg.system;
    let alpha = model.alpha_life;
    let bound = lifespan_bound(eps, model, &sys, &cfg.mu1, &cfg.mu2, cfg.bound.c).ok();
    let mut row = LifespanRow {
        eps,
        status: "error",
        t_detect: f64::NAN,
        censored: true,
        t_detect_high: None,
        threshold_shift: None,
        x: eps.powf(-alpha),
        y: f64::NAN,
        lifespan_bound: bound,
        accepted_steps: 0,
        rejected_steps: 0,
        error: None,
    };
    let pair = cfg.pair();
    let result = cfg.scenario.run(sys, &pair, eps, None).and_then(|out| {
        let check = threshold_check(&cfg.scenario, sys, &pair, eps, &out, cfg.threshold_factor)?;
        Ok((out, check))
    });
    match result {
        Ok((out, check)) => {
            row.status = status_label(&out.status);
            row.accepted_steps = out.diagnostics.accepted;
            row.rejected_steps = out.diagnostics.rejected;
            row.censored = !matches!(out.status, RunStatus::BlowUp { .. });
            row.t_detect = match out.status {
                RunStatus::BlowUp { t_detect } => t_detect,
                _ => end_time(&out),
            };
            row.y = row.t_detect.ln() / (1.0 - sys.sigma());
            if let Some(ThresholdCheck { t_detect_high, shift, .. }) = check {
                row.t_detect_high = t_detect_high;
                row.threshold_shift = shift;
            }
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Runs the ladder, one case per amplitude, and fits `log T^{1/(1-σ)}` against `eps^{-α}`.
pub fn lifespan_sweep(cfg: &LifespanConfig) -> Result<LifespanReport> {
    cfg.validate()?;
    let model = LifespanModel::new(&cfg.system, cfg.bound.r0, cfg.bound.c_scale)?;
    let mut rows: Vec<LifespanRow> = cfg.eps.par_iter().map(|&e| run_one(cfg, &model, e)).collect();
    rows.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    Ok(summarize(rows))
}

/// Shape checks over the uncensored rows of a ladder sorted by decreasing `eps`.
pub fn summarize(rows: Vec<LifespanRow>) -> LifespanReport {
    let good: Vec<&LifespanRow> = rows.iter().filter(|r| !r.censored && r.error.is_none()).collect();
    let monotone = good.len() >= 2 && good.windows(2).all(|w| w[1].t_detect > w[0].t_detect);
    let fit = if good.len() >= 3 {
        let x: Vec<f64> = good.iter().map(|r| r.x).collect();
        let y: Vec<f64> = good.iter().map(|r| r.y).collect();
        fit_line_min(&x, &y, 3).ok()
    } else {
        None
    };
    let slope_positive = fit.as_ref().is_some_and(|f| f.slope > 0.0);
    let linear = fit.as_ref().is_some_and(|f| f.r_squared > MIN_R_SQUARED);
    let threshold_robust = !good.is_empty()
        && good
            .iter()
            .all(|r| r.threshold_shift.is_some_and(|s| s < super::runs::THRESHOLD_SHIFT_TOLERANCE));
    let uncensored = good.len();
    LifespanReport {
        passed: monotone && slope_positive && linear && threshold_robust,
        rows,
        fit,
        uncensored,
        monotone,
        slope_positive,
        linear,
        threshold_robust,
    }
}

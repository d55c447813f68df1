use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_line, FitResult};
use crate::grid::{GridSpec, Transformer};
use crate::moduli::{ModulusSpec, SystemParams};
use crate::solver::{make_initial_data, run, InitialData, RunControls, SampleCadence, Stepper};

/// Allowed deviation of a fitted `L²` exponent from theory.
pub const L2_TOLERANCE: f64 = 0.1;
/// Allowed deviation of a fitted `L∞` exponent from theory.
pub const LINF_TOLERANCE: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayCase {
    pub sigma: f64,
    pub grid: GridSpec,
    pub data: InitialData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayConfig {
    pub t_max: f64,
    /// Samples per decade of time.
    #[serde(default = "default_per_decade")]
    pub per_decade: u32,
    pub cases: Vec<DecayCase>,
}

fn default_per_decade() -> u32 {
    10
}

impl DecayConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_max >= 10.0 && self.t_max.is_finite()) {
            return Err(Error::config(format!("t_max must be at least 10, got {}", self.t_max)));
        }
        if self.per_decade < 5 {
            return Err(Error::config("per_decade must be at least 5 so each fit sees 5 points"));
        }
        if self.cases.is_empty() {
            return Err(Error::config("decay sweep needs at least one case"));
        }
        for (i, c) in self.cases.iter().enumerate() {
            c.grid.validate().map_err(|e| Error::config(format!("case {i}: {e}")))?;
        }
        Ok(())
    }
}

/// Predicted exponents of `(1 + t)` for the linear problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayTheory {
    pub l2: f64,
    pub gradient: f64,
    pub linf: f64,
}

/// `L²`: `-n/(4(1-σ))`, `∇`: one extra `-1/(2(1-σ))`, `L∞`: `-n/(2(1-σ))`; velocity-only
/// data shift each by `+σ/(1-σ)`.
pub fn decay_theory(n: u32, sigma: f64, data: &InitialData) -> DecayTheory {
    let n = n as f64;
    let one = 1.0 - sigma;
    let shift = match data {
        InitialData::ZeroDisplacementPositiveVelocity { .. } => sigma / one,
        InitialData::GaussianBump { .. } => 0.0,
    };
    let l2 = -n / (4.0 * one) + shift;
    DecayTheory {
        l2,
        gradient: l2 - 1.0 / (2.0 * one),
        linf: -n / (2.0 * one) + shift,
    }
}

fn data_label(data: &InitialData) -> &'static str {
    match data {
        InitialData::GaussianBump { .. } => "displacement",
        InitialData::ZeroDisplacementPositiveVelocity { .. } => "velocity",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    L2,
    Gradient,
    Linf,
}

/// One fitted exponent. The gradient row carries no tolerance and is informational.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayRow {
    pub case: usize,
    pub n: u32,
    pub sigma: f64,
    pub data: &'static str,
    pub norm: NormKind,
    pub theory: f64,
    pub slope: f64,
    pub slope_stderr: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub window_lo: f64,
    pub window_hi: f64,
    pub points: usize,
    pub tolerance: Option<f64>,
    pub passed: Option<bool>,
    pub error: Option<String>,
}

impl DecayRow {
    fn failed(case: usize, c: &DecayCase, norm: NormKind, theory: f64, err: &Error) -> Self {
        DecayRow {
            case,
            n: c.grid.n,
            sigma: c.sigma,
            data: data_label(&c.data),
            norm,
            theory,
            slope: f64::NAN,
            slope_stderr: f64::NAN,
            intercept: f64::NAN,
            r_squared: f64::NAN,
            window_lo: f64::NAN,
            window_hi: f64::NAN,
            points: 0,
            tolerance: tolerance(norm),
            passed: tolerance(norm).map(|_| false),
            error: Some(err.to_string()),
        }
    }
}

fn tolerance(norm: NormKind) -> Option<f64> {
    match norm {
        NormKind::L2 => Some(L2_TOLERANCE),
        NormKind::Linf => Some(LINF_TOLERANCE),
        NormKind::Gradient => None,
    }
}

/// Fits of `log ‖u(t)‖` against `log(1 + t)` over `[t_max/10, t_max]` for one case.
pub fn decay_case(c: &DecayCase, t_max: f64, per_decade: u32) -> Result<[FitResult; 3]> {
    let n = c.grid.n;
    // The exponents (2, 2) are placeholders: both moduli vanish, so the run is linear.
    let sys = SystemParams::new(c.sigma, n, 2.0, 2.0)?;
    if !sys.satisfies_dimension_condition() {
        return Err(Error::Precondition(format!(
            "decay estimates need n > 4 sigma or sigma = 1/2, got n = {n}, sigma = {}",
            c.sigma
        )));
    }
    let zero = ModulusSpec::constant(0.0)?;
    let mut stepper = Stepper::new(&c.grid, sys, zero.clone(), zero)?;
    let ic = make_initial_data(&c.data, 1.0, &c.grid, &Transformer::new(&c.grid))?;
    let controls = RunControls {
        sample: SampleCadence::Geometric { start: 1.0, per_decade },
        blow_threshold: Some(f64::MAX),
        ..RunControls::default()
    };
    let out = run(&mut stepper, &ic, t_max, &controls)?;
    let window: Vec<_> = out.history.iter().filter(|r| r.t >= t_max / 10.0 * (1.0 - 1e-12)).collect();
    let fit = |pick: fn(&crate::solver::FieldNorms) -> f64| -> Result<FitResult> {
        let x: Vec<f64> = window.iter().map(|r| (1.0 + r.t).ln()).collect();
        let y: Vec<f64> = window.iter().map(|r| pick(&r.u).ln()).collect();
        fit_line(&x, &y)
    };
    Ok([fit(|f| f.l2)?, fit(|f| f.h1)?, fit(|f| f.linf)?])
}

/// Runs every case in parallel; failures become rows carrying the error.
pub fn decay_sweep(cfg: &DecayConfig) -> Result<Vec<DecayRow>> {
    cfg.validate()?;
    let per_case: Vec<Vec<DecayRow>> = cfg
        .cases
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let th = decay_theory(c.grid.n, c.sigma, &c.data);
            let kinds = [(NormKind::L2, th.l2), (NormKind::Gradient, th.gradient), (NormKind::Linf, th.linf)];
            match decay_case(c, cfg.t_max, cfg.per_decade) {
                Ok(fits) => kinds
                    .iter()
                    .zip(fits)
                    .map(|(&(norm, theory), f)| {
                        let tol = tolerance(norm);
                        DecayRow {
                            case: i,
                            n: c.grid.n,
                            sigma: c.sigma,
                            data: data_label(&c.data),
                            norm,
                            theory,
                            slope: f.slope,
                            slope_stderr: f.slope_stderr,
                            intercept: f.intercept,
                            r_squared: f.r_squared,
                            window_lo: f.window.0.exp() - 1.0,
                            window_hi: f.window.1.exp() - 1.0,
                            points: f.points,
                            tolerance: tol,
                            passed: tol.map(|t| (f.slope - theory).abs() <= t),
                            error: None,
                        }
                    })
                    .collect(),
                Err(e) => kinds
                    .iter()
                    .map(|&(norm, theory)| DecayRow::failed(i, c, norm, theory, &e))
                    .collect(),
            }
        })
        .collect();
    Ok(per_case.into_iter().flatten().collect())
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Transformer};
use crate::moduli::{ModulusFamily, ModulusSpec, SystemParams};
use crate::solver::{make_initial_data, run, HistoryRow, InitialData, RunControls, RunOutcome, RunStatus, Stepper};

/// Largest relative shift of `T_detect` under a raised threshold still counted as robust.
pub const THRESHOLD_SHIFT_TOLERANCE: f64 = 0.05;

/// Largest relative change of a sampled norm when the box is doubled.
pub const BOX_TOLERANCE: f64 = 0.01;

/// Heuristic smallest half-length for which a run to `t_max` should not feel the box:
/// `4 sqrt(t_max) + 10 width`.
pub fn box_l_min(t_max: f64, width: f64) -> f64 {
    4.0 * t_max.sqrt() + 10.0 * width
}

/// Comparison of a run with the same run on a box of twice the half-length and twice the
/// points, so the frequency resolution doubles and the cutoff stays put.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxCheck {
    pub half_length: f64,
    pub l_min: f64,
    /// Samples at `t` up to this horizon were compared.
    pub horizon: f64,
    pub samples: usize,
    pub max_rel_change: f64,
    pub passed: bool,
}

impl BoxCheck {
    pub fn above_l_min(&self) -> bool {
        self.half_length >= self.l_min
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulusPair {
    pub mu1: ModulusSpec,
    pub mu2: ModulusSpec,
}

/// Compact text form of a modulus for table cells.
pub fn modulus_label(spec: &ModulusSpec) -> String {
    let family = match spec.family() {
        ModulusFamily::Constant { value } => return format!("constant({value})"),
        ModulusFamily::PowerLog { alpha } => format!("power_log({alpha})"),
        ModulusFamily::IteratedLog { depth, alpha } => format!("iterated_log({depth};{alpha})"),
        ModulusFamily::PurePower { delta } => format!("pure_power({delta})"),
        ModulusFamily::Tabulated { s, .. } => format!("tabulated({} points)", s.len()),
    };
    format!("{family}@{}", spec.cutoff())
}

/// Initial data, grid and controls shared by the runs of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub grid: GridSpec,
    pub data: InitialData,
    pub t_max: f64,
    #[serde(default)]
    pub controls: RunControls,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.controls.validate()?;
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::config(format!("t_max must be positive, got {}", self.t_max)));
        }
        Ok(())
    }

    /// One run at amplitude `eps`, optionally overriding the blow-up threshold.
    pub fn run(&self, sys: SystemParams, pair: &ModulusPair, eps: f64, threshold: Option<f64>) -> Result<RunOutcome> {
        if sys.n() != self.grid.n {
            return Err(Error::config(format!(
                "system dimension {} differs from grid dimension {}",
                sys.n(),
                self.grid.n
            )));
        }
        let mut stepper = Stepper::new(&self.grid, sys, pair.mu1.clone(), pair.mu2.clone())?;
        let ic = make_initial_data(&self.data, eps, &self.grid, stepper.transformer())?;
        let mut controls = self.controls;
        if threshold.is_some() {
            controls.blow_threshold = threshold;
        }
        run(&mut stepper, &ic, self.t_max, &controls)
    }

    pub fn transformer(&self) -> Transformer {
        Transformer::new(&self.grid)
    }

    /// Reruns `first` on the doubled box and compares the norms sampled at common times.
    ///
    /// For a blow-up the comparison stops at half the earlier detection time: near the
    /// singularity a tiny shift in time changes the norms by any factor.
    pub fn box_check(&self, sys: SystemParams, pair: &ModulusPair, eps: f64, first: &RunOutcome) -> Result<BoxCheck> {
        let doubled = Scenario {
            grid: GridSpec {
                half_length: 2.0 * self.grid.half_length,
                points: 2 * self.grid.points,
                ..self.grid
            },
            ..self.clone()
        };
        let second = doubled.run(sys, pair, eps, None)?;
        let mut horizon = end_time(first).min(end_time(&second));
        if detected_time(&first.status).is_some() || detected_time(&second.status).is_some() {
            horizon *= 0.5;
        }
        let scale = first.history.iter().map(sup).fold(0.0, f64::max);
        let floor = 1e-12 * scale.max(f64::MIN_POSITIVE);
        let mut samples = 0;
        let mut worst = 0.0_f64;
        for a in first.history.iter().filter(|r| r.t <= horizon) {
            let Some(b) = second.history.iter().find(|b| (b.t - a.t).abs() <= 1e-9 * a.t.max(1.0)) else {
                continue;
            };
            samples += 1;
            let pairs = [
                (a.u.l2, b.u.l2),
                (a.u.h1, b.u.h1),
                (a.u.linf, b.u.linf),
                (a.v.l2, b.v.l2),
                (a.v.h1, b.v.h1),
                (a.v.linf, b.v.linf),
            ];
            for (x, y) in pairs {
                worst = worst.max((x - y).abs() / y.abs().max(floor));
            }
        }
        Ok(BoxCheck {
            half_length: self.grid.half_length,
            l_min: box_l_min(self.t_max, self.data.width()),
            horizon,
            samples,
            max_rel_change: worst,
            passed: samples > 0 && worst < BOX_TOLERANCE,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdCheck {
    pub threshold: f64,
    pub t_detect: f64,
    pub threshold_high: f64,
    /// `None` when the run with the raised threshold did not blow up.
    pub t_detect_high: Option<f64>,
    /// `|T_high - T| / T`.
    pub shift: Option<f64>,
}

impl ThresholdCheck {
    pub fn robust(&self) -> bool {
        self.shift.is_some_and(|s| s < THRESHOLD_SHIFT_TOLERANCE)
    }
}

pub fn detected_time(status: &RunStatus) -> Option<f64> {
    match *status {
        RunStatus::BlowUp { t_detect } => Some(t_detect),
        _ => None,
    }
}

/// Re-runs a detected blow-up with the threshold raised by `factor`.
pub fn threshold_check(
    scenario: &Scenario,
    sys: SystemParams,
    pair: &ModulusPair,
    eps: f64,
    first: &RunOutcome,
    factor: f64,
) -> Result<Option<ThresholdCheck>> {
    let Some(t_detect) = detected_time(&first.status) else {
        return Ok(None);
    };
    let threshold = first.diagnostics.blow_threshold;
    let threshold_high = threshold * factor;
    let second = scenario.run(sys, pair, eps, Some(threshold_high))?;
    let t_detect_high = detected_time(&second.status);
    Ok(Some(ThresholdCheck {
        threshold,
        t_detect,
        threshold_high,
        t_detect_high,
        shift: t_detect_high.map(|t| (t - t_detect).abs() / t_detect),
    }))
}

fn sup(row: &HistoryRow) -> f64 {
    row.u.linf.max(row.v.linf)
}

/// Whether `max(‖u‖∞, ‖v‖∞)` strictly decreases across the samples in `[t_end/10, t_end]`.
/// Needs at least three samples there.
pub fn decaying_over_final_decade(history: &[HistoryRow]) -> bool {
    let Some(last) = history.last() else {
        return false;
    };
    let tail: Vec<f64> = history
        .iter()
        .filter(|r| r.t >= last.t / 10.0)
        .map(sup)
        .collect();
    tail.len() >= 3 && tail.windows(2).all(|w| w[1] < w[0])
}

pub fn final_sup(history: &[HistoryRow]) -> f64 {
    history.last().map(sup).unwrap_or(f64::NAN)
}

pub fn status_label(status: &RunStatus) -> &'static str {
    match status {
        RunStatus::ReachedTmax => "reached_tmax",
        RunStatus::BlowUp { .. } => "blow_up",
        RunStatus::StepUnderflow { .. } => "step_underflow",
        RunStatus::Censored { .. } => "censored",
    }
}

/// Time at which the run stopped.
pub fn end_time(out: &RunOutcome) -> f64 {
    out.final_state.t
}

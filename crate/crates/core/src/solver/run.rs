use std::time::{Duration, Instant};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::norms::{max_abs, parseval, FieldNorms, Norms};
use super::state::FieldState;
use super::stepper::{Physical, Stepper};
use crate::error::{Error, Result};
use crate::kernels::point_with_rates;

/// When norms are recorded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SampleCadence {
    /// Every `interval` time units.
    Uniform { interval: f64 },
    /// `start · 10^{k/per_decade}`, plus `t = 0`.
    Geometric { start: f64, per_decade: u32 },
}

impl Default for SampleCadence {
    fn default() -> Self {
        SampleCadence::Uniform { interval: 1.0 }
    }
}

impl SampleCadence {
    /// Sample times in `(0, t_max]`, always ending at `t_max`.
    pub fn times(&self, t_max: f64) -> Vec<f64> {
        let mut out = Vec::new();
        match *self {
            SampleCadence::Uniform { interval } => {
                let mut k = 1u64;
                while (k as f64) * interval < t_max {
                    out.push(k as f64 * interval);
                    k += 1;
                }
            }
            SampleCadence::Geometric { start, per_decade } => {
                let mut k = 0i32;
                loop {
                    let t = start * 10f64.powf(k as f64 / per_decade as f64);
                    if t >= t_max {
                        break;
                    }
                    out.push(t);
                    k += 1;
                }
            }
        }
        out.push(t_max);
        out
    }

    fn validate(&self) -> Result<()> {
        match *self {
            SampleCadence::Uniform { interval } if !(interval > 0.0 && interval.is_finite()) => {
                Err(Error::config("sample interval must be positive"))
            }
            SampleCadence::Geometric { start, per_decade } if !(start > 0.0) || per_decade == 0 => {
                Err(Error::config("geometric sampling needs start > 0 and per_decade >= 1"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunControls {
    pub dt0: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Accepted relative predictor-corrector gap per step.
    pub tolerance: f64,
    /// Steps grow only while the gap stays below `safety · tolerance / 4`.
    pub safety: f64,
    /// Defaults to `1e6` times the largest initial `L∞` norm.
    pub blow_threshold: Option<f64>,
    pub sample: SampleCadence,
    /// Wall-clock budget in seconds; exceeding it censors the run.
    pub wall_clock: Option<f64>,
}

impl Default for RunControls {
    fn default() -> Self {
        Self {
            dt0: 1e-2,
            dt_min: 1e-10,
            dt_max: 1.0,
            tolerance: 1e-5,
            safety: 0.5,
            blow_threshold: None,
            sample: SampleCadence::default(),
            wall_clock: None,
        }
    }
}

impl RunControls {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be positive and finite, got {x}")))
            }
        };
        positive("dt0", self.dt0)?;
        positive("dt_min", self.dt_min)?;
        positive("dt_max", self.dt_max)?;
        positive("tolerance", self.tolerance)?;
        positive("safety", self.safety)?;
        if self.dt_min > self.dt0 || self.dt0 > self.dt_max {
            return Err(Error::config("need dt_min <= dt0 <= dt_max"));
        }
        if self.safety > 1.0 {
            return Err(Error::config("safety must lie in (0, 1]"));
        }
        if let Some(b) = self.blow_threshold {
            positive("blow_threshold", b)?;
        }
        if let Some(w) = self.wall_clock {
            positive("wall_clock", w)?;
        }
        self.sample.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    ReachedTmax,
    BlowUp { t_detect: f64 },
    StepUnderflow { t: f64 },
    /// Wall-clock budget exhausted at `t`; a blow-up, if any, happens later.
    Censored { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistoryRow {
    pub t: f64,
    pub u: FieldNorms,
    pub v: FieldNorms,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Diagnostics {
    pub max_step: f64,
    pub min_step: f64,
    pub dealias_energy_fraction: f64,
    pub accepted: u64,
    pub rejected: u64,
    pub blow_threshold: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub history: Vec<HistoryRow>,
    pub diagnostics: Diagnostics,
    pub final_state: FieldState,
}

/// Largest initial `L∞` over the four components.
fn initial_sup(stepper: &Stepper, ic: &FieldState) -> Result<f64> {
    let mut m: f64 = 0.0;
    for f in ic.fields() {
        m = m.max(max_abs(&stepper.transformer().inverse_real(f)?));
    }
    Ok(m)
}

fn row(stepper: &Stepper, state: &FieldState, phys: &Physical) -> HistoryRow {
    let g = stepper.grid();
    let field = |c: &[Complex64], p: &[f64]| {
        let (l2, h1) = parseval(c, g);
        FieldNorms { l2, h1, linf: max_abs(p) }
    };
    HistoryRow {
        t: state.t,
        u: field(&state.u, &phys.u),
        v: field(&state.v, &phys.v),
    }
}

pub fn norms_row(row: &HistoryRow) -> Norms {
    Norms { u: row.u, v: row.v }
}

/// Integrates from `ic.t = 0` to `t_max`.
pub fn run(stepper: &mut Stepper, ic: &FieldState, t_max: f64, controls: &RunControls) -> Result<RunOutcome> {
    controls.validate()?;
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::config(format!("t_max must be positive, got {t_max}")));
    }
    if ic.u.len() != stepper.grid().len() {
        return Err(Error::Shape("initial state does not match the grid".into()));
    }
    let threshold = match controls.blow_threshold {
        Some(b) => b,
        None => {
            let m = initial_sup(stepper, ic)?;
            if m > 0.0 {
                1e6 * m
            } else {
                f64::INFINITY
            }
        }
    };
    if stepper.is_linear() {
        return run_linear(stepper, ic, t_max, controls, threshold);
    }

    let started = Instant::now();
    let budget = controls.wall_clock.map(Duration::from_secs_f64);
    let samples = controls.sample.times(t_max);
    let mut next_sample = 0usize;

    let mut state = ic.clone();
    let mut phys = stepper.physical(&state)?;
    let mut history = vec![row(stepper, &state, &phys)];
    let mut diag = Diagnostics {
        min_step: f64::INFINITY,
        blow_threshold: threshold,
        ..Default::default()
    };
    let mut recent_sup: Vec<f64> = Vec::with_capacity(6);
    let mut dt = controls.dt0;
    let mut calm = 0u32;

    let status = loop {
        if state.t >= t_max {
            break RunStatus::ReachedTmax;
        }
        if let Some(b) = budget {
            if started.elapsed() > b {
                break RunStatus::Censored { t: state.t };
            }
        }
        // Steps are shortened to land exactly on the next sample time; t_max is the last one.
        let target = samples.get(next_sample).copied().unwrap_or(t_max);
        let h = dt.min(target - state.t);
        let attempt = stepper.step_from(&state, Some(&phys), h);
        let accepted = match attempt {
            Ok(out) if out.error_estimate <= controls.tolerance => Some(out),
            Ok(_) | Err(Error::Overflow { .. }) | Err(Error::Domain(_)) => None,
            Err(e) => return Err(e),
        };
        let Some(out) = accepted else {
            diag.rejected += 1;
            calm = 0;
            dt /= 2.0;
            if dt < controls.dt_min {
                let growing = recent_sup.len() >= 5 && recent_sup.windows(2).all(|w| w[1] > w[0]);
                break if growing {
                    RunStatus::BlowUp { t_detect: state.t }
                } else {
                    RunStatus::StepUnderflow { t: state.t }
                };
            }
            continue;
        };

        let mut new_state = out.state;
        if h < dt {
            new_state.t = target;
        }
        state = new_state;
        phys = stepper.physical(&state)?;
        diag.accepted += 1;
        diag.max_step = diag.max_step.max(h);
        diag.min_step = diag.min_step.min(h);
        diag.dealias_energy_fraction = diag.dealias_energy_fraction.max(out.dealias_fraction);

        let sup = max_abs(&phys.u).max(max_abs(&phys.v));
        if recent_sup.len() == 5 {
            recent_sup.remove(0);
        }
        recent_sup.push(sup);

        while next_sample < samples.len() && state.t >= samples[next_sample] {
            next_sample += 1;
            if history.last().map(|r| r.t) != Some(state.t) {
                history.push(row(stepper, &state, &phys));
            }
        }
        if !sup.is_finite() || sup > threshold {
            if history.last().map(|r| r.t) != Some(state.t) {
                history.push(row(stepper, &state, &phys));
            }
            break RunStatus::BlowUp { t_detect: state.t };
        }

        if out.error_estimate < controls.safety * controls.tolerance / 4.0 {
            calm += 1;
            if calm >= 3 && 2.0 * dt <= controls.dt_max {
                dt *= 2.0;
                calm = 0;
            }
        } else {
            calm = 0;
        }
    };
    if diag.accepted == 0 {
        diag.min_step = 0.0;
    }
    Ok(RunOutcome {
        status,
        history,
        diagnostics: diag,
        final_state: state,
    })
}

/// Exact propagation from the initial data to each sample time.
fn run_linear(
    stepper: &Stepper,
    ic: &FieldState,
    t_max: f64,
    controls: &RunControls,
    threshold: f64,
) -> Result<RunOutcome> {
    let index = stepper.index();
    let sigma = index.sigma();
    let n = stepper.grid().len();
    let evolve = |t: f64| -> FieldState {
        let table: Vec<[f64; 4]> = index
            .xi()
            .par_iter()
            .map(|&xi| {
                let (p, r) = point_with_rates(t, xi, sigma);
                [p.r0, p.r1, r.dr0, r.dr1]
            })
            .collect();
        let go = |w0: &[Complex64], w1: &[Complex64]| -> (Vec<Complex64>, Vec<Complex64>) {
            (0..n)
                .into_par_iter()
                .map(|i| {
                    let [r0, r1, dr0, dr1] = table[index.slot(i)];
                    (w0[i] * r0 + w1[i] * r1, w0[i] * dr0 + w1[i] * dr1)
                })
                .unzip()
        };
        let (u, u_t) = go(&ic.u, &ic.u_t);
        let (v, v_t) = go(&ic.v, &ic.v_t);
        FieldState { t, u, u_t, v, v_t }
    };
    let mut state = ic.clone();
    let mut history = vec![row(stepper, &state, &stepper.physical(&state)?)];
    let mut status = RunStatus::ReachedTmax;
    let mut prev = 0.0;
    let mut diag = Diagnostics {
        min_step: f64::INFINITY,
        blow_threshold: threshold,
        ..Default::default()
    };
    for t in controls.sample.times(t_max) {
        state = evolve(t);
        let phys = stepper.physical(&state)?;
        let r = row(stepper, &state, &phys);
        history.push(r);
        diag.accepted += 1;
        diag.max_step = diag.max_step.max(t - prev);
        diag.min_step = diag.min_step.min(t - prev);
        prev = t;
        if r.u.linf.max(r.v.linf) > threshold {
            status = RunStatus::BlowUp { t_detect: t };
            break;
        }
    }
    Ok(RunOutcome {
        status,
        history,
        diagnostics: diag,
        final_state: state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridSpec, Transformer};
    use crate::kernels::apply_propagator;
    use crate::moduli::{ModulusSpec, SystemParams};
    use crate::solver::state::{make_initial_data, InitialData};

    fn setup(n: u32, sigma: f64, p: f64, mu: f64, half: f64, points: usize) -> (Stepper, GridSpec) {
        let g = GridSpec::new(n, half, points).unwrap();
        let sys = SystemParams::new(sigma, n, p, p).unwrap();
        let m = ModulusSpec::constant(mu).unwrap();
        (Stepper::new(&g, sys, m.clone(), m).unwrap(), g)
    }

    fn data(g: &GridSpec, eps: f64, width: f64) -> FieldState {
        let kind = InitialData::ZeroDisplacementPositiveVelocity { amplitude: 1.0, width };
        make_initial_data(&kind, eps, g, &Transformer::new(g)).unwrap()
    }

    #[test]
    fn cadence_times() {
        let u = SampleCadence::Uniform { interval: 2.0 }.times(7.0);
        assert_eq!(u, vec![2.0, 4.0, 6.0, 7.0]);
        let g = SampleCadence::Geometric { start: 1.0, per_decade: 1 }.times(500.0);
        assert_eq!(g, vec![1.0, 10.0, 100.0, 500.0]);
    }

    #[test]
    fn nonlinear_history_lands_on_sample_times() {
        let (mut st, g) = setup(1, 0.25, 3.0, 1.0, 20.0, 64);
        let ic = data(&g, 0.2, 2.0);
        let controls = RunControls {
            sample: SampleCadence::Geometric { start: 0.3, per_decade: 4 },
            ..Default::default()
        };
        let out = run(&mut st, &ic, 7.5, &controls).unwrap();
        assert_eq!(out.status, RunStatus::ReachedTmax);
        let mut expected = vec![0.0];
        expected.extend(controls.sample.times(7.5));
        let got: Vec<f64> = out.history.iter().map(|r| r.t).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn bad_controls_are_config_errors() {
        let (mut st, g) = setup(1, 0.0, 3.0, 1.0, 20.0, 64);
        let ic = data(&g, 0.1, 2.0);
        let c = RunControls { dt_min: 1.0, dt0: 0.1, ..Default::default() };
        assert!(matches!(run(&mut st, &ic, 1.0, &c), Err(Error::Config(_))));
    }

    #[test]
    fn linear_run_matches_propagator() {
        let (mut st, g) = setup(2, 0.25, 2.0, 0.0, 20.0, 32);
        let ic = data(&g, 1.0, 2.0);
        let out = run(&mut st, &ic, 7.3, &RunControls::default()).unwrap();
        assert_eq!(out.status, RunStatus::ReachedTmax);
        let exact = apply_propagator(&ic.u, &ic.u_t, 7.3, 0.25, &g).unwrap();
        let scale = exact.w.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for (a, b) in out.final_state.u.iter().zip(&exact.w) {
            assert!((a - b).norm() <= 1e-9 * scale);
        }
        assert!(out.history.windows(2).all(|w| w[1].t > w[0].t));
    }

    #[test]
    fn zero_data_stays_zero() {
        let (mut st, g) = setup(1, 0.0, 3.0, 1.0, 20.0, 64);
        let ic = data(&g, 0.0, 2.0);
        let out = run(&mut st, &ic, 3.0, &RunControls::default()).unwrap();
        assert_eq!(out.status, RunStatus::ReachedTmax);
        assert!(out.history.iter().all(|r| r.u.l2 == 0.0 && r.v.linf == 0.0));
    }

    #[test]
    fn large_data_blows_up_and_history_is_ordered() {
        let (mut st, g) = setup(1, 0.0, 3.0, 1.0, 40.0, 128);
        let ic = data(&g, 3.0, 2.0);
        let out = run(&mut st, &ic, 50.0, &RunControls::default()).unwrap();
        assert!(matches!(out.status, RunStatus::BlowUp { .. }), "{:?}", out.status);
        assert!(out.history.windows(2).all(|w| w[1].t > w[0].t));
        assert!(out.history.iter().all(|r| r.u.l2 >= 0.0 && r.u.linf >= 0.0));
    }
}

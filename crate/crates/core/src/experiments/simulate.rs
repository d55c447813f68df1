use serde::{Deserialize, Serialize};

use super::runs::{BoxCheck, ModulusPair, Scenario};
use crate::error::{Error, Result};
use crate::moduli::{ModulusSpec, SystemParams};
use crate::solver::{HistoryRow, RunOutcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub system: SystemParams,
    pub mu1: ModulusSpec,
    pub mu2: ModulusSpec,
    pub eps: f64,
    pub scenario: Scenario,
    /// Repeat the run on the doubled box and flag it if the sampled norms move by 1% or more.
    #[serde(default)]
    pub box_check: bool,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.system.n() != self.scenario.grid.n {
            return Err(Error::config("system and grid dimensions differ"));
        }
        if !self.eps.is_finite() {
            return Err(Error::config("eps must be finite"));
        }
        Ok(())
    }
}

impl SimulationConfig {
    fn pair(&self) -> ModulusPair {
        ModulusPair {
            mu1: self.mu1.clone(),
            mu2: self.mu2.clone(),
        }
    }
}

pub fn simulate(cfg: &SimulationConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    cfg.scenario.run(cfg.system, &cfg.pair(), cfg.eps, None)
}

/// Box-independence of a finished [`simulate`] run.
pub fn box_check(cfg: &SimulationConfig, first: &RunOutcome) -> Result<BoxCheck> {
    cfg.scenario.box_check(cfg.system, &cfg.pair(), cfg.eps, first)
}

/// A history sample flattened into table columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormRow {
    pub t: f64,
    pub u_l2: f64,
    pub u_grad: f64,
    pub u_linf: f64,
    pub v_l2: f64,
    pub v_grad: f64,
    pub v_linf: f64,
}

impl From<&HistoryRow> for NormRow {
    fn from(r: &HistoryRow) -> Self {
        NormRow {
            t: r.t,
            u_l2: r.u.l2,
            u_grad: r.u.h1,
            u_linf: r.u.linf,
            v_l2: r.v.l2,
            v_grad: r.v.h1,
            v_linf: r.v.linf,
        }
    }
}

pub fn norm_rows(out: &RunOutcome) -> Vec<NormRow> {
    out.history.iter().map(NormRow::from).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::solver::{InitialData, RunStatus};

    #[test]
    fn zero_amplitude_stays_zero() {
        let one = ModulusSpec::constant(1.0).unwrap();
        let cfg = SimulationConfig {
            system: SystemParams::new(0.25, 1, 3.0, 3.0).unwrap(),
            mu1: one.clone(),
            mu2: one,
            eps: 0.0,
            scenario: Scenario {
                grid: GridSpec::new(1, 40.0, 64).unwrap(),
                data: InitialData::GaussianBump {
                    amplitude: 1.0,
                    width: 2.0,
                    center: vec![],
                },
                t_max: 5.0,
                controls: Default::default(),
            },
            box_check: false,
        };
        let out = simulate(&cfg).unwrap();
        assert_eq!(out.status, RunStatus::ReachedTmax);
        let rows = norm_rows(&out);
        assert_eq!(rows.len(), out.history.len());
        assert!(rows.iter().all(|r| r.u_l2 == 0.0 && r.v_linf == 0.0));
    }

    /// Oracle: the same run on a box twice as large, compared sample by sample.
    #[test]
    fn frictional_run_does_not_feel_the_box() {
        let one = ModulusSpec::constant(1.0).unwrap();
        let t_max = 20.0;
        let width = 1.0;
        let l = crate::experiments::box_l_min(t_max, width);
        let cfg = SimulationConfig {
            system: SystemParams::new(0.0, 1, 3.0, 3.0).unwrap(),
            mu1: one.clone(),
            mu2: one,
            eps: 0.1,
            scenario: Scenario {
                grid: GridSpec::new(1, l.ceil(), 256).unwrap(),
                data: InitialData::ZeroDisplacementPositiveVelocity { amplitude: 1.0, width },
                t_max,
                controls: Default::default(),
            },
            box_check: true,
        };
        let first = simulate(&cfg).unwrap();
        let check = box_check(&cfg, &first).unwrap();
        assert!(check.above_l_min());
        assert!(check.samples > 10, "{check:?}");
        assert!(check.passed, "{check:?}");
    }

    #[test]
    fn small_box_is_flagged() {
        let one = ModulusSpec::constant(1.0).unwrap();
        let cfg = SimulationConfig {
            system: SystemParams::new(0.0, 1, 3.0, 3.0).unwrap(),
            mu1: one.clone(),
            mu2: one,
            eps: 0.1,
            scenario: Scenario {
                grid: GridSpec::new(1, 4.0, 64).unwrap(),
                data: InitialData::ZeroDisplacementPositiveVelocity { amplitude: 1.0, width: 1.0 },
                t_max: 20.0,
                controls: Default::default(),
            },
            box_check: true,
        };
        let first = simulate(&cfg).unwrap();
        let check = box_check(&cfg, &first).unwrap();
        assert!(!check.above_l_min());
        assert!(!check.passed, "{check:?}");
    }

    /// For 0 < sigma < 1/2 velocity data develop tails `|x|^-(n - 2 sigma)`, so the box
    /// error in L2 decays only like `L^-(n - 4 sigma)`; oracle: that exponent.
    #[test]
    fn fractional_damping_box_error_decays_algebraically() {
        let zero = ModulusSpec::constant(0.0).unwrap();
        let (n, sigma) = (1u32, 0.1);
        let change = |l: f64| {
            let cfg = SimulationConfig {
                system: SystemParams::new(sigma, n, 2.0, 2.0).unwrap(),
                mu1: zero.clone(),
                mu2: zero.clone(),
                eps: 1.0,
                scenario: Scenario {
                    grid: GridSpec::new(n, l, (4.0 * l) as usize).unwrap(),
                    data: InitialData::ZeroDisplacementPositiveVelocity { amplitude: 1.0, width: 2.0 },
                    t_max: 50.0,
                    controls: Default::default(),
                },
                box_check: true,
            };
            let first = simulate(&cfg).unwrap();
            box_check(&cfg, &first).unwrap().max_rel_change
        };
        let (a, b) = (change(256.0), change(512.0));
        let expected = 2f64.powf(n as f64 - 4.0 * sigma);
        assert!((a / b - expected).abs() < 0.12, "{a} {b} ratio {} vs {expected}", a / b);
    }
}

use std::collections::HashMap;

use num_complex::Complex64;
use rayon::prelude::*;

use super::state::FieldState;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, Transformer};
use crate::kernels::{RadialIndex, StepWeights};
use crate::moduli::{ModulusFamily, ModulusSpec, SystemParams};

/// Pointwise `|w|^p μ(|w|)`.
///
/// Arguments below the modulus validity floor contribute 0: there `|w|^p` is already far
/// below any representable forcing.
pub fn nonlinearity(values: &[f64], p: f64, mu: &ModulusSpec) -> Result<Vec<f64>> {
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::domain(format!("nonlinearity of a non-finite value {bad}")));
    }
    let power = power_fn(p);
    if let ModulusFamily::Constant { value } = mu.family() {
        let c = *value;
        if c == 0.0 {
            return Ok(vec![0.0; values.len()]);
        }
        return Ok(values.par_iter().map(|w| c * power(w.abs())).collect());
    }
    Ok(values
        .par_iter()
        .map(|w| {
            let s = w.abs();
            match mu.eval(s) {
                Ok(m) => power(s) * m,
                Err(_) => 0.0,
            }
        })
        .collect())
}

fn power_fn(p: f64) -> impl Fn(f64) -> f64 + Sync {
    let integer = p.fract() == 0.0 && p <= 16.0;
    move |s: f64| if integer { s.powi(p as i32) } else { s.powf(p) }
}

/// Physical-space displacements of a state.
#[derive(Debug, Clone)]
pub struct Physical {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    pub state: FieldState,
    /// Relative coefficient distance between predictor and corrector.
    pub error_estimate: f64,
    /// Share of forcing energy removed by dealiasing, worst of the two stages.
    pub dealias_fraction: f64,
}

/// Second-order exponential integrator for the coupled system.
///
/// Each step propagates the linear part exactly and integrates the Duhamel term with an
/// explicit predictor (forcing frozen at the start) and a trapezoid-type corrector (forcing
/// interpolated linearly between the start and the predicted end state).
pub struct Stepper {
    grid: GridSpec,
    transformer: Transformer,
    index: RadialIndex,
    sys: SystemParams,
    mu1: ModulusSpec,
    mu2: ModulusSpec,
    mask: Vec<bool>,
    cache: HashMap<u64, StepWeights>,
}

const CACHE_LIMIT: usize = 64;

impl Stepper {
    pub fn new(grid: &GridSpec, sys: SystemParams, mu1: ModulusSpec, mu2: ModulusSpec) -> Result<Self> {
        grid.validate()?;
        if sys.n() != grid.n {
            return Err(Error::config(format!(
                "system dimension {} differs from grid dimension {}",
                sys.n(),
                grid.n
            )));
        }
        Ok(Self {
            grid: *grid,
            transformer: Transformer::new(grid),
            index: RadialIndex::new(grid, sys.sigma()),
            sys,
            mu1,
            mu2,
            mask: (0..grid.len()).map(|i| grid.keeps(i)).collect(),
            cache: HashMap::new(),
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn transformer(&self) -> &Transformer {
        &self.transformer
    }

    pub fn index(&self) -> &RadialIndex {
        &self.index
    }

    /// True when both right-hand sides vanish identically.
    pub fn is_linear(&self) -> bool {
        self.mu1.is_identically_zero() && self.mu2.is_identically_zero()
    }

    pub fn physical(&self, state: &FieldState) -> Result<Physical> {
        Ok(Physical {
            u: self.transformer.inverse_real(&state.u)?,
            v: self.transformer.inverse_real(&state.v)?,
        })
    }

    /// Dealiased coefficients of the forcings `(F_u, F_v)` and the removed energy share.
    fn forcing(&self, phys: &Physical) -> Result<(Vec<Complex64>, Vec<Complex64>, f64)> {
        let mut fu = self
            .transformer
            .forward_real(&nonlinearity(&phys.v, self.sys.p_star(), &self.mu1)?)?;
        let mut fv = self
            .transformer
            .forward_real(&nonlinearity(&phys.u, self.sys.q_star(), &self.mu2)?)?;
        let (mut total, mut removed) = (0.0, 0.0);
        for f in [&mut fu, &mut fv] {
            for (c, keep) in f.iter_mut().zip(&self.mask) {
                let e = c.norm_sqr();
                total += e;
                if !keep {
                    removed += e;
                    *c = Complex64::new(0.0, 0.0);
                }
            }
        }
        let share = if total > 0.0 { removed / total } else { 0.0 };
        Ok((fu, fv, share))
    }

    fn weights(&mut self, h: f64) -> &StepWeights {
        if self.cache.len() >= CACHE_LIMIT && !self.cache.contains_key(&h.to_bits()) {
            self.cache.clear();
        }
        let index = &self.index;
        self.cache
            .entry(h.to_bits())
            .or_insert_with(|| StepWeights::new(index, h))
    }

    pub fn step(&mut self, state: &FieldState, h: f64) -> Result<StepOutput> {
        let phys = if self.is_linear() {
            None
        } else {
            Some(self.physical(state)?)
        };
        self.step_from(state, phys.as_ref(), h)
    }

    /// One step of size `h`, reusing the physical fields of `state` when available.
    pub fn step_from(&mut self, state: &FieldState, phys: Option<&Physical>, h: f64) -> Result<StepOutput> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::domain(format!("step size must be positive, got {h}")));
        }
        let linear = self.is_linear();
        let forcing0 = if linear {
            None
        } else {
            let owned;
            let phys = match phys {
                Some(p) => p,
                None => {
                    owned = self.physical(state)?;
                    &owned
                }
            };
            Some(self.forcing(phys)?)
        };
        self.weights(h);
        let w = &self.cache[&h.to_bits()];
        let slots: Vec<usize> = (0..self.grid.len()).map(|i| self.index.slot(i)).collect();

        // Free propagation.
        let propagate = |w0: &[Complex64], w1: &[Complex64]| -> (Vec<Complex64>, Vec<Complex64>) {
            slots
                .par_iter()
                .enumerate()
                .map(|(i, &s)| {
                    let [r0, r1, dr0, dr1] = w.propagator[s];
                    (w0[i] * r0 + w1[i] * r1, w0[i] * dr0 + w1[i] * dr1)
                })
                .unzip()
        };
        let (mut u, mut u_t) = propagate(&state.u, &state.u_t);
        let (mut v, mut v_t) = propagate(&state.v, &state.v_t);
        let t_new = state.t + h;

        let Some((fu0, fv0, share0)) = forcing0 else {
            let out = FieldState { t: t_new, u, u_t, v, v_t };
            check_finite(&out)?;
            return Ok(StepOutput {
                state: out,
                error_estimate: 0.0,
                dealias_fraction: 0.0,
            });
        };

        let add = |x: &mut [Complex64], y: &mut [Complex64], f: &[Complex64], wt: &(dyn Fn(usize) -> (f64, f64) + Sync)| {
            x.par_iter_mut()
                .zip(y.par_iter_mut())
                .enumerate()
                .for_each(|(i, (a, b))| {
                    let (cx, cy) = wt(slots[i]);
                    *a += f[i] * cx;
                    *b += f[i] * cy;
                });
        };

        // Predictor.
        let (mut pu, mut pu_t, mut pv, mut pv_t) = (u.clone(), u_t.clone(), v.clone(), v_t.clone());
        let pred = |s: usize| (w.predictor[s][0], w.predictor[s][1]);
        add(&mut pu, &mut pu_t, &fu0, &pred);
        add(&mut pv, &mut pv_t, &fv0, &pred);
        let predicted = FieldState {
            t: t_new,
            u: pu,
            u_t: pu_t,
            v: pv,
            v_t: pv_t,
        };
        check_finite(&predicted)?;

        // Corrector.
        let phys1 = Physical {
            u: self.transformer.inverse_real(&predicted.u)?,
            v: self.transformer.inverse_real(&predicted.v)?,
        };
        let (fu1, fv1, share1) = self.forcing(&phys1)?;
        let w = &self.cache[&h.to_bits()];
        let old = |s: usize| (w.corrector[s][0], w.corrector[s][1]);
        let new = |s: usize| (w.corrector[s][2], w.corrector[s][3]);
        add(&mut u, &mut u_t, &fu0, &old);
        add(&mut u, &mut u_t, &fu1, &new);
        add(&mut v, &mut v_t, &fv0, &old);
        add(&mut v, &mut v_t, &fv1, &new);
        let out = FieldState { t: t_new, u, u_t, v, v_t };
        check_finite(&out)?;

        let (mut diff, mut size) = (0.0, 0.0);
        for (a, b) in out.fields().iter().zip(predicted.fields()) {
            for (x, y) in a.iter().zip(b) {
                diff += (x - y).norm_sqr();
                size += x.norm_sqr();
            }
        }
        let error_estimate = if size > 0.0 { (diff / size).sqrt() } else { 0.0 };
        Ok(StepOutput {
            state: out,
            error_estimate,
            dealias_fraction: share0.max(share1),
        })
    }

    /// `steps` equal steps of size `h`.
    pub fn advance_fixed(&mut self, state: &FieldState, h: f64, steps: usize) -> Result<FieldState> {
        let mut s = state.clone();
        for _ in 0..steps {
            s = self.step(&s, h)?.state;
        }
        Ok(s)
    }
}

fn check_finite(state: &FieldState) -> Result<()> {
    if state.is_finite() {
        Ok(())
    } else {
        Err(Error::Overflow {
            time: state.t,
            detail: "non-finite Fourier coefficient".into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::apply_propagator;
    use crate::solver::state::{make_initial_data, InitialData};

    #[test]
    fn nonlinearity_examples() {
        let one = ModulusSpec::constant(1.0).unwrap();
        assert_eq!(nonlinearity(&[0.0, 0.0], 3.0, &one).unwrap(), vec![0.0, 0.0]);
        assert_eq!(nonlinearity(&[3.0, -3.0], 2.0, &one).unwrap(), vec![9.0, 9.0]);
        let pl = ModulusSpec::power_log(1.0).unwrap().with_cutoff(0.5).unwrap();
        let e1 = (-1.0_f64).exp();
        let got = nonlinearity(&[e1], 2.0, &pl).unwrap()[0];
        // Oracle: |w|^2 / log(1/|w|) at |w| = e^{-1}.
        let want = e1 * e1 / (1.0 / e1).ln();
        assert!((got - want).abs() < 1e-16);
        assert!(nonlinearity(&[f64::NAN], 2.0, &one).is_err());
        // Below the validity floor the forcing is zero.
        assert_eq!(nonlinearity(&[1e-320], 2.0, &pl).unwrap()[0], 0.0);
    }

    fn velocity_state(grid: &GridSpec, eps: f64) -> FieldState {
        let tr = Transformer::new(grid);
        let kind = InitialData::ZeroDisplacementPositiveVelocity { amplitude: 1.0, width: 1.5 };
        make_initial_data(&kind, eps, grid, &tr).unwrap()
    }

    #[test]
    fn linear_limit_matches_propagator() {
        let g = GridSpec::new(2, 12.0, 32).unwrap();
        let sys = SystemParams::new(0.25, 2, 2.0, 2.0).unwrap();
        let zero = ModulusSpec::constant(0.0).unwrap();
        let mut st = Stepper::new(&g, sys, zero.clone(), zero).unwrap();
        let s0 = velocity_state(&g, 1.0);
        let end = st.advance_fixed(&s0, 0.1, 10).unwrap();
        let exact = apply_propagator(&s0.u, &s0.u_t, 1.0, 0.25, &g).unwrap();
        let scale = exact.w.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for (a, b) in end.u.iter().zip(&exact.w) {
            assert!((a - b).norm() < 1e-10 * scale);
        }
    }

    #[test]
    fn nonlinear_step_keeps_conjugate_symmetry() {
        let g = GridSpec::new(2, 12.0, 32).unwrap();
        let sys = SystemParams::new(0.25, 2, 2.0, 3.0).unwrap();
        let one = ModulusSpec::constant(1.0).unwrap();
        let mut st = Stepper::new(&g, sys, one.clone(), one).unwrap();
        let s0 = velocity_state(&g, 0.8);
        let out = st.step(&s0, 0.05).unwrap();
        assert!(out.state.conjugate_symmetry_defect(&g) < 1e-12);
        assert!(out.error_estimate > 0.0 && out.error_estimate < 1e-2);
    }

    /// Oracle: compares errors against a run with step h/8 instead of trusting the scheme.
    #[test]
    fn second_order_in_time() {
        let g = GridSpec::new(1, 16.0, 64).unwrap();
        let sys = SystemParams::new(0.0, 1, 2.0, 2.0).unwrap();
        let one = ModulusSpec::constant(1.0).unwrap();
        let mut st = Stepper::new(&g, sys, one.clone(), one).unwrap();
        let s0 = velocity_state(&g, 1.0);
        let t = 1.0;
        let runs: Vec<FieldState> = [4usize, 8, 16]
            .iter()
            .map(|&k| st.advance_fixed(&s0, t / k as f64, k).unwrap())
            .collect();
        let dist = |a: &FieldState, b: &FieldState| -> f64 {
            a.u.iter().zip(&b.u).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
        };
        let ratio = dist(&runs[0], &runs[1]) / dist(&runs[1], &runs[2]);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }
}

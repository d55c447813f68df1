//! Periodic box `[-L, L)^n` with its frequency lattice and FFT plans.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the `k = 0` mode sees the linear propagator.
///
/// On a torus the zero mode is the box mean, which the fractional damping `|ξ|^{2σ}` leaves
/// undamped for `σ > 0`. In the whole space the low frequencies near zero are damped, only
/// slowly. `CellMean` gives the zero mode the mean `|ξ|` of the ball of frequencies it stands
/// for (same volume as one lattice cell), which restores the whole-space decay of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroMode {
    Periodic,
    CellMean,
    /// `CellMean` when `σ > 0`, `Periodic` when `σ = 0`.
    #[default]
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: u32,
    /// Box half-length `L`.
    pub half_length: f64,
    /// Points per dimension.
    pub points: usize,
    #[serde(default = "default_dealias")]
    pub dealias_fraction: f64,
    #[serde(default)]
    pub zero_mode: ZeroMode,
}

fn default_dealias() -> f64 {
    2.0 / 3.0
}

impl GridSpec {
    pub fn new(n: u32, half_length: f64, points: usize) -> Result<Self> {
        let g = Self {
            n,
            half_length,
            points,
            dealias_fraction: default_dealias(),
            zero_mode: ZeroMode::Auto,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_zero_mode(mut self, zero_mode: ZeroMode) -> Self {
        self.zero_mode = zero_mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n == 1 || self.n == 2) {
            return Err(Error::config(format!("grid dimension must be 1 or 2, got {}", self.n)));
        }
        if !(self.half_length.is_finite() && self.half_length > 0.0) {
            return Err(Error::config(format!("half_length must be positive, got {}", self.half_length)));
        }
        if self.points < 32 || !self.points.is_power_of_two() {
            return Err(Error::config(format!(
                "points per dimension must be a power of two >= 32, got {}",
                self.points
            )));
        }
        if !(self.dealias_fraction > 0.0 && self.dealias_fraction <= 1.0) {
            return Err(Error::config(format!(
                "dealias_fraction must lie in (0, 1], got {}",
                self.dealias_fraction
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.n)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / self.points as f64
    }

    /// Cell volume `dx^n`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.n as i32)
    }

    /// Box volume `(2L)^n`.
    pub fn volume(&self) -> f64 {
        (2.0 * self.half_length).powi(self.n as i32)
    }

    /// Fundamental wavenumber `π / L`.
    pub fn dk(&self) -> f64 {
        PI / self.half_length
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        -self.half_length + i as f64 * self.spacing()
    }

    /// Signed integer wavenumber of FFT index `j`.
    pub fn signed_index(&self, j: usize) -> i64 {
        let n = self.points as i64;
        let j = j as i64;
        if j < n / 2 {
            j
        } else {
            j - n
        }
    }

    /// Integer multi-index of a flat (row-major) position.
    pub fn multi_index(&self, flat: usize) -> [i64; 2] {
        if self.n == 1 {
            [self.signed_index(flat), 0]
        } else {
            [
                self.signed_index(flat / self.points),
                self.signed_index(flat % self.points),
            ]
        }
    }

    /// `k1^2 + k2^2` at a flat position; `|ξ| = (π/L) sqrt(key)`.
    pub fn radial_key(&self, flat: usize) -> u64 {
        let [a, b] = self.multi_index(flat);
        (a * a + b * b) as u64
    }

    fn effective_zero_mode(&self, sigma: f64) -> ZeroMode {
        match self.zero_mode {
            ZeroMode::Auto if sigma > 0.0 => ZeroMode::CellMean,
            ZeroMode::Auto => ZeroMode::Periodic,
            m => m,
        }
    }

    /// `|ξ|` the propagator uses for a radial key.
    pub fn xi_of_key(&self, key: u64, sigma: f64) -> f64 {
        if key == 0 {
            return match self.effective_zero_mode(sigma) {
                ZeroMode::CellMean => self.zero_mode_xi(),
                _ => 0.0,
            };
        }
        self.dk() * (key as f64).sqrt()
    }

    /// Mean `|ξ|` over the ball of one cell's volume: `r_c n/(n+1)`.
    pub fn zero_mode_xi(&self) -> f64 {
        let dk = self.dk();
        let rc = if self.n == 1 { dk / 2.0 } else { dk / PI.sqrt() };
        let n = self.n as f64;
        rc * n / (n + 1.0)
    }

    /// Whether a flat position survives dealiasing.
    pub fn keeps(&self, flat: usize) -> bool {
        let limit = self.dealias_fraction * self.points as f64 / 2.0;
        let [a, b] = self.multi_index(flat);
        (a.unsigned_abs() as f64) < limit && (b.unsigned_abs() as f64) < limit
    }

    /// Physical-space values of a function of position on the grid.
    pub fn sample<F: Fn(&[f64]) -> f64 + Sync>(&self, f: F) -> Vec<f64> {
        (0..self.len())
            .into_par_iter()
            .map(|flat| {
                if self.n == 1 {
                    f(&[self.coordinate(flat)])
                } else {
                    f(&[
                        self.coordinate(flat / self.points),
                        self.coordinate(flat % self.points),
                    ])
                }
            })
            .collect()
    }
}

/// Forward and inverse transforms with the coefficient normalisation `û = FFT(u) / N^n`.
pub struct Transformer {
    grid: GridSpec,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Transformer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Transformer").field("grid", &self.grid).finish()
    }
}

impl Transformer {
    pub fn new(grid: &GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid: *grid,
            forward: planner.plan_fft_forward(grid.points),
            inverse: planner.plan_fft_inverse(grid.points),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Coefficients of a real field.
    pub fn forward_real(&self, values: &[f64]) -> Result<Vec<Complex64>> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf)?;
        Ok(buf)
    }

    pub fn forward(&self, data: &mut [Complex64]) -> Result<()> {
        self.transform(data, &self.forward)?;
        let scale = 1.0 / self.grid.len() as f64;
        data.par_iter_mut().for_each(|c| *c *= scale);
        Ok(())
    }

    /// Physical values from coefficients; no rescaling is needed with this normalisation.
    pub fn inverse(&self, data: &mut [Complex64]) -> Result<()> {
        self.transform(data, &self.inverse)
    }

    /// Real part of the inverse transform.
    pub fn inverse_real(&self, coeffs: &[Complex64]) -> Result<Vec<f64>> {
        let mut buf = coeffs.to_vec();
        self.inverse(&mut buf)?;
        Ok(buf.into_iter().map(|c| c.re).collect())
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) -> Result<()> {
        let n = self.grid.points;
        if data.len() != self.grid.len() {
            return Err(Error::Shape(format!(
                "expected {} coefficients, got {}",
                self.grid.len(),
                data.len()
            )));
        }
        // Rows are contiguous.
        data.par_chunks_mut(n).for_each(|row| plan.process(row));
        if self.grid.n == 2 {
            // Columns via a transpose, transform rows, transpose back.
            let mut t = transpose(data, n);
            t.par_chunks_mut(n).for_each(|row| plan.process(row));
            let back = transpose(&t, n);
            data.copy_from_slice(&back);
        }
        Ok(())
    }
}

fn transpose(data: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    out.par_chunks_mut(n).enumerate().for_each(|(j, row)| {
        for (i, v) in row.iter_mut().enumerate() {
            *v = data[i * n + j];
        }
    });
    out
}

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::state::FieldState;
use crate::error::Result;
use crate::grid::{GridSpec, Transformer};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct FieldNorms {
    pub l2: f64,
    /// `‖∇w‖_{L²}`.
    pub h1: f64,
    pub linf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Norms {
    pub u: FieldNorms,
    pub v: FieldNorms,
}

/// `‖w‖² = (2L)^n Σ|ŵ|²` and `‖∇w‖² = (2L)^n Σ|k|²|ŵ|²`, summed in index order.
pub fn parseval(coeffs: &[Complex64], grid: &GridSpec) -> (f64, f64) {
    let dk = grid.dk();
    let (mut s0, mut s1) = (0.0, 0.0);
    for (i, c) in coeffs.iter().enumerate() {
        let m = c.norm_sqr();
        s0 += m;
        s1 += m * grid.radial_key(i) as f64 * dk * dk;
    }
    let vol = grid.volume();
    ((vol * s0).sqrt(), (vol * s1).sqrt())
}

pub fn max_abs(values: &[f64]) -> f64 {
    values.par_iter().map(|v| v.abs()).reduce(|| 0.0, f64::max)
}

pub fn field_norms(coeffs: &[Complex64], grid: &GridSpec, transformer: &Transformer) -> Result<FieldNorms> {
    let (l2, h1) = parseval(coeffs, grid);
    let linf = max_abs(&transformer.inverse_real(coeffs)?);
    Ok(FieldNorms { l2, h1, linf })
}

pub fn norms(state: &FieldState, grid: &GridSpec, transformer: &Transformer) -> Result<Norms> {
    Ok(Norms {
        u: field_norms(&state.u, grid, transformer)?,
        v: field_norms(&state.v, grid, transformer)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_state() {
        let g = GridSpec::new(1, 5.0, 32).unwrap();
        let tr = Transformer::new(&g);
        let n = norms(&FieldState::zeros(&g), &g, &tr).unwrap();
        assert_eq!(n, Norms::default());
    }

    #[test]
    fn single_mode_amplitude() {
        for dim in [1, 2] {
            let g = GridSpec::new(dim, 5.0, 32).unwrap();
            let mut c = vec![Complex64::new(0.0, 0.0); g.len()];
            c[3] = Complex64::new(0.0, 0.7);
            let (l2, _) = parseval(&c, &g);
            assert!((l2 - 0.7 * (10f64).powf(dim as f64 / 2.0)).abs() < 1e-13);
        }
    }

    #[test]
    fn parseval_matches_physical_sum() {
        let g = GridSpec::new(2, 6.0, 64).unwrap();
        let tr = Transformer::new(&g);
        let vals = g.sample(|x| (-(x[0] * x[0] + 2.0 * x[1] * x[1]) / 3.0).exp() + 0.1 * (x[0] * 0.5).sin());
        let c = tr.forward_real(&vals).unwrap();
        let (l2, _) = parseval(&c, &g);
        let direct = (vals.iter().map(|v| v * v).sum::<f64>() * g.cell_volume()).sqrt();
        assert!((l2 - direct).abs() < 1e-12 * direct);
    }

    #[test]
    fn gradient_norm_of_a_mode() {
        // w = cos(k x) on [-L, L): ‖w'‖² = k² L.
        let g = GridSpec::new(1, 4.0, 64).unwrap();
        let tr = Transformer::new(&g);
        let k = 5.0 * g.dk();
        let c = tr.forward_real(&g.sample(|x| (k * x[0]).cos())).unwrap();
        let (_, h1) = parseval(&c, &g);
        assert!((h1 - (k * k * 4.0).sqrt()).abs() < 1e-12);
    }
}

use num_complex::Complex64;
use rayon::prelude::*;

use super::point_with_rates;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::moduli::check_sigma;
use crate::quadrature::gauss_legendre;

/// Multipliers are radial, so they are evaluated once per distinct `k1^2 + k2^2`.
#[derive(Debug, Clone)]
pub struct RadialIndex {
    slot: Vec<u32>,
    xi: Vec<f64>,
    sigma: f64,
}

impl RadialIndex {
    pub fn new(grid: &GridSpec, sigma: f64) -> Self {
        let keys: Vec<u64> = (0..grid.len()).map(|i| grid.radial_key(i)).collect();
        let mut unique = keys.clone();
        unique.sort_unstable();
        unique.dedup();
        let slot = keys
            .iter()
            .map(|k| unique.binary_search(k).expect("key present") as u32)
            .collect();
        let xi = unique.iter().map(|&k| grid.xi_of_key(k, sigma)).collect();
        Self { slot, xi, sigma }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Radial frequencies, one per slot.
    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn slot(&self, flat: usize) -> usize {
        self.slot[flat] as usize
    }

    pub fn len(&self) -> usize {
        self.slot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slot.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagatedPair {
    pub w: Vec<Complex64>,
    pub w_t: Vec<Complex64>,
}

/// `ŵ(t) = R0 ŵ0 + R1 ŵ1` and `∂_t ŵ(t) = R0' ŵ0 + R1' ŵ1`, mode by mode.
pub fn apply_propagator(
    w0: &[Complex64],
    w1: &[Complex64],
    t: f64,
    sigma: f64,
    grid: &GridSpec,
) -> Result<PropagatedPair> {
    check_sigma(sigma)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t must be finite and >= 0, got {t}")));
    }
    if w0.len() != grid.len() || w1.len() != grid.len() {
        return Err(Error::Shape(format!(
            "grid has {} modes, data has {} and {}",
            grid.len(),
            w0.len(),
            w1.len()
        )));
    }
    let index = RadialIndex::new(grid, sigma);
    let table: Vec<[f64; 4]> = index
        .xi()
        .par_iter()
        .map(|&xi| {
            let (p, r) = point_with_rates(t, xi, sigma);
            [p.r0, p.r1, r.dr0, r.dr1]
        })
        .collect();
    let (w, w_t) = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let [r0, r1, dr0, dr1] = table[index.slot(i)];
            (w0[i] * r0 + w1[i] * r1, w0[i] * dr0 + w1[i] * dr1)
        })
        .unzip();
    Ok(PropagatedPair { w, w_t })
}

/// Per-slot coefficients of one exponential-integrator step of size `h`.
///
/// With `E(s)` the propagator matrix and the forcing entering the velocity slot, the step uses
/// `P = ∫_0^h R1(s) ds` and `M = ∫_0^h R1(s) s/h ds`. Derivative weights follow from
/// `R1(0) = 0` by parts, so only `P` and `M` need quadrature.
#[derive(Debug, Clone)]
#[allow(dead_code)]
pub(crate) struct StepWeights {
    pub h: f64,
    /// `[R0, R1, R0', R1']` at `h`.
    pub propagator: Vec<[f64; 4]>,
    /// Predictor: `(P, R1(h))` multiply the current forcing.
    pub predictor: Vec<[f64; 2]>,
    /// Corrector: `(M, R1(h) - P/h)` on the old forcing, `(P - M, P/h)` on the predicted one.
    pub corrector: Vec<[f64; 4]>,
}

impl StepWeights {
    pub fn new(index: &RadialIndex, h: f64) -> Self {
        let sigma = index.sigma();
        let (nodes, weights) = gauss_legendre(8);
        let rows: Vec<([f64; 4], [f64; 2], [f64; 4])> = index
            .xi()
            .par_iter()
            .map(|&xi| {
                let (p, r) = point_with_rates(h, xi, sigma);
                let rate = xi.max(super::damping(xi, sigma));
                let panels = (h * rate / 2.0).ceil() as usize + 1;
                let width = h / panels as f64;
                let mut big_p = 0.0;
                let mut big_m = 0.0;
                for j in 0..panels {
                    let left = j as f64 * width;
                    for (x, w) in nodes.iter().zip(&weights) {
                        let s = left + 0.5 * width * (x + 1.0);
                        let k1 = point_with_rates(s, xi, sigma).0.k1;
                        let ww = 0.5 * width * w;
                        big_p += ww * k1;
                        big_m += ww * k1 * s / h;
                    }
                }
                (
                    [p.r0, p.r1, r.dr0, r.dr1],
                    [big_p, p.r1],
                    [big_m, p.r1 - big_p / h, big_p - big_m, big_p / h],
                )
            })
            .collect();
        let mut propagator = Vec::with_capacity(rows.len());
        let mut predictor = Vec::with_capacity(rows.len());
        let mut corrector = Vec::with_capacity(rows.len());
        for (a, b, c) in rows {
            propagator.push(a);
            predictor.push(b);
            corrector.push(c);
        }
        Self {
            h,
            propagator,
            predictor,
            corrector,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::eval_kernels;
    use crate::quadrature::Integrator;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: &GridSpec, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        (0..grid.len())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn identity_at_time_zero() {
        let g = GridSpec::new(1, 10.0, 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w0 = random_field(&g, &mut rng);
        let w1 = random_field(&g, &mut rng);
        let out = apply_propagator(&w0, &w1, 0.0, 0.3, &g).unwrap();
        assert_eq!(out.w, w0);
    }

    #[test]
    fn zero_mode_velocity_grows_linearly() {
        let g = GridSpec::new(1, 10.0, 32).unwrap().with_zero_mode(crate::grid::ZeroMode::Periodic);
        let zero = vec![Complex64::new(0.0, 0.0); g.len()];
        let mut w1 = zero.clone();
        w1[0] = Complex64::new(1.0, 0.0);
        let out = apply_propagator(&zero, &w1, 2.5, 0.25, &g).unwrap();
        assert!((out.w[0].re - 2.5).abs() < 1e-14);
    }

    #[test]
    fn semigroup_property() {
        for (n, sigma) in [(1, 0.0), (2, 0.25), (2, 0.5)] {
            let g = GridSpec::new(n, 7.0, 32).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
            let w0 = random_field(&g, &mut rng);
            let w1 = random_field(&g, &mut rng);
            let (t1, t2) = (0.7, 1.9);
            let direct = apply_propagator(&w0, &w1, t1 + t2, sigma, &g).unwrap();
            let mid = apply_propagator(&w0, &w1, t1, sigma, &g).unwrap();
            let composed = apply_propagator(&mid.w, &mid.w_t, t2, sigma, &g).unwrap();
            let scale = direct.w.iter().map(|c| c.norm()).fold(0.0, f64::max);
            for (a, b) in direct.w.iter().zip(&composed.w) {
                assert!((a - b).norm() < 1e-10 * scale);
            }
            let scale = direct.w_t.iter().map(|c| c.norm()).fold(0.0, f64::max);
            for (a, b) in direct.w_t.iter().zip(&composed.w_t) {
                assert!((a - b).norm() < 1e-10 * scale);
            }
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let g = GridSpec::new(1, 10.0, 32).unwrap();
        let short = vec![Complex64::new(0.0, 0.0); 16];
        assert!(matches!(apply_propagator(&short, &short, 1.0, 0.0, &g), Err(Error::Shape(_))));
    }

    #[test]
    fn step_weights_match_adaptive_quadrature() {
        let g = GridSpec::new(1, 4.0, 64).unwrap();
        let index = RadialIndex::new(&g, 0.3);
        let h = 0.37;
        let w = StepWeights::new(&index, h);
        let quad = Integrator::default();
        for slot in [0, 1, 5, 20, index.xi().len() - 1] {
            let xi = index.xi()[slot];
            let k1 = |s: f64| eval_kernels(s, xi, 0.3).unwrap().k1;
            let p = quad.integrate(k1, 0.0, h).unwrap().value;
            let m = quad.integrate(|s| k1(s) * s / h, 0.0, h).unwrap().value;
            assert!((w.predictor[slot][0] - p).abs() < 1e-13, "slot {slot}");
            assert!((w.corrector[slot][0] - m).abs() < 1e-13, "slot {slot}");
            // ∫ R1'(s)(1 - s/h) ds by direct quadrature of the rate.
            let d = quad
                .integrate(|s| crate::kernels::eval_kernels_with_rates(s, xi, 0.3).unwrap().1.dr1 * (1.0 - s / h), 0.0, h)
                .unwrap()
                .value;
            assert!((w.corrector[slot][3] - d).abs() < 1e-12, "slot {slot}");
        }
    }
}

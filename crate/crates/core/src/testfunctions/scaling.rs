use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::fraclap::{fractional_laplacian_direct, FracLapControls, PhiPower};
use crate::error::{Error, Result};

/// Largest relative violation of the scaling identity counted as a pass.
pub const SCALING_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingSample {
    pub n: u32,
    pub r: f64,
    pub x: f64,
    pub s: f64,
    /// `(-Δ)^s φ_R (x)`.
    pub lhs: f64,
    /// `R^{-s} ((-Δ)^s φ)(R^{-1/2} x)`.
    pub rhs: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub samples: Vec<ScalingSample>,
    pub max_rel_error: f64,
    pub passed: bool,
}

/// Checks `(-Δ)^s φ_R(x) = R^{-s} ((-Δ)^s φ)(R^{-1/2} x)` at `samples` random `(R, x, s)`
/// per dimension `n ∈ {1, 2}`, with `R ∈ [0.1, 1000]` log-uniform, `|x| ≤ 5 R^{1/2}` and
/// `s ∈ [0.1, 0.9]`.
pub fn verify_scaling_identity(samples: usize, seed: u64, controls: &FracLapControls) -> Result<ScalingReport> {
    if samples == 0 {
        return Err(Error::domain("need at least one sample"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<(u32, f64, f64, f64)> = [1, 2]
        .into_iter()
        .flat_map(|n| (0..samples).map(move |_| n))
        .map(|n| {
            let r: f64 = 10f64.powf(rng.gen_range(-1.0..3.0));
            let x = rng.gen_range(0.0..5.0) * r.sqrt();
            let s = rng.gen_range(0.1..0.9);
            (n, r, x, s)
        })
        .collect();
    let samples = draws
        .into_par_iter()
        .map(|(n, r, x, s)| -> Result<ScalingSample> {
            let root = r.sqrt();
            let lhs = fractional_laplacian_direct(&PhiPower { power: 1.0, scale: root }, n, s, x, controls)?;
            let unit = fractional_laplacian_direct(&PhiPower { power: 1.0, scale: 1.0 }, n, s, x / root, controls)?;
            let rhs = r.powf(-s) * unit;
            let rel_error = (lhs - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE);
            Ok(ScalingSample { n, r, x, s, lhs, rhs, rel_error })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_rel_error = samples.iter().map(|s| s.rel_error).fold(0.0, f64::max);
    Ok(ScalingReport {
        passed: max_rel_error < SCALING_TOLERANCE,
        samples,
        max_rel_error,
    })
}

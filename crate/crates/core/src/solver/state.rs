use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Transformer};

/// Fourier coefficients of `(u, u_t, v, v_t)` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub t: f64,
    pub u: Vec<Complex64>,
    pub u_t: Vec<Complex64>,
    pub v: Vec<Complex64>,
    pub v_t: Vec<Complex64>,
}

impl FieldState {
    pub fn zeros(grid: &GridSpec) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); grid.len()];
        Self {
            t: 0.0,
            u: z.clone(),
            u_t: z.clone(),
            v: z.clone(),
            v_t: z,
        }
    }

    pub fn fields(&self) -> [&[Complex64]; 4] {
        [&self.u, &self.u_t, &self.v, &self.v_t]
    }

    pub fn is_finite(&self) -> bool {
        self.fields()
            .iter()
            .all(|f| f.iter().all(|c| c.re.is_finite() && c.im.is_finite()))
    }

    /// Largest violation of `ŵ(-k) = conj(ŵ(k))`, relative to the largest coefficient.
    pub fn conjugate_symmetry_defect(&self, grid: &GridSpec) -> f64 {
        let n = grid.points;
        let mirror = |flat: usize| -> usize {
            if grid.n == 1 {
                (n - flat) % n
            } else {
                let (i, j) = (flat / n, flat % n);
                ((n - i) % n) * n + (n - j) % n
            }
        };
        let mut worst = 0.0_f64;
        for f in self.fields() {
            let scale = f.iter().map(|c| c.norm()).fold(0.0, f64::max);
            if scale == 0.0 {
                continue;
            }
            for (k, c) in f.iter().enumerate() {
                worst = worst.max((c - f[mirror(k)].conj()).norm() / scale);
            }
        }
        worst
    }
}

/// Initial data shapes. Gaussians are `amplitude exp(-|x - center|^2 / width^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    /// `u0 = v0` a Gaussian bump, zero velocities.
    GaussianBump {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: Vec<f64>,
    },
    /// `u0 = v0 = 0`, `u1 = v1` a centred Gaussian with positive mean.
    ZeroDisplacementPositiveVelocity { amplitude: f64, width: f64 },
}

impl InitialData {
    pub fn width(&self) -> f64 {
        match self {
            InitialData::GaussianBump { width, .. }
            | InitialData::ZeroDisplacementPositiveVelocity { width, .. } => *width,
        }
    }
}

/// Scales the data by `eps` and transforms it to coefficients.
pub fn make_initial_data(
    kind: &InitialData,
    eps: f64,
    grid: &GridSpec,
    transformer: &Transformer,
) -> Result<FieldState> {
    let width = kind.width();
    if !(width > 0.0) {
        return Err(Error::config(format!("width must be positive, got {width}")));
    }
    if width > grid.half_length / 4.0 {
        return Err(Error::config(format!(
            "width {width} exceeds L/4 = {}; enlarge the box",
            grid.half_length / 4.0
        )));
    }
    if !eps.is_finite() {
        return Err(Error::config(format!("eps must be finite, got {eps}")));
    }
    let mut state = FieldState::zeros(grid);
    let gaussian = |amp: f64, center: Vec<f64>| -> Result<Vec<Complex64>> {
        let values = grid.sample(|x| {
            let r2: f64 = x
                .iter()
                .enumerate()
                .map(|(i, xi)| (xi - center.get(i).copied().unwrap_or(0.0)).powi(2))
                .sum();
            eps * amp * (-r2 / (width * width)).exp()
        });
        transformer.forward_real(&values)
    };
    match kind {
        InitialData::GaussianBump {
            amplitude, center, ..
        } => {
            if center.len() > grid.n as usize {
                return Err(Error::config("center has more coordinates than the grid dimension"));
            }
            state.u = gaussian(*amplitude, center.clone())?;
            state.v = state.u.clone();
        }
        InitialData::ZeroDisplacementPositiveVelocity { amplitude, .. } => {
            if !(*amplitude > 0.0) {
                return Err(Error::config("velocity amplitude must be positive"));
            }
            state.u_t = gaussian(*amplitude, Vec::new())?;
            state.v_t = state.u_t.clone();
        }
    }
    Ok(state)
}

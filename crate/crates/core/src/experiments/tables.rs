use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{branch_point, eval_kernels, KernelPoint};
use crate::moduli::{classify_system, Classification, Divergence, ModulusSpec, SystemParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelTableConfig {
    pub sigma: f64,
    pub times: Vec<f64>,
    pub xi_min: f64,
    pub xi_max: f64,
    /// Log-spaced `ξ` samples per time.
    pub points: usize,
    /// Adds `ξ = 0` and, when it lies in range, the branch point.
    #[serde(default = "yes")]
    pub include_special: bool,
}

fn yes() -> bool {
    true
}

impl KernelTableConfig {
    pub fn validate(&self) -> Result<()> {
        crate::moduli::check_sigma(self.sigma).map_err(|e| Error::config(e.to_string()))?;
        if self.times.is_empty() || self.times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(Error::config("times must be a nonempty list of finite t >= 0"));
        }
        if !(self.xi_min > 0.0 && self.xi_max > self.xi_min && self.xi_max.is_finite()) {
            return Err(Error::config("need 0 < xi_min < xi_max"));
        }
        if self.points < 2 {
            return Err(Error::config("points must be at least 2"));
        }
        Ok(())
    }

    pub fn xi_grid(&self) -> Vec<f64> {
        let (a, b) = (self.xi_min.ln(), self.xi_max.ln());
        let mut xs: Vec<f64> = (0..self.points)
            .map(|i| (a + (b - a) * i as f64 / (self.points - 1) as f64).exp())
            .collect();
        if self.include_special {
            xs.push(0.0);
            if let Some(xb) = branch_point(self.sigma) {
                if xb >= self.xi_min && xb <= self.xi_max {
                    xs.push(xb);
                }
            }
        }
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs
    }
}

/// `K0, K1, R0, R1` for every time and `ξ` of the table, time-major.
pub fn kernel_table(cfg: &KernelTableConfig) -> Result<Vec<KernelPoint>> {
    cfg.validate()?;
    let xs = cfg.xi_grid();
    cfg.times
        .iter()
        .flat_map(|&t| xs.iter().map(move |&xi| eval_kernels(t, xi, cfg.sigma)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyConfig {
    pub system: SystemParams,
    pub mu1: ModulusSpec,
    pub mu2: ModulusSpec,
}

pub fn classify(cfg: &ClassifyConfig) -> Result<Classification> {
    classify_system(&cfg.system, &cfg.mu1, &cfg.mu2)
}

/// A classification flattened into table columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifyRow {
    pub verdict: crate::moduli::Verdict,
    pub integral: &'static str,
    pub integral_value: Option<f64>,
    pub method: crate::moduli::Method,
    pub regularity_mu1: bool,
    pub regularity_mu2: bool,
    pub ratio_decreasing: Option<bool>,
    pub rationale: String,
}

impl From<&Classification> for ClassifyRow {
    fn from(c: &Classification) -> Self {
        let (integral, integral_value) = match c.integral {
            Divergence::Diverges { .. } => ("diverges", None),
            Divergence::Converges { value, .. } => ("converges", Some(value)),
        };
        ClassifyRow {
            verdict: c.verdict,
            integral,
            integral_value,
            method: c.integral.method(),
            regularity_mu1: c.regularity_mu1.passed,
            regularity_mu2: c.regularity_mu2.passed,
            ratio_decreasing: c.ratio_decreasing,
            rationale: c.rationale.clone(),
        }
    }
}

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::moduli::SystemParams;
use crate::testfunctions::{
    envelope_ladder, moment_asymptotics, r_ladder, verify_lemma_bound_8, verify_lemma_bound_9,
    verify_scaling_identity, BoundReport, FracLapControls, TestFunctionFamily, MOMENT_SLOPE_TOLERANCE,
    REFINEMENT_TOLERANCE, SCALING_TOLERANCE,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingSection {
    /// Random configurations per dimension.
    pub samples: usize,
    pub rel_tol: f64,
}

impl Default for ScalingSection {
    fn default() -> Self {
        Self {
            samples: 20,
            rel_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Lemma8Section {
    pub powers: Vec<f64>,
    pub n: u32,
    pub points: usize,
    pub r_max: f64,
}

impl Default for Lemma8Section {
    fn default() -> Self {
        Self {
            powers: vec![1.0, 2.0, 3.0, 4.0],
            n: 2,
            points: 200,
            r_max: 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lemma9Case {
    pub s: f64,
    pub n: u32,
    /// Defaults to `n + 2s`.
    #[serde(default)]
    pub power: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Lemma9Section {
    pub cases: Vec<Lemma9Case>,
    pub points: usize,
    pub r_max: f64,
    pub rel_tol: f64,
}

impl Default for Lemma9Section {
    fn default() -> Self {
        Self {
            cases: vec![
                Lemma9Case { s: 0.25, n: 1, power: None },
                Lemma9Case { s: 0.25, n: 2, power: None },
                Lemma9Case { s: 0.5, n: 2, power: None },
            ],
            points: 200,
            r_max: 100.0,
            rel_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentCase {
    pub n: u32,
    pub sigma: f64,
    #[serde(default)]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MomentSection {
    pub cases: Vec<MomentCase>,
    /// Exponents `(p*, q*)` fixing `ν`; the fitted slopes do not depend on them.
    pub p: f64,
    pub q: f64,
    /// `log10` of the smallest and largest `R`.
    pub log_r: (f64, f64),
    pub points: usize,
}

impl Default for MomentSection {
    fn default() -> Self {
        Self {
            cases: vec![
                MomentCase { n: 1, sigma: 0.25, delta: None },
                MomentCase { n: 2, sigma: 0.25, delta: None },
                MomentCase { n: 2, sigma: 0.5, delta: None },
            ],
            p: 2.0,
            q: 2.0,
            log_r: (2.0, 5.0),
            points: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvelopeSection {
    pub n: u32,
    pub sigma: f64,
    pub p: f64,
    pub q: f64,
    pub r_values: Vec<f64>,
    pub radial_points: usize,
    pub time_points: usize,
    pub spread_tolerance: f64,
    pub rel_tol: f64,
}

impl Default for EnvelopeSection {
    fn default() -> Self {
        Self {
            n: 2,
            sigma: 0.5,
            p: 2.0,
            q: 2.0,
            r_values: vec![1e2, 1e3, 1e4],
            radial_points: 33,
            time_points: 41,
            spread_tolerance: 0.10,
            rel_tol: 1e-7,
        }
    }
}

/// Which verifiers to run and with what resolution.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestfnConfig {
    pub scaling: Option<ScalingSection>,
    pub lemma8: Option<Lemma8Section>,
    pub lemma9: Option<Lemma9Section>,
    pub moments: Option<MomentSection>,
    pub envelopes: Option<EnvelopeSection>,
}

impl TestfnConfig {
    /// Every section with its defaults.
    pub fn full() -> Self {
        Self {
            scaling: Some(ScalingSection::default()),
            lemma8: Some(Lemma8Section::default()),
            lemma9: Some(Lemma9Section::default()),
            moments: Some(MomentSection::default()),
            envelopes: Some(EnvelopeSection::default()),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.scaling.is_none()
            && self.lemma8.is_none()
            && self.lemma9.is_none()
            && self.moments.is_none()
            && self.envelopes.is_none()
    }
}

/// One verifier outcome: the measured quantity against its threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub check: &'static str,
    pub case: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
    pub detail: String,
    pub error: Option<String>,
}

impl CheckRow {
    fn error(check: &'static str, case: String, e: &Error) -> Self {
        CheckRow {
            check,
            case,
            value: f64::NAN,
            threshold: f64::NAN,
            passed: false,
            detail: String::new(),
            error: Some(e.to_string()),
        }
    }
}

fn bound_row(check: &'static str, case: String, r: BoundReport) -> CheckRow {
    CheckRow {
        check,
        case,
        value: ((r.c_max_refined - r.c_max) / r.c_max).abs(),
        threshold: REFINEMENT_TOLERANCE,
        passed: r.passed,
        detail: format!(
            "c_max {:.6e} refined {:.6e} at |x| = {:.3}; tail slope {:.4}, deceleration {:.3}; finite {} stable {} bounded {}",
            r.c_max, r.c_max_refined, r.argmax, r.tail_slope, r.deceleration, r.finite, r.stable, r.bounded
        ),
        error: None,
    }
}

/// Runs the configured verifiers; failures of one do not stop the others.
pub fn testfn_suite(cfg: &TestfnConfig, seed: u64) -> Vec<CheckRow> {
    let mut rows = Vec::new();
    if let Some(s) = &cfg.scaling {
        let c = FracLapControls { rel_tol: s.rel_tol, ..Default::default() };
        let case = format!("{} samples per dimension, seed {seed}", s.samples);
        rows.push(match verify_scaling_identity(s.samples, seed, &c) {
            Ok(r) => CheckRow {
                check: "scaling_identity",
                case,
                value: r.max_rel_error,
                threshold: SCALING_TOLERANCE,
                passed: r.passed,
                detail: format!("{} configurations", r.samples.len()),
                error: None,
            },
            Err(e) => CheckRow::error("scaling_identity", case, &e),
        });
    }
    if let Some(s) = &cfg.lemma8 {
        for &q in &s.powers {
            for order in [1u8, 2] {
                let case = format!("q {q} order {order} n {}", s.n);
                rows.push(match verify_lemma_bound_8(q, order, s.n, s.points, s.r_max) {
                    Ok(r) => bound_row("lemma8", case, r),
                    Err(e) => CheckRow::error("lemma8", case, &e),
                });
            }
        }
    }
    if let Some(s) = &cfg.lemma9 {
        let c = FracLapControls { rel_tol: s.rel_tol, ..Default::default() };
        for case in &s.cases {
            let power = case.power.unwrap_or(case.n as f64 + 2.0 * case.s);
            let label = format!("s {} n {} power {power}", case.s, case.n);
            rows.push(match verify_lemma_bound_9(case.s, case.n, power, s.points, s.r_max, &c) {
                Ok(r) => bound_row("lemma9", label, r),
                Err(e) => CheckRow::error("lemma9", label, &e),
            });
        }
    }
    if let Some(s) = &cfg.moments {
        let ladder = r_ladder(s.log_r.0, s.log_r.1, s.points);
        for case in &s.cases {
            let label = format!("n {} sigma {}", case.n, case.sigma);
            let rep = SystemParams::new(case.sigma, case.n, s.p, s.q)
                .and_then(|sys| TestFunctionFamily::new(&sys, 1.0, case.delta))
                .and_then(|fam| moment_asymptotics(&fam, &ladder));
            match rep {
                Ok(r) => {
                    let mut fits = vec![("moment1", Some(r.fit1))];
                    fits.push(("moment2", r.fit2));
                    for (name, fit) in fits {
                        let Some(f) = fit else { continue };
                        rows.push(CheckRow {
                            check: name,
                            case: format!("{label} delta {:.4}", r.delta),
                            value: (f.slope - r.theory).abs(),
                            threshold: MOMENT_SLOPE_TOLERANCE,
                            passed: (f.slope - r.theory).abs() <= MOMENT_SLOPE_TOLERANCE,
                            detail: format!("slope {:.5} theory {:.5} r2 {:.6}", f.slope, r.theory, f.r_squared),
                            error: None,
                        });
                    }
                }
                Err(e) => rows.push(CheckRow::error("moment1", label, &e)),
            }
        }
    }
    if let Some(s) = &cfg.envelopes {
        let label = format!("n {} sigma {}", s.n, s.sigma);
        let c = FracLapControls { rel_tol: s.rel_tol, ..Default::default() };
        let rep = SystemParams::new(s.sigma, s.n, s.p, s.q)
            .and_then(|sys| TestFunctionFamily::new(&sys, s.r_values[0], None))
            .and_then(|fam| {
                envelope_ladder(&fam, &s.r_values, s.radial_points, s.time_points, s.spread_tolerance, &c)
            });
        rows.push(match rep {
            Ok(r) => CheckRow {
                check: "envelopes",
                case: label,
                value: r.combined_spread,
                threshold: s.spread_tolerance,
                passed: r.passed,
                detail: r
                    .reports
                    .iter()
                    .map(|e| {
                        format!(
                            "R {:e}: dt {:.3e} dtt {:.3e} lap {:.3e} frac {:.3e} combined {:.4e}",
                            e.r, e.dt, e.dtt, e.laplacian, e.fractional, e.combined
                        )
                    })
                    .collect::<Vec<_>>()
                    .join("; "),
                error: None,
            },
            Err(e) => CheckRow::error("envelopes", label, &e),
        });
    }
    rows
}

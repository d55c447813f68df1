use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::Serialize;

use fractodamp::experiments::{
    box_check, classify, curve_sweep, decay_sweep, kernel_table, lifespan_sweep, norm_rows, persist, simulate, testfn_suite,
    ClassifyConfig, ClassifyRow, CurveConfig, DecayConfig, ExperimentKind, ExperimentManifest, KernelTableConfig,
    LifespanConfig, OnExisting, SimulationConfig, TestfnConfig, FINITE_HORIZON_CAVEAT, SHAPE_CAVEAT,
};
use fractodamp::{Error, Result};

use crate::{Cli, Command, EXIT_ACCEPTANCE};

/// Run log, echoed to stderr when verbose.
struct Log {
    lines: Vec<String>,
    echo: bool,
    start: Instant,
}

impl Log {
    fn new(echo: bool) -> Self {
        Self {
            lines: Vec::new(),
            echo,
            start: Instant::now(),
        }
    }

    fn line(&mut self, text: impl Into<String>) {
        let text = format!("[{:9.3}s] {}", self.start.elapsed().as_secs_f64(), text.into());
        if self.echo {
            eprintln!("{text}");
        }
        self.lines.push(text);
    }
}

/// What a subcommand produced, before persistence.
struct Outcome<R> {
    rows: Vec<R>,
    summary: Vec<String>,
    failures: Vec<String>,
    notes: Vec<String>,
}

impl<R> Outcome<R> {
    fn new(rows: Vec<R>) -> Self {
        Self {
            rows,
            summary: Vec::new(),
            failures: Vec::new(),
            notes: Vec::new(),
        }
    }
}

pub fn load_config<C: DeserializeOwned>(path: &Path) -> Result<C> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))
}

pub fn dispatch(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Classify { config } => {
            let cfg: ClassifyConfig = load_config(config)?;
            execute(cli, ExperimentKind::Classify, &cfg, |cfg, log| {
                let c = classify(cfg)?;
                log.line(format!("verdict {:?}", c.verdict));
                let row = ClassifyRow::from(&c);
                let mut out = Outcome::new(vec![row.clone()]);
                out.summary.push(format!("verdict: {}", snake(&row.verdict)));
                out.summary.push(format!(
                    "critical integral: {} ({})",
                    match row.integral_value {
                        Some(v) => format!("converges to {v:.6e}"),
                        None => "diverges".into(),
                    },
                    snake(&row.method)
                ));
                out.summary.push(format!(
                    "regularity ({}): mu1 {} (worst ratio {:.3e}), mu2 {} (worst ratio {:.3e})",
                    snake(&c.regularity_mu1.mode),
                    pass(c.regularity_mu1.passed),
                    c.regularity_mu1.worst_ratio,
                    pass(c.regularity_mu2.passed),
                    c.regularity_mu2.worst_ratio
                ));
                if let Some(d) = c.ratio_decreasing {
                    out.summary.push(format!("mu1/mu2 decreasing: {d}"));
                }
                out.summary.push(c.rationale.clone());
                Ok(out)
            })
        }
        Command::Kernels { config } => {
            let cfg: KernelTableConfig = load_config(config)?;
            cfg.validate()?;
            execute(cli, ExperimentKind::Kernels, &cfg, |cfg, log| {
                let rows = kernel_table(cfg)?;
                log.line(format!("{} kernel samples", rows.len()));
                let mut out = Outcome::new(rows);
                out.summary.push(format!(
                    "{} rows: {} times x {} frequencies",
                    out.rows.len(),
                    cfg.times.len(),
                    cfg.xi_grid().len()
                ));
                Ok(out)
            })
        }
        Command::Simulate { config } => {
            let cfg: SimulationConfig = load_config(config)?;
            cfg.validate()?;
            execute(cli, ExperimentKind::Simulate, &cfg, |cfg, log| {
                let res = simulate(cfg)?;
                let d = res.diagnostics;
                log.line(format!(
                    "{:?}; {} accepted, {} rejected, steps in [{:e}, {:e}], dealiased energy fraction {:e}",
                    res.status, d.accepted, d.rejected, d.min_step, d.max_step, d.dealias_energy_fraction
                ));
                let rows = norm_rows(&res);
                let mut out = Outcome::new(rows);
                out.summary.push(format!("status: {}", toml_inline(&res.status)));
                if let Some(last) = out.rows.last() {
                    out.summary.push(format!(
                        "t = {}: |u|_2 {:.6e} |u|_inf {:.6e} |v|_2 {:.6e} |v|_inf {:.6e}",
                        last.t, last.u_l2, last.u_linf, last.v_l2, last.v_linf
                    ));
                }
                out.summary.push(format!("steps: {} accepted, {} rejected", d.accepted, d.rejected));
                if cfg.box_check {
                    let b = box_check(cfg, &res)?;
                    let line = format!(
                        "doubled box (L = {} -> {}): max relative norm change {:.3e} over {} samples up to t = {:.4}; L_min heuristic {:.2}",
                        b.half_length,
                        2.0 * b.half_length,
                        b.max_rel_change,
                        b.samples,
                        b.horizon,
                        b.l_min
                    );
                    log.line(line.clone());
                    out.summary.push(line.clone());
                    if !b.passed {
                        out.failures.push(format!("box dependence: {line}"));
                    }
                }
                Ok(out)
            })
        }
        Command::Decay { config } => {
            let cfg: DecayConfig = load_config(config)?;
            cfg.validate()?;
            execute(cli, ExperimentKind::Decay, &cfg, |cfg, log| {
                let rows = decay_sweep(cfg)?;
                let mut out = Outcome::new(rows);
                for r in &out.rows {
                    let line = match &r.error {
                        Some(e) => format!("case {} (n {}, sigma {}) {:?}: error: {e}", r.case, r.n, r.sigma, r.norm),
                        None => format!(
                            "case {} (n {}, sigma {}, {}) {}: slope {:.4} +- {:.4}, theory {:.4}{}",
                            r.case,
                            r.n,
                            r.sigma,
                            r.data,
                            snake(&r.norm),
                            r.slope,
                            r.slope_stderr,
                            r.theory,
                            match (r.passed, r.tolerance) {
                                (Some(p), Some(t)) => format!(" (tolerance {t}: {})", pass(p)),
                                _ => String::new(),
                            }
                        ),
                    };
                    log.line(line.clone());
                    out.summary.push(line.clone());
                    if r.passed == Some(false) {
                        out.failures.push(line);
                    }
                }
                Ok(out)
            })
        }
        Command::Curve { config } => {
            let cfg: CurveConfig = load_config(config)?;
            cfg.validate()?;
            execute(cli, ExperimentKind::Curve, &cfg, |cfg, log| {
                let rows = curve_sweep(cfg)?;
                let mut out = Outcome::new(rows);
                out.notes.push(FINITE_HORIZON_CAVEAT.into());
                for r in &out.rows {
                    let line = format!(
                        "(p, q) = ({}, {}) mu1 {} mu2 {}: {} position, analytic {}, observed {} at t = {:.4}{}",
                        r.p,
                        r.q,
                        r.mu1,
                        r.mu2,
                        snake(&r.position),
                        r.analytic,
                        r.status,
                        r.t_end,
                        match &r.error {
                            Some(e) => format!(", error: {e}"),
                            None => String::new(),
                        }
                    );
                    log.line(line.clone());
                    out.summary.push(line.clone());
                    if r.agrees == Some(false) {
                        out.failures.push(format!("disagreement: {line}"));
                    }
                }
                out.summary.push(format!("note: {FINITE_HORIZON_CAVEAT}"));
                Ok(out)
            })
        }
        Command::Lifespan { config } => {
            let cfg: LifespanConfig = load_config(config)?;
            cfg.validate()?;
            execute(cli, ExperimentKind::Lifespan, &cfg, |cfg, log| {
                let rep = lifespan_sweep(cfg)?;
                let mut out = Outcome::new(rep.rows.clone());
                out.notes.push(SHAPE_CAVEAT.into());
                for r in &rep.rows {
                    let line = format!(
                        "eps {:.6}: {} T = {:.6}{}, threshold shift {}, analytic bound {}",
                        r.eps,
                        r.status,
                        r.t_detect,
                        if r.censored { " (lower bound)" } else { "" },
                        r.threshold_shift.map_or("n/a".into(), |s| format!("{:.3}%", 100.0 * s)),
                        r.lifespan_bound.map_or("n/a".into(), |b| format!("{b:.6e}"))
                    );
                    log.line(line.clone());
                    out.summary.push(line);
                }
                match &rep.fit {
                    Some(f) => out.summary.push(format!(
                        "fit of log T^(1/(1-sigma)) against eps^-alpha over {} uncensored points: slope {:.5}, R^2 {:.5}",
                        f.points, f.slope, f.r_squared
                    )),
                    None => out.summary.push(format!("only {} uncensored points; no fit", rep.uncensored)),
                }
                for (ok, what) in [
                    (rep.monotone, "T_detect strictly increasing as eps decreases"),
                    (rep.slope_positive, "positive slope"),
                    (rep.linear, "R^2 above 0.9"),
                    (rep.threshold_robust, "T_detect moves less than 5% under the raised threshold"),
                ] {
                    if !ok {
                        out.failures.push(format!("lifespan: not satisfied: {what}"));
                    }
                }
                out.summary.push(format!("note: {SHAPE_CAVEAT}"));
                Ok(out)
            })
        }
        Command::Testfn { config } => {
            let cfg: TestfnConfig = match config {
                Some(p) => load_config(p)?,
                None => TestfnConfig::full(),
            };
            if cfg.is_empty() {
                return Err(Error::Config("testfn config selects no checks".into()));
            }
            let seed = cli.seed;
            execute(cli, ExperimentKind::Testfn, &cfg, move |cfg, log| {
                let rows = testfn_suite(cfg, seed);
                let mut out = Outcome::new(rows);
                for r in &out.rows {
                    let line = format!(
                        "{} [{}]: {} (value {:.4e}, threshold {:.4e}){}",
                        r.check,
                        r.case,
                        pass(r.passed),
                        r.value,
                        r.threshold,
                        match &r.error {
                            Some(e) => format!(" error: {e}"),
                            None => format!(" {}", r.detail),
                        }
                    );
                    log.line(line.clone());
                    out.summary.push(line.clone());
                    if !r.passed {
                        out.failures.push(line);
                    }
                }
                Ok(out)
            })
        }
    }
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

/// Serde's snake_case name of a unit enum value.
fn snake<T: Serialize>(v: &T) -> String {
    toml::Value::try_from(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_else(|| "?".into())
}

fn toml_inline<T: Serialize>(v: &T) -> String {
    toml::Value::try_from(v).map(|v| v.to_string()).unwrap_or_else(|_| "?".into())
}

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn execute<C, R, F>(cli: &Cli, kind: ExperimentKind, cfg: &C, compute: F) -> Result<u8>
where
    C: Serialize + Sync,
    R: Serialize + Send,
    F: FnOnce(&C, &mut Log) -> Result<Outcome<R>> + Send,
{
    let manifest = ExperimentManifest::new(kind, cfg, cli.seed)?;
    let dir = manifest.directory(&cli.out);
    if cli.dry_run {
        println!("# {} run, manifest {}", kind.name(), manifest.hash);
        println!("# output directory {}", dir.display());
        print!("{}", toml::to_string(cfg)?);
        return Ok(0);
    }
    let policy: OnExisting = cli.on_existing.into();
    if let Some(existing) = manifest.existing(&cli.out) {
        if policy == OnExisting::Refuse {
            return Err(Error::Config(format!(
                "{} already holds a run with this manifest",
                existing.display()
            )));
        }
        let earlier = ExperimentManifest::load(&existing.join(fractodamp::experiments::MANIFEST_FILE))?;
        println!("reusing {}", existing.display());
        return Ok(report_failures(&earlier.failures));
    }

    let pool = thread_pool(cli.threads)?;
    let mut log = Log::new(cli.verbose > 0);
    log.line(format!("{} run {} ({})", kind.name(), manifest.hash, manifest.code_version));
    log.line(format!("threads {}", pool.current_num_threads()));
    let result = pool.install(|| compute(cfg, &mut log));
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            log.line(format!("failed: {e}"));
            return Err(e);
        }
    };
    let mut manifest = manifest;
    manifest.notes = outcome.notes.clone();
    manifest.failures = outcome.failures.clone();
    log.line(format!("{} rows, {} acceptance failures", outcome.rows.len(), outcome.failures.len()));
    let saved = persist(&cli.out, &manifest, &outcome.rows, &log.lines, policy)?;
    for line in &outcome.summary {
        println!("{line}");
    }
    println!("output: {}", saved.directory.display());
    Ok(report_failures(&outcome.failures))
}

fn report_failures(failures: &[String]) -> u8 {
    for f in failures {
        println!("FAILED: {f}");
    }
    if failures.is_empty() {
        0
    } else {
        EXIT_ACCEPTANCE
    }
}


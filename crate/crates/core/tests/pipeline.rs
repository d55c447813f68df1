//! One small experiment end to end: run, persist, reload.

use fractodamp::experiments::{
    norm_rows, persist, simulate, ExperimentKind, ExperimentManifest, OnExisting, SimulationConfig, DATA_FILE,
    MANIFEST_FILE,
};
use fractodamp::solver::RunStatus;

const CONFIG: &str = r#"
system = { sigma = 0.25, n = 1, p = 2.0, q = 4.0 }
mu1 = { family = "power_log", alpha = 1.0 }
mu2 = { family = "constant", value = 1.0 }
eps = 0.05

[scenario]
t_max = 20.0
grid = { n = 1, half_length = 40.0, points = 128 }
data = { kind = "gaussian_bump", amplitude = 1.0, width = 2.0 }

[scenario.controls]
sample = { kind = "uniform", interval = 1.0 }
"#;

#[test]
fn simulate_persist_reload() {
    let cfg: SimulationConfig = toml::from_str(CONFIG).unwrap();
    cfg.validate().unwrap();
    let res = simulate(&cfg).unwrap();
    assert_eq!(res.status, RunStatus::ReachedTmax);
    let rows = norm_rows(&res);
    assert_eq!(rows.len(), 21);
    assert!(rows.windows(2).all(|w| w[1].t > w[0].t));
    assert!(rows.iter().all(|r| r.u_l2.is_finite() && r.v_linf.is_finite()));

    let dir = tempfile::tempdir().unwrap();
    let manifest = ExperimentManifest::new(ExperimentKind::Simulate, &cfg, 0).unwrap();
    let saved = persist(dir.path(), &manifest, &rows, &["run".into()], OnExisting::Refuse).unwrap();
    assert_eq!(saved.rows_written, rows.len());

    let loaded = ExperimentManifest::load(&saved.directory.join(MANIFEST_FILE)).unwrap();
    assert_eq!(loaded.hash, manifest.hash);
    // The stored parameters reproduce the config and therefore the hash.
    let back: SimulationConfig = loaded.parameters.clone().try_into().unwrap();
    assert_eq!(
        ExperimentManifest::new(ExperimentKind::Simulate, &back, 0).unwrap().hash,
        manifest.hash
    );
    let csv = std::fs::read_to_string(saved.directory.join(DATA_FILE)).unwrap();
    assert_eq!(csv.lines().count(), rows.len() + 1);
    assert!(csv.lines().skip(1).all(|l| l.starts_with(&manifest.hash)));
}

//! Experiment suites with persistent, reproducible outputs.
//!
//! Each suite takes a config document, returns plain rows, and leaves persistence to
//! [`persist`], which files them under `out/<kind>/<manifest hash>/`.

mod curve;
mod decay;
mod lifespan;
mod manifest;
mod runs;
mod simulate;
mod tables;
mod testfn;

pub use curve::{curve_position, curve_sweep, CurvePosition, CurveConfig, CurveRow, ExponentPair, FINITE_HORIZON_CAVEAT};
pub use decay::{
    decay_case, decay_sweep, decay_theory, DecayCase, DecayConfig, DecayRow, DecayTheory, NormKind, L2_TOLERANCE,
    LINF_TOLERANCE,
};
pub use lifespan::{
    lifespan_sweep, summarize, BoundConstants, LifespanConfig, LifespanReport, LifespanRow, MIN_LADDER, MIN_R_SQUARED,
    SHAPE_CAVEAT,
};
pub use manifest::{
    code_version, manifest_hash, persist, rows_to_csv, ExperimentKind, ExperimentManifest, OnExisting, OutputPaths,
    Persisted, DATA_FILE, LOG_FILE, MANIFEST_FILE,
};
pub use runs::{
    box_l_min, decaying_over_final_decade, modulus_label, threshold_check, BoxCheck, ModulusPair, Scenario,
    ThresholdCheck, BOX_TOLERANCE, THRESHOLD_SHIFT_TOLERANCE,
};
pub use simulate::{box_check, norm_rows, simulate, NormRow, SimulationConfig};
pub use tables::{classify, kernel_table, ClassifyConfig, ClassifyRow, KernelTableConfig};
pub use testfn::{
    testfn_suite, CheckRow, EnvelopeSection, Lemma8Section, Lemma9Case, Lemma9Section, MomentCase, MomentSection,
    ScalingSection, TestfnConfig,
};

//! Moduli of continuity, the integral criticality test, critical-curve algebra and the
//! lifespan scaling functions.

mod criticality;
mod curve;
mod family;
mod lifespan;
mod regularity;

pub use criticality::{
    classify_system, critical_integral, Classification, Divergence, Method, Verdict,
    DIVERGENCE_RATIO,
};
pub use curve::{curve_q_from_p, p_crit, BetaExponent, SystemParams, CURVE_TOLERANCE};
pub use family::{iterated_log_ceiling, ModulusFamily, ModulusSpec, DEFAULT_CUTOFF, LOG_FAMILY_FLOOR};
pub use lifespan::{
    ell_weight, lifespan_bound, psi, psi_accumulated, psi_inverse, EllVariant, EllWeight,
    ExponentKind, LifespanModel, TimeExponent, DEFAULT_C_SCALE, DEFAULT_R0,
};
pub use regularity::{check_regularity, RegularityMode, RegularityReport};

pub(crate) use curve::check_sigma;

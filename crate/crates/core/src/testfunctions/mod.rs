//! Test functions of the blow-up argument and numerical checks of their lemmas.

mod envelopes;
mod fraclap;
mod lemmas;
mod moments;
mod profile;
mod scaling;

pub use envelopes::{derivative_envelopes, envelope_ladder, EnvelopeReport, LadderReport};
pub use fraclap::{
    fractional_laplacian_direct, normalization_constant, ConstantProfile, FracLapControls, Gaussian, PhiPower,
    RadialProfile,
};
pub use lemmas::{
    lemma8_ratio, radial_grid, verify_lemma_bound_8, verify_lemma_bound_9, BoundReport, DECELERATION_TOLERANCE,
    REFINEMENT_TOLERANCE, TREND_TOLERANCE,
};
pub use moments::{moment_asymptotics, r_ladder, MomentReport, MOMENT_SLOPE_TOLERANCE};
pub use profile::{
    delta_lower, eta, eta_star, eta_with_derivatives, phi, phi_power, phi_power_derivatives, phi_star, ScaledValues,
    TestFunctionFamily,
};
pub use scaling::{verify_scaling_identity, ScalingReport, ScalingSample, SCALING_TOLERANCE};

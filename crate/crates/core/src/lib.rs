//! Numerical laboratory for weakly coupled structurally damped wave systems
//!
//! ```text
//! u_tt - Δu + (-Δ)^σ u_t = |v|^p μ1(|v|)
//! v_tt - Δv + (-Δ)^σ v_t = |u|^q μ2(|u|)
//! ```
//!
//! with `σ ∈ [0, 1/2]`.

pub mod error;
pub mod experiments;
pub mod fit;
pub mod grid;
pub mod kernels;
pub mod moduli;
pub mod quadrature;
pub mod solver;
pub mod testfunctions;

pub use error::{Error, Result};

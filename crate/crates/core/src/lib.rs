//! Quasifree states of non-interacting bosons in a harmonic trap and in free
//! space: thermal two-point forms, resolvent-word expectations, the
//! thermodynamic and condensation limits, condensation diagnostics, and a
//! truncated Fock-space oracle for cross-checking the closed forms.
//!
//! Every routine is generic over the real scalar (`f32` or `f64`); the
//! aliases below fix the common instantiations.

// NaN-rejecting guards are written as negated comparisons.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod condensate;
pub mod equilibrium;
pub mod error;
pub mod fock_oracle;
pub mod quadrature;
pub mod quasifree;
pub mod scalar;
pub mod single_particle;
pub mod special;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type TestFunctionF64 = single_particle::TestFunction<f64>;
pub type TestFunctionF32 = single_particle::TestFunction<f32>;
pub type HamiltonianModelF64 = single_particle::HamiltonianModel<f64>;
pub type HamiltonianModelF32 = single_particle::HamiltonianModel<f32>;
pub type EquilibriumF64 = equilibrium::Equilibrium<f64>;
pub type EquilibriumF32 = equilibrium::Equilibrium<f32>;
pub type QuasifreeSpecF64 = quasifree::QuasifreeSpec<f64>;
pub type QuasifreeSpecF32 = quasifree::QuasifreeSpec<f32>;
pub type ResolventWordF64 = quasifree::ResolventWord<f64>;
pub type ResolventWordF32 = quasifree::ResolventWord<f32>;
pub type RegionF64 = condensate::Region<f64>;
pub type RegionF32 = condensate::Region<f32>;
pub type TruncatedFockF64 = fock_oracle::TruncatedFock<f64>;
pub type TruncatedFockF32 = fock_oracle::TruncatedFock<f32>;

//! Pseudospectral machinery for the nonlocal degenerate parabolic equation
//! `∂ₜu + ∂ₓ(uⁿ ∂ₓI(u)) = 0` on (0,1) with Neumann boundary conditions,
//! where `I = -(-Δ)^{α/2}` is defined through the Neumann eigenbasis.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod entropy;
pub mod kernel;
mod quadrature;
pub mod spectral;
pub mod stepper;

pub use spectral::{BasisConvention, Collocation, GridField, SpectralError, SpectralField};

//! Adiabatic evolution for two-level Floquet models whose followed eigenvalue
//! undergoes infinitely many crossings as the effective frequency goes through
//! zero.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: the RWA and phase-modulated model presets, truncated Floquet
//!   operators in the Fourier basis, closed-form eigenpairs and couplings.
//! - [`spectral`]: crossing times, partition points, the gap function, the
//!   crossing ledger with its gap-hypothesis checks, the projector `P`, the
//!   generator `L = i[P', P]` and the reduced commutator operator `R_L`.
//! - [`bounds`]: the error-bound pipeline (single crossing bound, `tau(k)`,
//!   the `K(eps)` selector, window condition, total bound, exponent classifier).
//! - [`evolve`]: exact and adiabatic propagators and the adiabatic error.
//! - [`harness`]: epsilon sweeps, power-law fits, CSV/SVG export and the
//!   invariant verification suite.
//!
//! All numerical code is generic over the [`Real`] scalar; `f64` aliases are
//! provided below for the common case.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bessel;
pub mod bounds;
pub mod evolve;
pub mod format;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod roots;
pub mod spectral;

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

pub use linalg::{CMatrix, CVector};
pub use num_complex::Complex;

/// Real scalar used throughout the numerical core: `f32` or `f64`.
pub trait Real: RealField + Copy + rustfft::FftNum + FromPrimitive + ToPrimitive + Display + LowerExp + Debug {}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into the working scalar.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}

/// `|z|` without requiring `num_traits::Float` on the scalar.
#[inline]
pub fn cabs<T: Real>(z: Complex<T>) -> T {
    z.norm_sqr().sqrt()
}

/// `r e^{i theta}`.
#[inline]
pub fn polar<T: Real>(r: T, theta: T) -> Complex<T> {
    let (s, c) = theta.sin_cos();
    Complex::new(r * c, r * s)
}

/// Converts a scalar to `f64` for reporting.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

pub type ModelSpec64 = model::ModelSpec<f64>;
pub type FloquetModel64 = model::FloquetModel<f64>;
pub type FloquetOperator64 = model::FloquetOperator<f64>;

pub type ModelSpec32 = model::ModelSpec<f32>;
pub type FloquetModel32 = model::FloquetModel<f32>;
pub type CrossingRecord64 = spectral::CrossingRecord<f64>;
pub type CrossingLedger64 = spectral::CrossingLedger<f64>;
pub type BoundReport64 = bounds::BoundReport<f64>;
pub type ExponentReport64 = bounds::ExponentReport<f64>;
pub type PropagationConfig64 = evolve::PropagationConfig<f64>;
pub type EvolutionResult64 = evolve::EvolutionResult<f64>;

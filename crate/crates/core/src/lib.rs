//! Numerical laboratory for random walks on the rank-one groups SL₂(ℝ) and
//! SL₂(ℂ) acting on their flag manifolds (the projective line and the
//! Riemann sphere).
//!
//! The crate is organised bottom-up:
//!
//! * [`group`]: 2×2 unimodular matrices, Killing form, Cartan and Iwasawa
//!   decompositions, the Iwasawa cocycle and the Radon–Nikodym weight.
//! * [`flag`], [`harmonics`], [`quadrature`], [`lp`]: the flag manifold,
//!   its orthonormal harmonic basis, quadrature, Littlewood–Paley blocks,
//!   Sobolev norms and the Bernstein inequality.
//! * [`measure`]: finitely supported step distributions and the families
//!   used by the experiments.
//! * [`transfer`]: the Markov operator and its adjoint in the harmonic basis,
//!   the unitary representation, stationary densities, restricted-gap
//!   estimates and the decay experiments.
//! * [`walk`]: Monte Carlo simulation of the walk.
//! * [`matrix_io`]: the binary operator-matrix format.

pub mod error;
pub mod flag;
pub mod group;
pub mod harmonics;
pub mod lp;
pub mod matrix_io;
pub mod measure;
pub mod quadrature;
pub mod transfer;
pub mod walk;

pub use error::{Error, Result};
pub use flag::FlagPoint;
pub use group::{Backend, GroupElement, Mat2};
pub use harmonics::{BasisLabel, FunctionCoefficients, HarmonicBasis};
pub use measure::{MeasureFamilySpec, SupportMeasure};
pub use quadrature::QuadratureRule;

pub use num_complex::Complex64 as C64;

/// Version tag of the canonical basis enumeration (ascending τ, then inner
/// index ascending). Embedded in every file that stores coefficients.
pub const BASIS_ORDER_VERSION: u32 = 1;

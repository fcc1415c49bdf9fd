//! Numerical laboratory for the Schrödinger boundary-value problem
//! `(-Δ + q) u = 0` with a complex, piecewise-constant potential `q`.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: polygonal domains, grid partitions, chains of cells and the
//!   exterior extension cell attached to the accessible boundary portion.
//! * [`fem`]: partition-aligned P1 meshes and a complex Dirichlet solver.
//! * [`dtn`]: the local Dirichlet-to-Neumann matrix on a boundary trace basis
//!   and its `H^{1/2} → H^{-1/2}` operator norm.
//! * [`greens`]: closed-form singular kernels, special functions and meshed
//!   singular solutions `G = Γ + ω`.
//! * [`probe`]: singular-function integrals, the boundary/volume identity,
//!   three-spheres checks and the unique-continuation constants.
//! * [`inverse`]: forward map, Jacobian, Gauss–Newton / Landweber
//!   reconstruction and empirical Lipschitz-constant estimation.

pub mod dtn;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod greens;
pub mod inverse;
pub mod probe;
pub mod quadrature;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Complex scalar used throughout the crate.
pub type C64 = Complex64;

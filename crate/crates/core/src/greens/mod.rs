//! Singular kernels and meshed singular solutions `G(·,y) = Γ(·,y) + ω`.

pub mod field;
pub mod kernels;
pub mod special;

pub use field::{annulus_l2_norm, annulus_l2_norm_between, greens_field, GreensField, GreensSolver};
pub use kernels::{dipole2, dipole_kernel, hankel_fundamental, laplace_fundamental, Kernel, KernelKind};

//! Heisenberg modules `E_{r,q}`: Morita bimodules between `A_θ` and `A_α`
//! realised on Gaussian-polynomial functions of `(s, k) ∈ ℝ × Z_q`.

pub mod gaussian;
pub mod geometry;
pub mod hermitian;
pub mod section;

pub use gaussian::{l2_inner, l2_norm_sq};
pub use geometry::{canonical_bezout, theta_of_alpha, ModuleGeometry};
pub use hermitian::{
    check_hermitian_structure, induced_derivation_check, inner_alpha, inner_alpha_variant,
    inner_theta, inner_theta_trace_dual, morcom_residual, AlphaInner, Fit, HermitianChecks,
    HermitianVariant, TestBattery,
};
pub use section::{GaussPolySection, GaussTerm, SectionFile};

//! Numerical sigma-model on the noncommutative torus.
//!
//! Fields are projections in the smooth noncommutative torus `A_θ`, stored
//! as truncated twisted Fourier series. The crate builds Gaussian instanton
//! projections from Heisenberg modules, evaluates action, topological charge
//! and self-duality, and relaxes projections by gradient flow.

pub mod calculus;
pub mod conformal;
pub mod error;
pub mod flow;
pub mod instanton;
pub mod io;
pub mod module;
pub mod random;
pub mod sigma;
pub mod spectral;
pub mod tolerances;
pub mod twisted;

/// Library version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use conformal::ConformalStructure;
pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
pub use twisted::{Axis, TailReport, TwistedSeries};

//! Numerical thresholds used across the library.
//!
//! Anything that gates a pass/fail decision lives here so the CLI can echo
//! the full set into a run manifest.

use serde::{Deserialize, Serialize};

/// Two deformation parameters are the same algebra if they agree this well.
pub const THETA_EQ: f64 = 1e-12;

/// Relative pointwise tolerance for identities that hold symbolically on
/// Gaussian-polynomial sections (only floating-point rounding remains).
pub const SYMBOLIC_EXACT: f64 = 1e-11;

/// Coefficients below this fraction of the ℓ¹ mass are ignored when sizing
/// norm-estimation windows.
pub const SUPPORT_TAIL_FRACTION: f64 = 1e-12;

/// Maximum half-width used for residual norm estimates.
pub const NORM_WINDOW_CAP: usize = 24;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Accumulated ℓ¹ mass allowed to fall outside a truncation window.
    pub tail_budget: f64,
    /// Maximum distance of the raw charge from the nearest integer.
    pub charge: f64,
    /// Largest imaginary part tolerated in the raw charge.
    pub charge_imag: f64,
    /// Idempotency residual that `action` and friends accept as input.
    pub projection_input: f64,
    /// Target idempotency residual for purification.
    pub purify: f64,
    /// Newton–Schulz target residual ‖ax − 1‖.
    pub inverse: f64,
    /// Relative morcom least-squares residual accepted for coefficient extraction.
    pub extraction: f64,
    /// Largest condition estimate accepted for the test-section battery.
    pub battery_condition: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tail_budget: 1e-10,
            charge: 1e-4,
            charge_imag: 1e-10,
            projection_input: 1e-6,
            purify: 1e-10,
            inverse: 1e-13,
            extraction: 1e-4,
            battery_condition: 1e12,
        }
    }
}

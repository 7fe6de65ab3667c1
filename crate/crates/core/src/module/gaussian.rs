//! Closed-form `L²` pairings of Gaussian-polynomial terms.
//!
//! `∫ s^j e^{As² + Bs} ds` with `Re A < 0` is the `j`-th moment of a complex
//! normal law with mean `μ = −B/2A` and variance `σ² = −1/2A`, times
//! `√(π/−A) e^{−B²/4A}`. The moments obey `m_j = μ m_{j−1} + (j−1) σ² m_{j−2}`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::module::section::{GaussPolySection, GaussTerm};

/// `∫ conj(x(s)) y(s) ds` for two terms.
pub fn term_inner(x: &GaussTerm, y: &GaussTerm) -> Result<C64> {
    let a = x.quad.conj() + y.quad;
    if !(a.re < 0.0) {
        return Err(Error::Integrability(format!(
            "combined quadratic exponent {a} has non-negative real part"
        )));
    }
    let b = x.lin.conj() + y.lin;
    let c = x.log_scale.conj() + y.log_scale;
    let mu = -b / (a * 2.0);
    let var = -(a * 2.0).inv();
    let deg = x.poly.len() + y.poly.len() - 1;
    let mut moments = Vec::with_capacity(deg);
    moments.push(C64::new(1.0, 0.0));
    if deg > 1 {
        moments.push(mu);
    }
    for j in 2..deg {
        let next = mu * moments[j - 1] + var * (j - 1) as f64 * moments[j - 2];
        moments.push(next);
    }
    let mut sum = C64::new(0.0, 0.0);
    for (i, u) in x.poly.iter().enumerate() {
        let u = u.conj();
        for (j, v) in y.poly.iter().enumerate() {
            sum += u * v * moments[i + j];
        }
    }
    let log_pref = c - b * b / (a * 4.0) + 0.5 * (C64::new(PI, 0.0) / (-a)).ln();
    Ok(sum * log_pref.exp())
}

/// `Σ_k ∫ conj(ξ(s,k)) η(s,k) ds`.
pub fn l2_inner(xi: &GaussPolySection, eta: &GaussPolySection) -> Result<C64> {
    xi.same_module(eta)?;
    let mut total = C64::new(0.0, 0.0);
    for (xs, ys) in xi.components().iter().zip(eta.components()) {
        for x in xs {
            for y in ys {
                total += term_inner(x, y)?;
            }
        }
    }
    Ok(total)
}

/// `‖ξ‖²` in `L²(ℝ × Z_q)`.
pub fn l2_norm_sq(xi: &GaussPolySection) -> Result<f64> {
    Ok(l2_inner(xi, xi)?.re)
}

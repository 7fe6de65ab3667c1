//! Constant conformal structure on the torus, parametrized by `τ` in the
//! upper half-plane.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TauRepr", into = "TauRepr")]
pub struct ConformalStructure {
    tau: C64,
    metric: [[f64; 2]; 2],
    inverse_metric: [[f64; 2]; 2],
}

#[derive(Serialize, Deserialize)]
struct TauRepr {
    tau_re: f64,
    tau_im: f64,
}

impl TryFrom<TauRepr> for ConformalStructure {
    type Error = Error;
    fn try_from(r: TauRepr) -> Result<Self> {
        ConformalStructure::new(C64::new(r.tau_re, r.tau_im))
    }
}

impl From<ConformalStructure> for TauRepr {
    fn from(cs: ConformalStructure) -> Self {
        TauRepr {
            tau_re: cs.tau.re,
            tau_im: cs.tau.im,
        }
    }
}

impl ConformalStructure {
    pub fn new(tau: C64) -> Result<Self> {
        if !(tau.im > 0.0) || !tau.re.is_finite() || !tau.im.is_finite() {
            return Err(Error::Parameter(format!(
                "conformal modulus must have Im τ > 0, got {tau}"
            )));
        }
        let (x, y) = (tau.re, tau.im);
        let metric = [[1.0, x], [x, tau.norm_sqr()]];
        let y2 = y * y;
        let inverse_metric = [[tau.norm_sqr() / y2, -x / y2], [-x / y2, 1.0 / y2]];
        Ok(Self {
            tau,
            metric,
            inverse_metric,
        })
    }

    /// The square torus, `τ = i`.
    pub fn square() -> Self {
        Self::new(C64::new(0.0, 1.0)).expect("τ = i is valid")
    }

    pub fn tau(&self) -> C64 {
        self.tau
    }

    pub fn metric(&self) -> [[f64; 2]; 2] {
        self.metric
    }

    pub fn inverse_metric(&self) -> [[f64; 2]; 2] {
        self.inverse_metric
    }

    /// `√det g = Im τ`.
    pub fn sqrt_det(&self) -> f64 {
        self.tau.im
    }

    /// Coefficients `(c1, c2)` with `∂_(τ) = c1 ∂1 + c2 ∂2`.
    pub fn holo_coeffs(&self) -> [C64; 2] {
        let d = self.tau - self.tau.conj();
        [-self.tau.conj() / d, C64::new(1.0, 0.0) / d]
    }

    /// Coefficients with `∂̄_(τ) = c1 ∂1 + c2 ∂2`.
    pub fn antiholo_coeffs(&self) -> [C64; 2] {
        let d = self.tau - self.tau.conj();
        [self.tau / d, C64::new(-1.0, 0.0) / d]
    }

    /// Fourier multiplier of the Laplacian on `U1^m U2^n`:
    /// `−4π² g^{μν} v_μ v_ν` with `v = (m, n)`.
    pub fn laplacian_symbol(&self, m: i64, n: i64) -> f64 {
        let (m, n) = (m as f64, n as f64);
        let gi = &self.inverse_metric;
        -4.0 * PI * PI * (gi[0][0] * m * m + 2.0 * gi[0][1] * m * n + gi[1][1] * n * n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_lower_half_plane() {
        assert!(ConformalStructure::new(C64::new(0.2, 0.0)).is_err());
        assert!(ConformalStructure::new(C64::new(0.2, -1.0)).is_err());
    }

    #[test]
    fn metric_inverse_and_holo_split() {
        for tau in [C64::new(0.0, 1.0), C64::new(1.0, 2.0), C64::new(0.3, 0.7)] {
            let cs = ConformalStructure::new(tau).unwrap();
            let (g, gi) = (cs.metric(), cs.inverse_metric());
            for i in 0..2 {
                for j in 0..2 {
                    let prod: f64 = (0..2).map(|k| g[i][k] * gi[k][j]).sum();
                    let id = if i == j { 1.0 } else { 0.0 };
                    assert!((prod - id).abs() < 1e-14);
                }
            }
            let (h, a) = (cs.holo_coeffs(), cs.antiholo_coeffs());
            assert!((h[0] + a[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
            assert!((h[1] + a[1]).norm() < 1e-15);
            assert_eq!(cs.sqrt_det(), tau.im);
        }
    }

    #[test]
    fn square_torus_symbol() {
        let cs = ConformalStructure::square();
        assert!((cs.laplacian_symbol(1, 0) + 4.0 * PI * PI).abs() < 1e-12);
        assert!((cs.laplacian_symbol(0, 1) + 4.0 * PI * PI).abs() < 1e-12);
    }
}

//! Sigma-model functionals on projections of `A_θ`: the cyclic and positive
//! Hochschild cocycles, action, topological charge, the Belavin–Polyakov
//! gap, and equation-of-motion / self-duality residuals.
//!
//! Traces of products are evaluated from exact (untruncated) products, so
//! none of these functionals loses mass to truncation.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::conformal::ConformalStructure;
use crate::error::{Error, Result};
use crate::spectral::residual_norm;
use crate::tolerances::Tolerances;
use crate::twisted::{same_theta, Axis, TwistedSeries};

fn i_two_pi() -> C64 {
    C64::new(0.0, 2.0 * PI)
}

/// `ψ(a0, a1, a2) = −(1/2πi) trace(a0 (∂1a1 ∂2a2 − ∂2a1 ∂1a2))`.
pub fn cocycle_psi(a0: &TwistedSeries, a1: &TwistedSeries, a2: &TwistedSeries) -> Result<C64> {
    same_theta(a0.theta(), a1.theta())?;
    same_theta(a0.theta(), a2.theta())?;
    let form = a1
        .derive(Axis::One)
        .multiply_full(&a2.derive(Axis::Two))?
        .checked_sub(&a1.derive(Axis::Two).multiply_full(&a2.derive(Axis::One))?)?;
    Ok(-a0.trace_product(&form)? / i_two_pi())
}

/// `φ(a0, a1, a2) = (2/π) Im τ · trace(a0 ∂_(τ)a1 ∂̄_(τ)a2)`.
///
/// The `Im τ = √det g` factor makes `φ(1, p, p)` equal the metric form of
/// the action.
pub fn cocycle_phi(
    a0: &TwistedSeries,
    a1: &TwistedSeries,
    a2: &TwistedSeries,
    cs: &ConformalStructure,
) -> Result<C64> {
    same_theta(a0.theta(), a1.theta())?;
    same_theta(a0.theta(), a2.theta())?;
    let prod = a1
        .holo_derive(cs, false)
        .multiply_full(&a2.holo_derive(cs, true))?;
    Ok(a0.trace_product(&prod)? * (2.0 / PI * cs.sqrt_det()))
}

/// Idempotency and hermiticity defects, as estimated operator norms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectionDefects {
    pub idempotency: f64,
    pub hermiticity: f64,
}

pub fn projection_defects(p: &TwistedSeries) -> Result<ProjectionDefects> {
    let idem = p.multiply_full(p)?.checked_sub(p)?;
    let herm = p.checked_sub(&p.adjoint())?;
    Ok(ProjectionDefects {
        idempotency: residual_norm(&idem),
        hermiticity: residual_norm(&herm),
    })
}

/// Fails unless `p` is hermitian and idempotent within `tol`. The ℓ¹ norms
/// bound the operator norms and are tried first; only when they exceed `tol`
/// are the (sharper, slower) spectral estimates computed. The returned
/// defects are therefore upper bounds.
pub fn require_projection(p: &TwistedSeries, tol: f64) -> Result<ProjectionDefects> {
    let idem = p.multiply_full(p)?.checked_sub(p)?.l1_norm();
    let herm = p.checked_sub(&p.adjoint())?.l1_norm();
    if idem <= tol && herm <= tol {
        return Ok(ProjectionDefects {
            idempotency: idem,
            hermiticity: herm,
        });
    }
    let d = projection_defects(p)?;
    if d.idempotency > tol || d.hermiticity > tol {
        return Err(Error::NotProjection(format!(
            "idempotency residual {:.3e}, hermiticity residual {:.3e} (tolerance {tol:.1e})",
            d.idempotency, d.hermiticity
        )));
    }
    Ok(d)
}

/// `(1/2π) Im τ Σ g^{μν} trace(∂_μp ∂_νp)`, without input checks.
pub fn action_metric_form(p: &TwistedSeries, cs: &ConformalStructure) -> Result<f64> {
    let d = [p.derive(Axis::One), p.derive(Axis::Two)];
    let gi = cs.inverse_metric();
    let mut acc = C64::new(0.0, 0.0);
    for mu in 0..2 {
        for nu in 0..2 {
            acc += d[mu].trace_product(&d[nu])? * gi[mu][nu];
        }
    }
    Ok((acc * (cs.sqrt_det() / (2.0 * PI))).re)
}

/// `φ(1, p, p)`, the holomorphic form of the action, without input checks.
pub fn action_holomorphic_form(p: &TwistedSeries, cs: &ConformalStructure) -> Result<f64> {
    let one = TwistedSeries::identity(p.theta(), 0);
    Ok(cocycle_phi(&one, p, p, cs)?.re)
}

pub fn action(p: &TwistedSeries, cs: &ConformalStructure, tol: &Tolerances) -> Result<f64> {
    require_projection(p, tol.projection_input)?;
    action_metric_form(p, cs)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Charge {
    pub raw: f64,
    pub imag: f64,
    pub rounded: i64,
}

impl Charge {
    pub fn integer_distance(&self) -> f64 {
        (self.raw - self.rounded as f64).abs()
    }
}

/// Raw topological charge `ψ(p, p, p)` without validation.
pub fn charge_raw(p: &TwistedSeries) -> Result<Charge> {
    let v = cocycle_psi(p, p, p)?;
    Ok(Charge {
        raw: v.re,
        imag: v.im,
        rounded: v.re.round() as i64,
    })
}

/// Topological charge, failing when the raw value is not integral within
/// tolerance (which signals a badly truncated projection).
pub fn charge(p: &TwistedSeries, tol: &Tolerances) -> Result<Charge> {
    require_projection(p, tol.projection_input)?;
    let c = charge_raw(p)?;
    if c.imag.abs() > tol.charge_imag || c.integer_distance() > tol.charge {
        return Err(Error::ChargeNotIntegral {
            re: c.raw,
            im: c.imag,
        });
    }
    Ok(c)
}

/// `S(p) − 2|ψ(p)|`.
pub fn bp_gap(p: &TwistedSeries, cs: &ConformalStructure, tol: &Tolerances) -> Result<f64> {
    require_projection(p, tol.projection_input)?;
    Ok(action_metric_form(p, cs)? - 2.0 * charge_raw(p)?.raw.abs())
}

/// `pΔp − Δp·p` (exact product window).
pub fn eom_commutator(p: &TwistedSeries, cs: &ConformalStructure) -> Result<TwistedSeries> {
    p.commutator(&p.laplacian(cs))
}

pub fn eom_residual(p: &TwistedSeries, cs: &ConformalStructure) -> Result<f64> {
    Ok(residual_norm(&eom_commutator(p, cs)?))
}

/// Norms of the two factorized first-order conditions: `[‖∂̄p·p‖, ‖p·∂p‖]`
/// for self-duality, `[‖∂p·p‖, ‖p·∂̄p‖]` for anti-self-duality.
pub fn duality_conditions(
    p: &TwistedSeries,
    cs: &ConformalStructure,
    anti: bool,
) -> Result<[f64; 2]> {
    let (first, second) = if anti {
        (p.holo_derive(cs, false), p.holo_derive(cs, true))
    } else {
        (p.holo_derive(cs, true), p.holo_derive(cs, false))
    };
    Ok([
        residual_norm(&first.multiply_full(p)?),
        residual_norm(&p.multiply_full(&second)?),
    ])
}

pub fn sd_residual(p: &TwistedSeries, cs: &ConformalStructure) -> Result<f64> {
    let [a, b] = duality_conditions(p, cs, false)?;
    Ok(a.max(b))
}

pub fn asd_residual(p: &TwistedSeries, cs: &ConformalStructure) -> Result<f64> {
    let [a, b] = duality_conditions(p, cs, true)?;
    Ok(a.max(b))
}

/// Everything measured about a candidate projection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionReport {
    pub trace: f64,
    pub action: f64,
    pub charge_raw: f64,
    pub charge_rounded: i64,
    pub bp_gap: f64,
    pub eom_residual: f64,
    pub sd_residual: f64,
    pub asd_residual: f64,
    pub idempotency_residual: f64,
    pub hermiticity_residual: f64,
    /// Projection within tolerance and charge integral within tolerance.
    pub valid: bool,
}

impl ProjectionReport {
    /// Evaluates every functional. Never fails on a non-projection; such
    /// input simply yields `valid == false`.
    pub fn evaluate(
        p: &TwistedSeries,
        cs: &ConformalStructure,
        tol: &Tolerances,
    ) -> Result<ProjectionReport> {
        let defects = projection_defects(p)?;
        let action = action_metric_form(p, cs)?;
        let charge = charge_raw(p)?;
        let is_projection = defects.idempotency <= tol.projection_input
            && defects.hermiticity <= tol.projection_input;
        let integral =
            charge.imag.abs() <= tol.charge_imag && charge.integer_distance() <= tol.charge;
        Ok(ProjectionReport {
            trace: p.trace().re,
            action,
            charge_raw: charge.raw,
            charge_rounded: charge.rounded,
            bp_gap: action - 2.0 * charge.raw.abs(),
            eom_residual: eom_residual(p, cs)?,
            sd_residual: sd_residual(p, cs)?,
            asd_residual: asd_residual(p, cs)?,
            idempotency_residual: defects.idempotency,
            hermiticity_residual: defects.hermiticity,
            valid: is_projection && integral,
        })
    }

    pub const CSV_HEADER: &'static str = "trace,action,charge_raw,charge_rounded,bp_gap,eom_residual,sd_residual,asd_residual,idempotency_residual,hermiticity_residual,valid";

    pub fn csv_row(&self) -> String {
        format!(
            "{:e},{:e},{:e},{},{:e},{:e},{:e},{:e},{:e},{:e},{}",
            self.trace,
            self.action,
            self.charge_raw,
            self.charge_rounded,
            self.bp_gap,
            self.eom_residual,
            self.sd_residual,
            self.asd_residual,
            self.idempotency_residual,
            self.hermiticity_residual,
            self.valid
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_hermitian, random_series};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const TH: f64 = 0.37;

    #[test]
    fn trivial_projections_are_flat() {
        let cs = ConformalStructure::square();
        let tol = Tolerances::default();
        for v in [0.0, 1.0] {
            let p = TwistedSeries::scalar(TH, 2, C64::new(v, 0.0));
            let r = ProjectionReport::evaluate(&p, &cs, &tol).unwrap();
            assert_eq!(r.action, 0.0);
            assert_eq!(r.charge_raw, 0.0);
            assert_eq!(r.bp_gap, 0.0);
            assert_eq!(r.eom_residual, 0.0);
            assert_eq!(r.sd_residual, 0.0);
            assert_eq!(r.asd_residual, 0.0);
            assert!(r.valid);
        }
    }

    #[test]
    fn cocycles_vanish_on_unit() {
        let one = TwistedSeries::identity(TH, 1);
        let cs = ConformalStructure::square();
        assert_eq!(cocycle_psi(&one, &one, &one).unwrap(), C64::new(0.0, 0.0));
        assert_eq!(cocycle_phi(&one, &one, &one, &cs).unwrap(), C64::new(0.0, 0.0));
    }

    #[test]
    fn psi_is_cyclic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let a: Vec<_> = (0..3).map(|_| random_series(&mut rng, TH, 3, 3, 1.0)).collect();
            let x = cocycle_psi(&a[0], &a[1], &a[2]).unwrap();
            let y = cocycle_psi(&a[2], &a[0], &a[1]).unwrap();
            assert!((x - y).norm() <= 1e-10 * (1.0 + x.norm()), "{x} vs {y}");
        }
    }

    #[test]
    fn two_action_formulas_agree_on_hermitians() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for tau in [C64::new(0.0, 1.0), C64::new(0.3, 0.8), C64::new(1.0, 2.0)] {
            let cs = ConformalStructure::new(tau).unwrap();
            for _ in 0..10 {
                let h = random_hermitian(&mut rng, TH, 4, 4, 1.0);
                let a = action_metric_form(&h, &cs).unwrap();
                let b = action_holomorphic_form(&h, &cs).unwrap();
                assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn phi_scalar_product_is_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let cs = ConformalStructure::new(C64::new(0.3, 0.8)).unwrap();
        for _ in 0..100 {
            let a = random_series(&mut rng, TH, 2, 2, 1.0);
            let ad = a.adjoint();
            let v = cocycle_phi(&(&ad * &a), &a, &ad, &cs).unwrap();
            assert!(v.re >= -1e-12 && v.im.abs() <= 1e-10 * (1.0 + v.re), "{v}");
        }
    }

    #[test]
    fn non_projection_is_rejected_by_action() {
        let cs = ConformalStructure::square();
        let p = TwistedSeries::scalar(TH, 1, C64::new(0.5, 0.0));
        assert!(matches!(
            action(&p, &cs, &Tolerances::default()),
            Err(Error::NotProjection(_))
        ));
    }
}

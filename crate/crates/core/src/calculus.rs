//! Iterations that stay inside the coefficient algebra: the cubic
//! purification onto projections and Newton–Schulz inversion.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::spectral::{residual_norm, residual_window, spectral_bounds};
use crate::twisted::{TailReport, TwistedSeries};

#[derive(Clone, Debug)]
pub struct Purification {
    pub projection: TwistedSeries,
    pub iterations: usize,
    /// Estimated `‖p² − p‖` of the returned element.
    pub residual: f64,
    pub tail: TailReport,
}

#[derive(Clone, Debug)]
pub struct Inversion {
    pub inverse: TwistedSeries,
    pub iterations: usize,
    /// ℓ¹ norm of `a x − 1`, an upper bound for the operator norm.
    pub residual: f64,
    pub tail: TailReport,
}

fn require_hermitian(a: &TwistedSeries, what: &str) -> Result<()> {
    let scale = a.max_abs().max(1.0);
    let dev = a.max_abs_diff(&a.adjoint());
    if dev > 1e-8 * scale {
        return Err(Error::Parameter(format!(
            "{what} requires a hermitian element (deviation {dev:.3e})"
        )));
    }
    Ok(())
}

/// ‖x² − x‖, using the ℓ¹ bound when it is already decisive.
fn idempotency_defect(x2: &TwistedSeries, x: &TwistedSeries, tol: f64) -> f64 {
    let d = x2 - x;
    let l1 = d.l1_norm();
    if l1 <= tol || l1 > 1e4 * tol {
        l1
    } else {
        residual_norm(&d).min(l1)
    }
}

/// Retracts a hermitian near-projection onto a projection by iterating
/// `x ← 3x² − 2x³`, all products truncated to the input window.
pub fn purify(a: &TwistedSeries, max_iters: usize, tol: f64) -> Result<Purification> {
    purify_to_floor(a, max_iters, tol, tol)
}

/// [`purify`] that also stops, successfully, once the defect no longer
/// halves per iteration (the truncation floor of the window) while being
/// below `accept`.
pub fn purify_to_floor(
    a: &TwistedSeries,
    max_iters: usize,
    tol: f64,
    accept: f64,
) -> Result<Purification> {
    require_hermitian(a, "purification")?;
    let mut x = a.hermitian_part();
    // ‖x² − x‖ < 1/4 already confines the spectrum to (−0.21, 1.21), so the
    // (certified) ℓ¹ bound makes the Lanczos check unnecessary
    let (x2, _) = x.multiply(&x)?;
    if (&x2 - &x).l1_norm() >= 0.25 {
        let bounds = spectral_bounds(a, residual_window(a));
        if bounds.lower <= -0.5 || bounds.upper >= 1.5 {
            return Err(Error::Spectrum {
                lower: bounds.lower,
                upper: bounds.upper,
                allowed: "(-1/2, 3/2)",
            });
        }
    }
    let mut tail = TailReport::default();
    let mut previous = f64::INFINITY;
    let mut iterations = 0;
    loop {
        let (x2, t2) = x.multiply(&x)?;
        let residual = idempotency_defect(&x2, &x, tol);
        let stalled = residual > 0.5 * previous;
        if residual <= tol || (stalled && residual <= accept) {
            return Ok(Purification {
                projection: x,
                iterations,
                residual,
                tail,
            });
        }
        if iterations == max_iters {
            // out of budget but already acceptable
            if residual <= accept {
                return Ok(Purification {
                    projection: x,
                    iterations,
                    residual,
                    tail,
                });
            }
            return Err(Error::NoConvergence {
                iterations,
                residual,
            });
        }
        previous = residual;
        let (x3, t3) = x2.multiply(&x)?;
        tail = tail.merge(t2).merge(t3);
        x = (&x2.scale_real(3.0) - &x3.scale_real(2.0)).hermitian_part();
        iterations += 1;
    }
}

/// Cheap retraction for iterates already close to a projection: cubic
/// purification measured by the (certified) ℓ¹ defect only. Stops at `tol`,
/// or once the defect stops halving (the truncation floor of the window),
/// provided it is then below `accept`.
pub fn retract(a: &TwistedSeries, max_iters: usize, tol: f64, accept: f64) -> Result<Purification> {
    require_hermitian(a, "retraction")?;
    let mut x = a.hermitian_part();
    let mut tail = TailReport::default();
    let mut previous = f64::INFINITY;
    for iterations in 0..=max_iters {
        let (x2, t2) = x.multiply(&x)?;
        let residual = (&x2 - &x).l1_norm();
        if residual >= 0.25 {
            return Err(Error::NotProjection(format!(
                "ℓ¹ idempotency defect {residual:.3e} too large to retract"
            )));
        }
        let stalled = residual > 0.5 * previous;
        if residual <= tol || (stalled && residual <= accept) {
            return Ok(Purification {
                projection: x,
                iterations,
                residual,
                tail,
            });
        }
        if iterations == max_iters || stalled {
            return Err(Error::NoConvergence {
                iterations,
                residual,
            });
        }
        previous = residual;
        let (x3, t3) = x2.multiply(&x)?;
        tail = tail.merge(t2).merge(t3);
        x = (&x2.scale_real(3.0) - &x3.scale_real(2.0)).hermitian_part();
    }
    unreachable!("loop returns on its last iteration")
}

/// Inverts a positive hermitian element with `x ← x(2 − a x)`, seeded at
/// `a / ‖a‖₁²`.
pub fn invert_newton_schulz(a: &TwistedSeries, max_iters: usize, tol: f64) -> Result<Inversion> {
    require_hermitian(a, "Newton–Schulz inversion")?;
    let bounds = spectral_bounds(a, residual_window(a));
    if bounds.lower <= 0.0 {
        return Err(Error::NotInvertible {
            lower: bounds.lower,
        });
    }
    let hw = a.half_width();
    let one = TwistedSeries::identity(a.theta(), hw);
    let two = one.scale_real(2.0);
    let l1 = a.l1_norm();
    let mut x = a.hermitian_part().scale_real(1.0 / (l1 * l1));
    let mut tail = TailReport::default();
    let mut iterations = 0;
    loop {
        let (ax, t1) = a.multiply(&x)?;
        let residual = (&ax - &one).l1_norm();
        if !residual.is_finite() || residual > 1e6 {
            return Err(Error::NoConvergence {
                iterations,
                residual,
            });
        }
        if residual <= tol {
            return Ok(Inversion {
                inverse: x,
                iterations,
                residual,
                tail: tail.merge(t1),
            });
        }
        if iterations == max_iters {
            return Err(Error::NoConvergence {
                iterations,
                residual,
            });
        }
        let (next, t2) = x.multiply(&(&two - &ax))?;
        tail = tail.merge(t1).merge(t2);
        x = next.hermitian_part();
        iterations += 1;
    }
}

/// Convenience: scalar multiple of the unit.
pub fn scalar(theta: f64, half_width: usize, value: f64) -> TwistedSeries {
    TwistedSeries::scalar(theta, half_width, C64::new(value, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TH: f64 = 0.37;

    #[test]
    fn scalar_fixed_points() {
        for v in [0.0, 1.0] {
            let p = purify(&scalar(TH, 2, v), 10, 1e-14).unwrap();
            assert_eq!(p.iterations, 0);
            assert!((p.projection.trace().re - v).abs() < 1e-15);
        }
    }

    /// Scalar oracle for the cubic map.
    fn scalar_cubic(mut x: f64, tol: f64) -> (f64, usize) {
        let mut it = 0;
        while (x * x - x).abs() > tol {
            x = 3.0 * x * x - 2.0 * x * x * x;
            it += 1;
        }
        (x, it)
    }

    #[test]
    fn scalar_point_nine_goes_to_one() {
        let (oracle, oracle_iters) = scalar_cubic(0.9, 1e-12);
        let p = purify(&scalar(TH, 1, 0.9), 10, 1e-12).unwrap();
        assert!(p.iterations <= 6);
        assert_eq!(p.iterations, oracle_iters);
        assert!((p.projection.trace().re - 1.0).abs() < 1e-12);
        assert!((p.projection.trace().re - oracle).abs() < 1e-15);
    }

    #[test]
    fn spectrum_outside_basin_is_rejected() {
        let err = purify(&scalar(TH, 1, 1.7), 10, 1e-12).unwrap_err();
        assert!(matches!(err, Error::Spectrum { .. }));
    }

    #[test]
    fn budget_exhaustion_carries_residual() {
        let err = purify(&scalar(TH, 1, 0.55), 1, 1e-12).unwrap_err();
        match err {
            Error::NoConvergence { iterations, residual } => {
                assert_eq!(iterations, 1);
                assert!(residual > 1e-3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invert_scalar() {
        let inv = invert_newton_schulz(&scalar(TH, 2, 2.0), 60, 1e-14).unwrap();
        assert!((inv.inverse.trace().re - 0.5).abs() < 1e-14);
    }

    #[test]
    fn invert_cosine_against_geometric_series() {
        let hw = 24;
        let u1 = TwistedSeries::monomial(TH, hw, 1, 0, C64::new(1.0, 0.0));
        let h = &u1 + &u1.adjoint();
        let a = &scalar(TH, hw, 1.0) + &h.scale_real(0.3);
        let inv = invert_newton_schulz(&a, 100, 1e-12).unwrap();
        let (ax, _) = a.multiply(&inv.inverse).unwrap();
        assert!(crate::spectral::norm_estimate(&(&ax - &scalar(TH, hw, 1.0)), 32) <= 1e-10);
        // Σ (−0.3 h)^k, truncated to the same window
        let mut term = scalar(TH, hw, 1.0);
        let mut sum = term.clone();
        let step = h.scale_real(-0.3);
        for _ in 0..80 {
            term = term.multiply(&step).unwrap().0;
            sum = &sum + &term;
        }
        assert!(inv.inverse.max_abs_diff(&sum) < 1e-10);
    }

    #[test]
    fn indefinite_element_is_not_invertible() {
        let u1 = TwistedSeries::monomial(TH, 2, 1, 0, C64::new(1.0, 0.0));
        let a = &scalar(TH, 2, 0.5) + &(&u1 + &u1.adjoint());
        assert!(matches!(
            invert_newton_schulz(&a, 50, 1e-12),
            Err(Error::NotInvertible { .. })
        ));
    }
}

//! Seeded random elements for property tests, self-tests and flow kicks.

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::twisted::TwistedSeries;

/// Gaussian random coefficients on `|m|, |n| ≤ radius`, scaled to ℓ¹ mass
/// `mass`, stored in a window of `half_width`.
pub fn random_series<R: Rng + ?Sized>(
    rng: &mut R,
    theta: f64,
    half_width: usize,
    radius: usize,
    mass: f64,
) -> TwistedSeries {
    let r = radius.min(half_width) as i64;
    let mut out = TwistedSeries::zeros(theta, half_width);
    for m in -r..=r {
        for n in -r..=r {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            out.set(m, n, C64::new(re, im));
        }
    }
    let l1 = out.l1_norm();
    if l1 > 0.0 {
        out.scale_real(mass / l1)
    } else {
        out
    }
}

/// Hermitian part of a random series, rescaled to ℓ¹ mass `mass`.
pub fn random_hermitian<R: Rng + ?Sized>(
    rng: &mut R,
    theta: f64,
    half_width: usize,
    radius: usize,
    mass: f64,
) -> TwistedSeries {
    let h = random_series(rng, theta, half_width, radius, 1.0).hermitian_part();
    let l1 = h.l1_norm();
    h.scale_real(mass / l1)
}

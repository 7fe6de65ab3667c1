use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discrete and continuous data of the bimodule `E_{r,q}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModuleGeometry {
    pub r: i64,
    pub q: i64,
    pub alpha: f64,
    pub epsilon: f64,
    pub a: i64,
    pub b: i64,
    pub theta: f64,
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Returns `(g, x, y)` with `x·a + y·b = g = gcd(a, b)`.
fn extended_euclid(a: i64, b: i64) -> (i64, i64, i64) {
    let (mut old_r, mut r) = (a, b);
    let (mut old_s, mut s) = (1i64, 0i64);
    let (mut old_t, mut t) = (0i64, 1i64);
    while r != 0 {
        let quot = old_r.div_euclid(r);
        (old_r, r) = (r, old_r - quot * r);
        (old_s, s) = (s, old_s - quot * s);
        (old_t, t) = (t, old_t - quot * t);
    }
    if old_r < 0 {
        (-old_r, -old_s, -old_t)
    } else {
        (old_r, old_s, old_t)
    }
}

/// Bézout pair `(a, b)` with `a r + b q = 1` and `|a|` minimal; on a tie
/// the smaller (negative) `a` is taken.
pub fn canonical_bezout(r: i64, q: i64) -> Result<(i64, i64)> {
    if q <= 0 {
        return Err(Error::Parameter(format!("q must be positive, got {q}")));
    }
    if gcd(r, q) != 1 {
        return Err(Error::Parameter(format!(
            "r and q must be coprime, got gcd({r}, {q}) = {}",
            gcd(r, q)
        )));
    }
    let (_, a0, _) = extended_euclid(r, q);
    // all solutions: a = a0 + k q, b = b0 − k r
    let mut a = a0.rem_euclid(q);
    if a >= q - a && a != 0 {
        a -= q;
    }
    let b = (1 - a * r) / q;
    debug_assert_eq!(a * r + b * q, 1);
    Ok((a, b))
}

/// `θ = (aα + b)/(−qα + r)` and the rest of the geometry, with the
/// canonical Bézout pair.
pub fn theta_of_alpha(r: i64, q: i64, alpha: f64) -> Result<ModuleGeometry> {
    ModuleGeometry::from_alpha(r, q, alpha)
}

impl ModuleGeometry {
    /// Geometry with the canonical Bézout pair.
    pub fn from_alpha(r: i64, q: i64, alpha: f64) -> Result<Self> {
        let (a, b) = canonical_bezout(r, q)?;
        Self::with_bezout(r, q, alpha, a, b)
    }

    /// Geometry with an explicit Bézout pair; shifts θ by an integer
    /// relative to the canonical choice.
    pub fn with_bezout(r: i64, q: i64, alpha: f64, a: i64, b: i64) -> Result<Self> {
        if q <= 0 {
            return Err(Error::Parameter(format!("q must be positive, got {q}")));
        }
        if gcd(r, q) != 1 {
            return Err(Error::Parameter(format!("gcd({r}, {q}) != 1")));
        }
        if a * r + b * q != 1 {
            return Err(Error::Parameter(format!("{a}·{r} + {b}·{q} != 1")));
        }
        if !alpha.is_finite() {
            return Err(Error::Parameter("alpha must be finite".into()));
        }
        let denom = -(q as f64) * alpha + r as f64;
        let epsilon = r as f64 / q as f64 - alpha;
        if denom.abs() <= 1e-12 || epsilon.abs() <= 1e-12 {
            return Err(Error::Degenerate(format!(
                "r - q·alpha vanishes for (r, q, alpha) = ({r}, {q}, {alpha})"
            )));
        }
        Ok(Self {
            r,
            q,
            alpha,
            epsilon,
            a,
            b,
            theta: (a as f64 * alpha + b as f64) / denom,
        })
    }

    /// The Boca-type module `E_{0,1}` for a given `θ`, with `α = −1/θ`.
    pub fn boca(theta: f64) -> Result<Self> {
        if theta == 0.0 || !theta.is_finite() {
            return Err(Error::Parameter(format!("theta must be nonzero, got {theta}")));
        }
        Self::from_alpha(0, 1, -1.0 / theta)
    }

    /// `1/(q ε)`, the factor relating the induced derivations to the
    /// canonical ones, and the trace of a rank-one projection.
    pub fn coupling(&self) -> f64 {
        1.0 / (self.q as f64 * self.epsilon)
    }

    pub fn validate(&self) -> Result<()> {
        let fresh = Self::with_bezout(self.r, self.q, self.alpha, self.a, self.b)?;
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * (1.0 + x.abs());
        if !close(fresh.theta, self.theta) || !close(fresh.epsilon, self.epsilon) {
            return Err(Error::Parameter(
                "geometry fields are inconsistent with (r, q, alpha, a, b)".into(),
            ));
        }
        Ok(())
    }
}

//! Truncated twisted Fourier series: elements of the smooth noncommutative
//! torus with finitely many nonzero coefficients.
//!
//! An element is `Σ a_{mn} U1^m U2^n` over the window `|m|, |n| ≤ M`, with
//! `U2 U1 = e^{2πiθ} U1 U2`. Monomials multiply as
//! `(U1^m U2^n)(U1^m' U2^n') = e^{2πiθ n m'} U1^{m+m'} U2^{n+n'}`.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::conformal::ConformalStructure;
use crate::error::{Error, Result};
use crate::tolerances::{SUPPORT_TAIL_FRACTION, THETA_EQ};

/// One of the two canonical derivations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    One,
    Two,
}

impl Axis {
    pub const ALL: [Axis; 2] = [Axis::One, Axis::Two];

    pub fn index(self) -> usize {
        match self {
            Axis::One => 0,
            Axis::Two => 1,
        }
    }
}

/// Reduces θ into `[0, 1)` on the 2⁻⁵² grid so that `θ` and `θ + 1`
/// produce bit-identical phases.
pub fn reduce_theta(theta: f64) -> f64 {
    const GRID: f64 = 4503599627370496.0; // 2^52
    let frac = theta - theta.floor();
    let snapped = (frac * GRID).round_ties_even() / GRID;
    if snapped >= 1.0 {
        0.0
    } else {
        snapped
    }
}

/// `e^{2πi x}` with the argument reduced modulo 1 before scaling.
pub fn unit_phase(x: f64) -> C64 {
    C64::from_polar(1.0, 2.0 * PI * (x - x.round()))
}

/// Table of `ω^j = e^{2πiθ j}` for `|j| ≤ span`.
#[derive(Clone, Debug)]
pub struct PhaseTable {
    span: i64,
    table: Vec<C64>,
}

impl PhaseTable {
    pub fn new(theta: f64, span: i64) -> Self {
        let base = reduce_theta(theta);
        let table = (-span..=span)
            .map(|j| {
                let jf = j as f64;
                let prod = base * jf;
                // error-free product keeps the reduction exact for large j
                let err = base.mul_add(jf, -prod);
                let frac = (prod - prod.round()) + err;
                C64::from_polar(1.0, 2.0 * PI * frac)
            })
            .collect();
        Self { span, table }
    }

    #[inline]
    pub fn get(&self, j: i64) -> C64 {
        self.table[(j + self.span) as usize]
    }
}

/// ℓ¹ accounting for coefficients dropped by a truncation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub discarded_mass: f64,
    pub max_index_touched: (i64, i64),
}

impl TailReport {
    pub fn merge(self, other: TailReport) -> TailReport {
        TailReport {
            discarded_mass: self.discarded_mass + other.discarded_mass,
            max_index_touched: (
                self.max_index_touched.0.max(other.max_index_touched.0),
                self.max_index_touched.1.max(other.max_index_touched.1),
            ),
        }
    }
}

/// A finitely supported element of the noncommutative torus `A_θ`.
#[derive(Clone, PartialEq)]
pub struct TwistedSeries {
    theta: f64,
    half_width: usize,
    coeffs: Vec<C64>,
}

impl fmt::Debug for TwistedSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let nz = self.coeffs.iter().filter(|c| **c != C64::new(0.0, 0.0)).count();
        f.debug_struct("TwistedSeries")
            .field("theta", &self.theta)
            .field("half_width", &self.half_width)
            .field("nonzero", &nz)
            .field("l1", &self.l1_norm())
            .finish()
    }
}

#[inline]
fn side(half_width: usize) -> usize {
    2 * half_width + 1
}

pub fn same_theta(a: f64, b: f64) -> Result<()> {
    if (a - b).abs() <= THETA_EQ * (1.0 + a.abs().max(b.abs())) {
        Ok(())
    } else {
        Err(Error::ThetaMismatch { left: a, right: b })
    }
}

impl TwistedSeries {
    pub fn zeros(theta: f64, half_width: usize) -> Self {
        let s = side(half_width);
        Self {
            theta,
            half_width,
            coeffs: vec![C64::new(0.0, 0.0); s * s],
        }
    }

    pub fn scalar(theta: f64, half_width: usize, value: C64) -> Self {
        let mut out = Self::zeros(theta, half_width);
        out.set(0, 0, value);
        out
    }

    pub fn identity(theta: f64, half_width: usize) -> Self {
        Self::scalar(theta, half_width, C64::new(1.0, 0.0))
    }

    /// `c · U1^m U2^n`; the window is widened if the monomial does not fit.
    pub fn monomial(theta: f64, half_width: usize, m: i64, n: i64, c: C64) -> Self {
        let hw = half_width.max(m.unsigned_abs() as usize).max(n.unsigned_abs() as usize);
        let mut out = Self::zeros(theta, hw);
        out.set(m, n, c);
        out
    }

    pub fn from_fn(theta: f64, half_width: usize, f: impl Fn(i64, i64) -> C64) -> Self {
        let mut out = Self::zeros(theta, half_width);
        let h = half_width as i64;
        for m in -h..=h {
            for n in -h..=h {
                out.set(m, n, f(m, n));
            }
        }
        out
    }

    /// Builds a series from explicit `(m, n, value)` entries.
    pub fn from_entries(
        theta: f64,
        half_width: usize,
        entries: impl IntoIterator<Item = (i64, i64, C64)>,
    ) -> Result<Self> {
        let mut out = Self::zeros(theta, half_width);
        for (m, n, c) in entries {
            if !out.in_window(m, n) {
                return Err(Error::Format(format!(
                    "coefficient ({m}, {n}) outside window {half_width}"
                )));
            }
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::Format(format!("non-finite coefficient at ({m}, {n})")));
            }
            out.set(m, n, c);
        }
        Ok(out)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    #[inline]
    pub fn in_window(&self, m: i64, n: i64) -> bool {
        let h = self.half_width as i64;
        m.abs() <= h && n.abs() <= h
    }

    #[inline]
    fn index(&self, m: i64, n: i64) -> usize {
        let h = self.half_width as i64;
        ((m + h) as usize) * side(self.half_width) + (n + h) as usize
    }

    /// Coefficient of `U1^m U2^n` (zero outside the window).
    pub fn coeff(&self, m: i64, n: i64) -> C64 {
        if self.in_window(m, n) {
            self.coeffs[self.index(m, n)]
        } else {
            C64::new(0.0, 0.0)
        }
    }

    /// Panics if `(m, n)` lies outside the window.
    pub fn set(&mut self, m: i64, n: i64, value: C64) {
        assert!(self.in_window(m, n), "({m}, {n}) outside window {}", self.half_width);
        let i = self.index(m, n);
        self.coeffs[i] = value;
    }

    /// All window entries in lexicographic `(m, n)` order.
    pub fn iter(&self) -> impl Iterator<Item = (i64, i64, C64)> + '_ {
        let h = self.half_width as i64;
        let s = side(self.half_width);
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(i, c)| ((i / s) as i64 - h, (i % s) as i64 - h, *c))
    }

    pub fn nonzero(&self) -> impl Iterator<Item = (i64, i64, C64)> + '_ {
        self.iter().filter(|(_, _, c)| *c != C64::new(0.0, 0.0))
    }

    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    /// `sqrt(Σ|a_mn|²) = sqrt(trace(a* a))`.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest coefficientwise difference, over the union of both windows.
    pub fn max_abs_diff(&self, other: &TwistedSeries) -> f64 {
        let h = self.half_width.max(other.half_width) as i64;
        let mut worst = 0.0f64;
        for m in -h..=h {
            for n in -h..=h {
                worst = worst.max((self.coeff(m, n) - other.coeff(m, n)).norm());
            }
        }
        worst
    }

    /// Copy with a different window; shrinking reports the dropped mass.
    pub fn resized(&self, half_width: usize) -> (TwistedSeries, TailReport) {
        let mut out = TwistedSeries::zeros(self.theta, half_width);
        let mut tail = TailReport::default();
        for (m, n, c) in self.nonzero() {
            if out.in_window(m, n) {
                out.set(m, n, c);
            } else {
                tail.discarded_mass += c.norm();
                tail.max_index_touched.0 = tail.max_index_touched.0.max(m.abs());
                tail.max_index_touched.1 = tail.max_index_touched.1.max(n.abs());
            }
        }
        (out, tail)
    }

    /// Same element over another deformation parameter (used when moving
    /// between `θ` and an integer translate of it).
    pub fn with_theta(&self, theta: f64) -> TwistedSeries {
        TwistedSeries {
            theta,
            ..self.clone()
        }
    }

    /// Smallest radius outside which the ℓ¹ mass is negligible.
    pub fn support_radius(&self) -> usize {
        let total = self.l1_norm();
        if total == 0.0 {
            return 0;
        }
        let h = self.half_width;
        // mass on each ring max(|m|,|n|) = r
        let mut ring = vec![0.0; h + 1];
        for (m, n, c) in self.nonzero() {
            ring[m.unsigned_abs().max(n.unsigned_abs()) as usize] += c.norm();
        }
        let mut tail = 0.0;
        for r in (0..=h).rev() {
            tail += ring[r];
            if tail > SUPPORT_TAIL_FRACTION * total {
                return r;
            }
        }
        0
    }

    pub fn scale(&self, c: C64) -> TwistedSeries {
        TwistedSeries {
            theta: self.theta,
            half_width: self.half_width,
            coeffs: self.coeffs.iter().map(|x| x * c).collect(),
        }
    }

    pub fn scale_real(&self, c: f64) -> TwistedSeries {
        self.scale(C64::new(c, 0.0))
    }

    fn combine(&self, other: &TwistedSeries, sign: f64) -> Result<TwistedSeries> {
        same_theta(self.theta, other.theta)?;
        if self.half_width == other.half_width {
            return Ok(TwistedSeries {
                theta: self.theta,
                half_width: self.half_width,
                coeffs: self
                    .coeffs
                    .iter()
                    .zip(&other.coeffs)
                    .map(|(a, b)| a + b * sign)
                    .collect(),
            });
        }
        let mut out = TwistedSeries::zeros(self.theta, self.half_width.max(other.half_width));
        for (m, n, c) in self.nonzero() {
            let i = out.index(m, n);
            out.coeffs[i] += c;
        }
        for (m, n, c) in other.nonzero() {
            let i = out.index(m, n);
            out.coeffs[i] += c * sign;
        }
        Ok(out)
    }

    pub fn checked_add(&self, other: &TwistedSeries) -> Result<TwistedSeries> {
        self.combine(other, 1.0)
    }

    pub fn checked_sub(&self, other: &TwistedSeries) -> Result<TwistedSeries> {
        self.combine(other, -1.0)
    }

    /// Exact product on the enlarged window `M_a + M_b`.
    pub fn multiply_full(&self, other: &TwistedSeries) -> Result<TwistedSeries> {
        same_theta(self.theta, other.theta)?;
        let hw = self.half_width + other.half_width;
        let mut out = TwistedSeries::zeros(self.theta, hw);
        let ha = self.half_width as i64;
        let hb = other.half_width as i64;
        let phases = PhaseTable::new(self.theta, ha * hb);
        let sb = side(other.half_width);
        let so = side(hw);
        let h = hw as i64;
        for (m, n, a) in self.nonzero() {
            for mb in -hb..=hb {
                let ap = a * phases.get(n * mb);
                let row_b = ((mb + hb) as usize) * sb;
                let row_o = ((m + mb + h) as usize) * so + (n - hb + h) as usize;
                let src = &other.coeffs[row_b..row_b + sb];
                let dst = &mut out.coeffs[row_o..row_o + sb];
                for (d, b) in dst.iter_mut().zip(src) {
                    *d += ap * b;
                }
            }
        }
        Ok(out)
    }

    /// Twisted product re-truncated to the larger operand window.
    pub fn multiply(&self, other: &TwistedSeries) -> Result<(TwistedSeries, TailReport)> {
        let full = self.multiply_full(other)?;
        Ok(full.resized(self.half_width.max(other.half_width)))
    }

    /// `a*`, with `(U1^m U2^n)* = e^{2πiθ mn} U1^{-m} U2^{-n}`.
    pub fn adjoint(&self) -> TwistedSeries {
        let h = self.half_width as i64;
        let phases = PhaseTable::new(self.theta, h * h);
        let mut out = TwistedSeries::zeros(self.theta, self.half_width);
        for (m, n, c) in self.nonzero() {
            out.set(-m, -n, c.conj() * phases.get(m * n));
        }
        out
    }

    /// The normalized trace: the `(0, 0)` coefficient.
    pub fn trace(&self) -> C64 {
        self.coeff(0, 0)
    }

    /// `trace(a b)` without forming the product.
    pub fn trace_product(&self, other: &TwistedSeries) -> Result<C64> {
        same_theta(self.theta, other.theta)?;
        let h = self.half_width.min(other.half_width) as i64;
        let phases = PhaseTable::new(self.theta, h * h);
        let mut acc = C64::new(0.0, 0.0);
        for m in -h..=h {
            for n in -h..=h {
                acc += self.coeff(m, n) * other.coeff(-m, -n) * phases.get(-n * m);
            }
        }
        Ok(acc)
    }

    /// Canonical derivation: multiplies `a_{mn}` by `2πi m` or `2πi n`.
    pub fn derive(&self, axis: Axis) -> TwistedSeries {
        self.apply_symbol(|m, n| {
            let k = match axis {
                Axis::One => m,
                Axis::Two => n,
            };
            C64::new(0.0, 2.0 * PI * k as f64)
        })
    }

    /// `∂_(τ)` or, with `conjugated`, `∂̄_(τ)`.
    pub fn holo_derive(&self, cs: &ConformalStructure, conjugated: bool) -> TwistedSeries {
        let [c1, c2] = if conjugated {
            cs.antiholo_coeffs()
        } else {
            cs.holo_coeffs()
        };
        self.apply_symbol(|m, n| C64::new(0.0, 2.0 * PI) * (c1 * m as f64 + c2 * n as f64))
    }

    /// `Δ = g^{μν} ∂_μ ∂_ν`.
    pub fn laplacian(&self, cs: &ConformalStructure) -> TwistedSeries {
        self.apply_symbol(|m, n| C64::new(cs.laplacian_symbol(m, n), 0.0))
    }

    /// Multiplies each coefficient by a Fourier multiplier.
    pub fn apply_symbol(&self, symbol: impl Fn(i64, i64) -> C64) -> TwistedSeries {
        let mut out = TwistedSeries::zeros(self.theta, self.half_width);
        for (m, n, c) in self.nonzero() {
            out.set(m, n, c * symbol(m, n));
        }
        out
    }

    /// `(a + a*) / 2`.
    pub fn hermitian_part(&self) -> TwistedSeries {
        let adj = self.adjoint();
        (self + &adj).scale_real(0.5)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.adjoint()) <= tol
    }

    /// Exact commutator `ab − ba` on the enlarged window.
    pub fn commutator(&self, other: &TwistedSeries) -> Result<TwistedSeries> {
        self.multiply_full(other)?
            .checked_sub(&other.multiply_full(self)?)
    }
}

// Operator forms assume equal θ; they panic on mismatch. Products are exact
// (window M_a + M_b).
impl Add for &TwistedSeries {
    type Output = TwistedSeries;
    fn add(self, rhs: &TwistedSeries) -> TwistedSeries {
        self.checked_add(rhs).expect("theta mismatch in +")
    }
}

impl Sub for &TwistedSeries {
    type Output = TwistedSeries;
    fn sub(self, rhs: &TwistedSeries) -> TwistedSeries {
        self.checked_sub(rhs).expect("theta mismatch in -")
    }
}

impl Mul for &TwistedSeries {
    type Output = TwistedSeries;
    fn mul(self, rhs: &TwistedSeries) -> TwistedSeries {
        self.multiply_full(rhs).expect("theta mismatch in *")
    }
}

impl Neg for &TwistedSeries {
    type Output = TwistedSeries;
    fn neg(self) -> TwistedSeries {
        self.scale_real(-1.0)
    }
}

//! Exact Gaussian-polynomial sections of `E_{r,q} = S(ℝ × Z_q)`.
//!
//! A section is, for each `k ∈ Z_q`, a finite sum of terms
//! `e^{γ} P(s) e^{αs² + βs}` with `Re α < 0`. Translations, modulations,
//! multiplication by `s` and differentiation all map such terms to terms of
//! the same shape, so the module actions and the connection are evaluated
//! symbolically.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::conformal::ConformalStructure;
use crate::error::{Error, Result};
use crate::module::geometry::ModuleGeometry;
use crate::tolerances::THETA_EQ;
use crate::twisted::{reduce_theta, same_theta, unit_phase, Axis, TwistedSeries};

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// `e^{log_scale} · poly(s) · e^{quad s² + lin s}`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussTerm {
    /// Coefficients in increasing degree.
    pub poly: Vec<C64>,
    pub quad: C64,
    pub lin: C64,
    pub log_scale: C64,
}

impl GaussTerm {
    pub fn new(poly: Vec<C64>, quad: C64, lin: C64) -> Result<Self> {
        let t = Self {
            poly,
            quad,
            lin,
            log_scale: zero(),
        };
        t.check()?;
        Ok(t)
    }

    pub fn gaussian(amplitude: C64, quad: C64, lin: C64) -> Result<Self> {
        Self::new(vec![amplitude], quad, lin)
    }

    fn check(&self) -> Result<()> {
        if !(self.quad.re < 0.0) {
            return Err(Error::Integrability(format!(
                "quadratic exponent {} has non-negative real part",
                self.quad
            )));
        }
        Ok(())
    }

    pub fn eval(&self, s: f64) -> C64 {
        let mut p = zero();
        for c in self.poly.iter().rev() {
            p = p * s + c;
        }
        p * (self.quad * s * s + self.lin * s + self.log_scale).exp()
    }

    /// `s ↦ f(s − d)`.
    pub fn translate(&self, d: f64) -> GaussTerm {
        let n = self.poly.len();
        let mut poly = vec![zero(); n];
        // binomial expansion of P(s − d)
        let mut pow = vec![1.0; n];
        for i in 1..n {
            pow[i] = pow[i - 1] * (-d);
        }
        for (j, c) in self.poly.iter().enumerate() {
            let mut binom = 1.0;
            for i in (0..=j).rev() {
                poly[i] += c * binom * pow[j - i];
                binom = binom * i as f64 / (j - i + 1) as f64;
            }
        }
        GaussTerm {
            poly,
            quad: self.quad,
            lin: self.lin - self.quad * (2.0 * d),
            log_scale: self.log_scale + self.quad * (d * d) - self.lin * d,
        }
    }

    /// Multiplication by `e^{dlin·s} · phase`.
    pub fn modulate(&self, dlin: C64, phase: C64) -> GaussTerm {
        GaussTerm {
            poly: self.poly.iter().map(|c| c * phase).collect(),
            quad: self.quad,
            lin: self.lin + dlin,
            log_scale: self.log_scale,
        }
    }

    pub fn scale(&self, c: C64) -> GaussTerm {
        GaussTerm {
            poly: self.poly.iter().map(|x| x * c).collect(),
            ..self.clone()
        }
    }

    /// Multiplication by `c·s`.
    pub fn times_s(&self, c: C64) -> GaussTerm {
        let mut poly = vec![zero(); self.poly.len() + 1];
        for (j, x) in self.poly.iter().enumerate() {
            poly[j + 1] = x * c;
        }
        GaussTerm {
            poly,
            ..self.clone()
        }
    }

    pub fn derivative(&self) -> GaussTerm {
        let n = self.poly.len();
        let mut poly = vec![zero(); n + 1];
        for (j, x) in self.poly.iter().enumerate() {
            if j > 0 {
                poly[j - 1] += x * j as f64;
            }
            poly[j] += x * self.lin;
            poly[j + 1] += x * self.quad * 2.0;
        }
        GaussTerm {
            poly,
            ..self.clone()
        }
    }

    /// `a·(c s)·f + b·f'` as a single term.
    fn linear_connection(&self, c: C64, a: C64, b: C64) -> GaussTerm {
        let x = self.times_s(c * a);
        let y = self.derivative();
        let poly = x
            .poly
            .iter()
            .zip(&y.poly)
            .map(|(u, v)| u + v * b)
            .collect();
        GaussTerm {
            poly,
            ..self.clone()
        }
    }

    /// Folds `e^{log_scale}` into the polynomial.
    pub fn folded(&self) -> GaussTerm {
        let f = self.log_scale.exp();
        GaussTerm {
            poly: self.poly.iter().map(|c| c * f).collect(),
            quad: self.quad,
            lin: self.lin,
            log_scale: zero(),
        }
    }
}

/// An element of `E_{r,q}` given by Gaussian-polynomial terms per `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussPolySection {
    geometry: ModuleGeometry,
    components: Vec<Vec<GaussTerm>>,
}

impl GaussPolySection {
    pub fn zero(geometry: ModuleGeometry) -> Self {
        Self {
            geometry,
            components: vec![Vec::new(); geometry.q as usize],
        }
    }

    /// Builds a section from per-`k` term lists (`components.len() == q`).
    pub fn new(geometry: ModuleGeometry, components: Vec<Vec<GaussTerm>>) -> Result<Self> {
        if components.len() != geometry.q as usize {
            return Err(Error::Parameter(format!(
                "expected {} components, got {}",
                geometry.q,
                components.len()
            )));
        }
        for t in components.iter().flatten() {
            t.check()?;
        }
        Ok(Self {
            geometry,
            components,
        })
    }

    pub fn geometry(&self) -> &ModuleGeometry {
        &self.geometry
    }

    pub fn components(&self) -> &[Vec<GaussTerm>] {
        &self.components
    }

    pub fn term_count(&self) -> usize {
        self.components.iter().map(Vec::len).sum()
    }

    pub fn q(&self) -> usize {
        self.components.len()
    }

    pub fn push(&mut self, k: i64, term: GaussTerm) -> Result<()> {
        term.check()?;
        let q = self.q() as i64;
        self.components[k.rem_euclid(q) as usize].push(term);
        Ok(())
    }

    pub fn eval(&self, s: f64, k: i64) -> C64 {
        let q = self.q() as i64;
        self.components[k.rem_euclid(q) as usize]
            .iter()
            .map(|t| t.eval(s))
            .sum()
    }

    fn map_terms(&self, f: impl Fn(&GaussTerm) -> GaussTerm) -> GaussPolySection {
        GaussPolySection {
            geometry: self.geometry,
            components: self
                .components
                .iter()
                .map(|ts| ts.iter().map(&f).collect())
                .collect(),
        }
    }

    pub fn scale(&self, c: C64) -> GaussPolySection {
        self.map_terms(|t| t.scale(c))
    }

    /// Concatenates term lists (formal sum).
    pub fn add(&self, other: &GaussPolySection) -> Result<GaussPolySection> {
        self.same_module(other)?;
        let mut out = self.clone();
        for (dst, src) in out.components.iter_mut().zip(&other.components) {
            dst.extend(src.iter().cloned());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &GaussPolySection) -> Result<GaussPolySection> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn same_module(&self, other: &GaussPolySection) -> Result<()> {
        let (a, b) = (&self.geometry, &other.geometry);
        if a.r != b.r || a.q != b.q || a.a != b.a || (a.alpha - b.alpha).abs() > THETA_EQ {
            return Err(Error::Parameter("sections belong to different modules".into()));
        }
        Ok(())
    }

    /// `(ξ·Z1^m)(s, k) = ξ(s − mε, k − m r)`.
    fn right_z1(&self, m: i64) -> GaussPolySection {
        if m == 0 {
            return self.clone();
        }
        let q = self.q() as i64;
        let d = m as f64 * self.geometry.epsilon;
        let mut out = GaussPolySection::zero(self.geometry);
        for k in 0..q {
            let src = (k - m * self.geometry.r).rem_euclid(q) as usize;
            out.components[k as usize] = self.components[src].iter().map(|t| t.translate(d)).collect();
        }
        out
    }

    /// `(ξ·Z2^n)(s, k) = e^{2πi n (s − k/q)} ξ(s, k)`.
    fn right_z2(&self, n: i64) -> GaussPolySection {
        if n == 0 {
            return self.clone();
        }
        let q = self.q() as i64;
        let dlin = C64::new(0.0, 2.0 * PI * n as f64);
        let mut out = self.clone();
        for k in 0..q {
            let phase = unit_phase(-((n * k).rem_euclid(q) as f64) / q as f64);
            out.components[k as usize] = self.components[k as usize]
                .iter()
                .map(|t| t.modulate(dlin, phase))
                .collect();
        }
        out
    }

    /// `(U1^m ξ)(s, k) = ξ(s − m/q, k − m)`.
    fn left_u1(&self, m: i64) -> GaussPolySection {
        if m == 0 {
            return self.clone();
        }
        let q = self.q() as i64;
        let d = m as f64 / q as f64;
        let mut out = GaussPolySection::zero(self.geometry);
        for k in 0..q {
            let src = (k - m).rem_euclid(q) as usize;
            out.components[k as usize] = self.components[src].iter().map(|t| t.translate(d)).collect();
        }
        out
    }

    /// `(U2^n ξ)(s, k) = e^{2πi n (s/ε − a k)/q} ξ(s, k)`.
    fn left_u2(&self, n: i64) -> GaussPolySection {
        if n == 0 {
            return self.clone();
        }
        let g = &self.geometry;
        let q = g.q;
        let dlin = C64::new(0.0, 2.0 * PI * n as f64 / (q as f64 * g.epsilon));
        let mut out = self.clone();
        for k in 0..q {
            let phase = unit_phase(-((n * g.a * k).rem_euclid(q) as f64) / q as f64);
            out.components[k as usize] = self.components[k as usize]
                .iter()
                .map(|t| t.modulate(dlin, phase))
                .collect();
        }
        out
    }

    /// `ξ · (Z1^m Z2^n)`.
    pub fn act_right_monomial(&self, m: i64, n: i64) -> GaussPolySection {
        self.right_z1(m).right_z2(n)
    }

    /// `ξ · (Z2^n Z1^m)`.
    pub fn act_right_monomial_z2_first(&self, m: i64, n: i64) -> GaussPolySection {
        self.right_z2(n).right_z1(m)
    }

    /// `ξ · (Z1^m Z2^n)^{-1} = (ξ · Z2^{-n}) · Z1^{-m}`.
    pub fn act_right_monomial_inverse(&self, m: i64, n: i64) -> GaussPolySection {
        self.right_z2(-n).right_z1(-m)
    }

    /// `(U1^m U2^n) ξ`.
    pub fn act_left_monomial(&self, m: i64, n: i64) -> GaussPolySection {
        self.left_u2(n).left_u1(m)
    }

    /// Right action of an element of `A_α`, monomial by monomial.
    pub fn act_right(&self, z: &TwistedSeries) -> Result<GaussPolySection> {
        same_theta(z.theta(), self.geometry.alpha)?;
        let mut out = GaussPolySection::zero(self.geometry);
        for (m, n, c) in z.nonzero() {
            let part = self.act_right_monomial(m, n).scale(c);
            for (dst, src) in out.components.iter_mut().zip(part.components) {
                dst.extend(src);
            }
        }
        Ok(out)
    }

    /// Left action of an element of `A_θ` (θ compared modulo 1).
    pub fn act_left(&self, u: &TwistedSeries) -> Result<GaussPolySection> {
        let (x, y) = (reduce_theta(u.theta()), reduce_theta(self.geometry.theta));
        let d = (x - y).abs();
        if d.min(1.0 - d) > THETA_EQ * (1.0 + self.geometry.theta.abs()) {
            return Err(Error::ThetaMismatch {
                left: u.theta(),
                right: self.geometry.theta,
            });
        }
        let mut out = GaussPolySection::zero(self.geometry);
        for (m, n, c) in u.nonzero() {
            let part = self.act_left_monomial(m, n).scale(c);
            for (dst, src) in out.components.iter_mut().zip(part.components) {
                dst.extend(src);
            }
        }
        Ok(out)
    }

    /// Constant-curvature connection: `∇1 = (2πi/ε) s`, `∇2 = d/ds`.
    pub fn nabla(&self, axis: Axis) -> GaussPolySection {
        let c = C64::new(0.0, 2.0 * PI / self.geometry.epsilon);
        match axis {
            Axis::One => self.map_terms(|t| t.times_s(c)),
            Axis::Two => self.map_terms(GaussTerm::derivative),
        }
    }

    /// Lift of `∂_(τ)` (or `∂̄_(τ)` when `conjugated`) through the connection.
    pub fn nabla_holo(&self, cs: &ConformalStructure, conjugated: bool) -> GaussPolySection {
        let [a, b] = if conjugated {
            cs.antiholo_coeffs()
        } else {
            cs.holo_coeffs()
        };
        let c = C64::new(0.0, 2.0 * PI / self.geometry.epsilon);
        self.map_terms(|t| t.linear_connection(c, a, b))
    }

    /// Sample points used for pointwise comparisons.
    fn sample_points(&self) -> Vec<f64> {
        let width = self.geometry.epsilon.abs().sqrt().max(0.5);
        (-40..=40).map(|i| i as f64 * 0.15 * width).collect()
    }

    /// Largest pointwise difference `|ξ − η|` on a sample grid, relative to
    /// the largest sampled magnitude.
    pub fn relative_difference(&self, other: &GaussPolySection) -> f64 {
        let q = self.q() as i64;
        let mut diff = 0.0f64;
        let mut scale = 0.0f64;
        for s in self.sample_points() {
            for k in 0..q {
                let (x, y) = (self.eval(s, k), other.eval(s, k));
                diff = diff.max((x - y).norm());
                scale = scale.max(x.norm()).max(y.norm());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            diff / scale
        }
    }

    /// Largest sampled magnitude of the section.
    pub fn sampled_max(&self) -> f64 {
        let q = self.q() as i64;
        let mut scale = 0.0f64;
        for s in self.sample_points() {
            for k in 0..q {
                scale = scale.max(self.eval(s, k).norm());
            }
        }
        scale
    }

    /// Drops terms whose folded magnitude is below `threshold`.
    pub fn pruned(&self, threshold: f64) -> GaussPolySection {
        let mut out = self.clone();
        for ts in out.components.iter_mut() {
            ts.retain(|t| {
                // peak of |e^{αs²+βs+γ}| at s* = −Re β / (2 Re α)
                let s = -t.lin.re / (2.0 * t.quad.re);
                let peak = (t.quad.re * s * s + t.lin.re * s + t.log_scale.re).exp();
                let size: f64 = t
                    .poly
                    .iter()
                    .enumerate()
                    .map(|(j, c)| c.norm() * (s.abs() + 1.0).powi(j as i32))
                    .sum();
                peak * size > threshold
            });
        }
        out
    }
}

/// Serialized form of a section: per-`k` term arrays
/// `[[poly as [re, im]...], quad, lin]` with the constant factor folded in.
#[derive(Serialize, Deserialize)]
pub struct SectionFile {
    pub format: String,
    pub geometry: ModuleGeometry,
    pub components: Vec<Vec<(Vec<[f64; 2]>, [f64; 2], [f64; 2])>>,
}

pub const SECTION_FORMAT: &str = "gauss-poly-section/1";

impl From<&GaussPolySection> for SectionFile {
    fn from(s: &GaussPolySection) -> Self {
        SectionFile {
            format: SECTION_FORMAT.into(),
            geometry: s.geometry,
            components: s
                .components
                .iter()
                .map(|ts| {
                    ts.iter()
                        .map(|t| {
                            let f = t.folded();
                            (
                                f.poly.iter().map(|c| [c.re, c.im]).collect(),
                                [f.quad.re, f.quad.im],
                                [f.lin.re, f.lin.im],
                            )
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

impl TryFrom<SectionFile> for GaussPolySection {
    type Error = Error;
    fn try_from(f: SectionFile) -> Result<Self> {
        if f.format != SECTION_FORMAT {
            return Err(Error::Format(format!("unknown section format {:?}", f.format)));
        }
        f.geometry.validate()?;
        let components = f
            .components
            .into_iter()
            .map(|ts| {
                ts.into_iter()
                    .map(|(poly, quad, lin)| {
                        GaussTerm::new(
                            poly.into_iter().map(|[re, im]| C64::new(re, im)).collect(),
                            C64::new(quad[0], quad[1]),
                            C64::new(lin[0], lin[1]),
                        )
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        GaussPolySection::new(f.geometry, components)
    }
}

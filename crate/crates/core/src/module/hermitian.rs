//! The two hermitian structures of `E_{r,q}`.
//!
//! `⟨ξ, η⟩_α` has coefficients `c_{mn} = ∫ conj(ξ) · η (Z1^m Z2^n)^{-1}` and
//! is right `A_α`-linear. `⟨ξ, η⟩_θ` is not given by a formula: it is the
//! element of `A_θ` whose left action reproduces `ζ ↦ ξ ⟨η, ζ⟩_α`, found by
//! least squares over a battery of test sections.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::module::gaussian::{l2_inner, l2_norm_sq};
use crate::module::geometry::ModuleGeometry;
use crate::module::section::{GaussPolySection, GaussTerm};
use crate::spectral::spectral_bounds;
use crate::twisted::{Axis, PhaseTable, TailReport, TwistedSeries};

/// Ordering/side conventions for the `A_α`-valued structure. Only
/// [`HermitianVariant::Z1Z2Inverse`] satisfies the module axioms; the others
/// exist so the convention can be shown to be pinned by the property tests.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HermitianVariant {
    /// `c_{mn} = ⟨ξ, η (Z1^m Z2^n)^{-1}⟩`
    #[default]
    #[serde(rename = "z1z2-inverse")]
    Z1Z2Inverse,
    /// `c_{mn} = ⟨ξ, η (Z2^n Z1^m)^{-1}⟩`
    #[serde(rename = "z2z1-inverse")]
    Z2Z1Inverse,
    /// `c_{mn} = ⟨ξ, η Z1^m Z2^n⟩`
    #[serde(rename = "z1z2-direct")]
    Z1Z2Direct,
    /// `c_{mn} = ⟨ξ, η Z2^n Z1^m⟩`
    #[serde(rename = "z2z1-direct")]
    Z2Z1Direct,
}

impl HermitianVariant {
    pub const ALL: [HermitianVariant; 4] = [
        HermitianVariant::Z1Z2Inverse,
        HermitianVariant::Z2Z1Inverse,
        HermitianVariant::Z1Z2Direct,
        HermitianVariant::Z2Z1Direct,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HermitianVariant::Z1Z2Inverse => "z1z2-inverse",
            HermitianVariant::Z2Z1Inverse => "z2z1-inverse",
            HermitianVariant::Z1Z2Direct => "z1z2-direct",
            HermitianVariant::Z2Z1Direct => "z2z1-direct",
        }
    }

    fn shifted(self, eta: &GaussPolySection, m: i64, n: i64) -> GaussPolySection {
        match self {
            HermitianVariant::Z1Z2Inverse => eta.act_right_monomial_inverse(m, n),
            HermitianVariant::Z2Z1Inverse => eta.act_right_monomial(-m, -n),
            HermitianVariant::Z1Z2Direct => eta.act_right_monomial(m, n),
            HermitianVariant::Z2Z1Direct => eta.act_right_monomial_z2_first(m, n),
        }
    }
}

impl fmt::Display for HermitianVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HermitianVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown hermitian variant {s:?}")))
    }
}

/// An `A_α`-valued inner product together with its truncation estimate.
#[derive(Clone, Debug)]
pub struct AlphaInner {
    pub value: TwistedSeries,
    /// ℓ¹ mass found on the two rings just outside the window.
    pub tail: TailReport,
}

fn ring(radius: i64) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    for m in -radius..=radius {
        for n in -radius..=radius {
            if m.abs().max(n.abs()) == radius {
                out.push((m, n));
            }
        }
    }
    out
}

/// `⟨ξ, η⟩_α` with an explicit convention, truncated to `window`.
///
/// Fails with a window error when the estimated discarded mass exceeds
/// `tail_budget` relative to the ℓ¹ mass kept.
pub fn inner_alpha_variant(
    xi: &GaussPolySection,
    eta: &GaussPolySection,
    window: usize,
    variant: HermitianVariant,
    tail_budget: f64,
) -> Result<AlphaInner> {
    xi.same_module(eta)?;
    let alpha = xi.geometry().alpha;
    let w = window as i64;
    let side = 2 * w + 1;
    let coeffs = (0..side * side)
        .into_par_iter()
        .map(|i| {
            let (m, n) = (i / side - w, i % side - w);
            l2_inner(xi, &variant.shifted(eta, m, n))
        })
        .collect::<Result<Vec<_>>>()?;
    let value = TwistedSeries::from_fn(alpha, window, |m, n| {
        coeffs[((m + w) * side + (n + w)) as usize]
    });
    let outer: Vec<(i64, i64)> = ring(w + 1).into_iter().chain(ring(w + 2)).collect();
    let tail_coeffs = outer
        .par_iter()
        .map(|&(m, n)| l2_inner(xi, &variant.shifted(eta, m, n)).map(|c| c.norm()))
        .collect::<Result<Vec<_>>>()?;
    let discarded: f64 = tail_coeffs.iter().sum();
    let tail = TailReport {
        discarded_mass: discarded,
        max_index_touched: (w + 2, w + 2),
    };
    let kept = value.l1_norm();
    if discarded > tail_budget * kept.max(f64::MIN_POSITIVE) {
        return Err(Error::Window(format!(
            "A_α inner product at half-width {window} leaves relative tail mass {:.3e} (budget {tail_budget:.1e})",
            discarded / kept.max(f64::MIN_POSITIVE)
        )));
    }
    Ok(AlphaInner { value, tail })
}

/// `⟨ξ, η⟩_α` in the canonical convention.
pub fn inner_alpha(
    xi: &GaussPolySection,
    eta: &GaussPolySection,
    window: usize,
    tail_budget: f64,
) -> Result<AlphaInner> {
    inner_alpha_variant(xi, eta, window, HermitianVariant::default(), tail_budget)
}

/// Residuals of the four hermitian-structure axioms over a set of sections.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HermitianChecks {
    /// `max ‖⟨ξ,η⟩* − ⟨η,ξ⟩‖` relative to the coefficient scale.
    pub hermiticity: f64,
    /// `max ‖⟨ξ, η Z_i⟩ − ⟨ξ, η⟩ Z_i‖` relative.
    pub right_linearity: f64,
    /// Smallest `λ_min / λ_max` of `⟨ξ, ξ⟩_α`.
    pub positivity: f64,
    /// `max ‖∂_μ⟨ξ,η⟩ − ⟨∇_μ ξ, η⟩ − ⟨ξ, ∇_μ η⟩‖` relative.
    pub compatibility: f64,
}

impl HermitianChecks {
    pub fn passes(&self, tol: f64) -> bool {
        self.hermiticity <= tol
            && self.right_linearity <= tol
            && self.positivity >= -tol
            && self.compatibility <= tol
    }
}

fn rel_diff(a: &TwistedSeries, b: &TwistedSeries) -> f64 {
    let scale = a.max_abs().max(b.max_abs());
    if scale == 0.0 {
        0.0
    } else {
        a.max_abs_diff(b) / scale
    }
}

/// Evaluates the hermitian-structure axioms for `variant` on consecutive
/// pairs of `sections`. Coefficients are compared on the inner window
/// `window − 2` so that products with generators stay untruncated.
pub fn check_hermitian_structure(
    variant: HermitianVariant,
    sections: &[GaussPolySection],
    window: usize,
) -> Result<HermitianChecks> {
    if sections.len() < 2 || window < 3 {
        return Err(Error::Parameter(
            "hermitian checks need at least two sections and window ≥ 3".into(),
        ));
    }
    let inner = |x: &GaussPolySection, y: &GaussPolySection| {
        inner_alpha_variant(x, y, window, variant, f64::INFINITY).map(|r| r.value)
    };
    let alpha = sections[0].geometry().alpha;
    let one = C64::new(1.0, 0.0);
    let mut out = HermitianChecks {
        positivity: f64::INFINITY,
        ..Default::default()
    };
    let core = window - 2;
    for pair in sections.windows(2) {
        let (xi, eta) = (&pair[0], &pair[1]);
        let xe = inner(xi, eta)?;
        let ex = inner(eta, xi)?;
        out.hermiticity = out
            .hermiticity
            .max(rel_diff(&xe.adjoint().resized(core).0, &ex.resized(core).0));

        for (m, n) in [(1, 0), (0, 1)] {
            let z = TwistedSeries::monomial(alpha, 1, m, n, one);
            let lhs = inner(xi, &eta.act_right(&z)?)?.resized(core).0;
            let rhs = xe.multiply(&z)?.0.resized(core).0;
            out.right_linearity = out.right_linearity.max(rel_diff(&lhs, &rhs));
        }

        for axis in Axis::ALL {
            let lhs = xe.derive(axis).resized(core).0;
            let rhs = (&inner(&xi.nabla(axis), eta)? + &inner(xi, &eta.nabla(axis))?)
                .resized(core)
                .0;
            out.compatibility = out.compatibility.max(rel_diff(&lhs, &rhs));
        }

        let xx = inner(xi, xi)?;
        let b = spectral_bounds(&xx.hermitian_part(), 2 * window);
        out.positivity = out.positivity.min(b.lower / b.upper.abs().max(f64::MIN_POSITIVE));
        // an element failing hermiticity cannot be positive
        let skew = rel_diff(&xx, &xx.adjoint());
        if skew > 1e-8 {
            out.positivity = out.positivity.min(-skew);
        }
    }
    Ok(out)
}

/// Battery of test sections with a factored least-squares normal matrix
/// for the left `A_θ` action on the window lattice.
pub struct TestBattery {
    geometry: ModuleGeometry,
    window: usize,
    sections: Vec<GaussPolySection>,
    factor: Cholesky<C64, Dyn>,
    condition: f64,
}

impl fmt::Debug for TestBattery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestBattery")
            .field("window", &self.window)
            .field("sections", &self.sections.len())
            .field("condition", &self.condition)
            .finish()
    }
}

/// Result of a least-squares coefficient extraction.
#[derive(Clone, Debug)]
pub struct Fit {
    pub series: TwistedSeries,
    /// `√(Σ‖T ζ_j − target_j‖² / Σ‖target_j‖²)`; limited below by about
    /// `1e−8` because it is evaluated by expanding the squares.
    pub residual: f64,
}

fn lattice_index(window: usize, m: i64, n: i64) -> usize {
    let w = window as i64;
    ((m + w) * (2 * w + 1) + (n + w)) as usize
}

impl TestBattery {
    /// Factors the normal matrix `G_{w,w'} = Σ_j ⟨U_w ζ_j, U_{w'} ζ_j⟩`.
    pub fn new(
        geometry: ModuleGeometry,
        window: usize,
        sections: Vec<GaussPolySection>,
        max_condition: f64,
    ) -> Result<Self> {
        if sections.is_empty() {
            return Err(Error::Parameter("empty test-section battery".into()));
        }
        for s in &sections {
            s.same_module(&GaussPolySection::zero(geometry))?;
        }
        let w = window as i64;
        let span = 2 * w;
        let dside = 2 * span + 1;
        // h(d) = Σ_j ⟨ζ_j, U_d ζ_j⟩ for |d| ≤ 2M
        let h = (0..dside * dside)
            .into_par_iter()
            .map(|i| {
                let (dm, dn) = (i / dside - span, i % dside - span);
                sections.iter().try_fold(C64::new(0.0, 0.0), |acc, z| {
                    Ok::<_, Error>(acc + l2_inner(z, &z.act_left_monomial(dm, dn))?)
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let n = ((2 * w + 1) * (2 * w + 1)) as usize;
        // U_w* U_w' = e^{2πiθ n (m − m')} U_{w'−w}
        let phases = PhaseTable::new(geometry.theta, 2 * w * w);
        let mut g = DMatrix::<C64>::zeros(n, n);
        for m in -w..=w {
            for nn in -w..=w {
                let row = lattice_index(window, m, nn);
                for m2 in -w..=w {
                    for n2 in -w..=w {
                        let col = lattice_index(window, m2, n2);
                        let d = ((m2 - m + span) * dside + (n2 - nn + span)) as usize;
                        g[(row, col)] = phases.get(nn * (m - m2)) * h[d];
                    }
                }
            }
        }
        // enforce exact hermitian symmetry before factoring
        let g = (&g + g.adjoint()) * C64::new(0.5, 0.0);
        let condition = condition_estimate(&g)?;
        if !(condition <= max_condition) {
            return Err(Error::Basis { condition });
        }
        let factor = Cholesky::new(g).ok_or(Error::Basis {
            condition: f64::INFINITY,
        })?;
        Ok(Self {
            geometry,
            window,
            sections,
            factor,
            condition,
        })
    }

    /// Gaussians `e^{−π(s − s₀)²/|ε| + 2πiνs}` on each `k`, with `(s₀, ν)`
    /// on a `per_axis × per_axis` grid over one period `[0, q|ε|) × [0, q)`
    /// of the phase-space translations. Averaging a rank-one operator over
    /// that torus gives a multiple of the identity, which keeps the normal
    /// matrix well conditioned.
    pub fn gaussian_grid(
        geometry: ModuleGeometry,
        window: usize,
        per_axis: usize,
        max_condition: f64,
    ) -> Result<Self> {
        let q = geometry.q;
        let eps = geometry.epsilon.abs();
        let quad = C64::new(-PI / eps, 0.0);
        let mut sections = Vec::new();
        for k in 0..q {
            for u in 0..per_axis {
                for v in 0..per_axis {
                    let s0 = q as f64 * eps * u as f64 / per_axis as f64;
                    let nu = q as f64 * v as f64 / per_axis as f64;
                    let term = GaussTerm::gaussian(C64::new(1.0, 0.0), quad, C64::new(0.0, 0.0))?
                        .translate(s0)
                        .modulate(C64::new(0.0, 2.0 * PI * nu), C64::new(1.0, 0.0));
                    let mut s = GaussPolySection::zero(geometry);
                    s.push(k, term)?;
                    sections.push(s);
                }
            }
        }
        Self::new(geometry, window, sections, max_condition)
    }

    /// Default battery: a 3 × 3 phase-space grid per `k`.
    pub fn standard(geometry: ModuleGeometry, window: usize, max_condition: f64) -> Result<Self> {
        Self::gaussian_grid(geometry, window, 3, max_condition)
    }

    pub fn geometry(&self) -> &ModuleGeometry {
        &self.geometry
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn sections(&self) -> &[GaussPolySection] {
        &self.sections
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Least-squares `T` with `T ζ_j ≈ targets[j]`.
    pub fn fit(&self, targets: &[GaussPolySection]) -> Result<Fit> {
        if targets.len() != self.sections.len() {
            return Err(Error::Parameter(format!(
                "expected {} targets, got {}",
                self.sections.len(),
                targets.len()
            )));
        }
        let w = self.window as i64;
        let side = 2 * w + 1;
        let rhs = (0..side * side)
            .into_par_iter()
            .map(|i| {
                let (m, n) = (i / side - w, i % side - w);
                self.sections
                    .iter()
                    .zip(targets)
                    .try_fold(C64::new(0.0, 0.0), |acc, (z, t)| {
                        Ok::<_, Error>(acc + l2_inner(&z.act_left_monomial(m, n), t)?)
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        let b = DVector::from_vec(rhs);
        let t = self.factor.solve(&b);
        let target_sq = targets
            .iter()
            .map(l2_norm_sq)
            .sum::<Result<f64>>()?;
        let l = self.factor.l_dirty();
        // tᴴ G t = ‖Lᴴ t‖² (only the lower triangle of the factor is valid)
        let lt = l.lower_triangle().adjoint() * &t;
        let quad = lt.norm_squared();
        let cross = t.dotc(&b).re;
        let resid_sq = (quad - 2.0 * cross + target_sq).max(0.0);
        let residual = if target_sq > 0.0 {
            (resid_sq / target_sq).sqrt()
        } else {
            0.0
        };
        let series =
            TwistedSeries::from_fn(self.geometry.theta, self.window, |m, n| t[lattice_index(self.window, m, n)]);
        Ok(Fit { series, residual })
    }

    /// Extracts the `A_θ` coefficients of an `A_θ`-linear operator on `E`.
    pub fn fit_operator<F>(&self, op: F) -> Result<Fit>
    where
        F: Fn(&GaussPolySection) -> Result<GaussPolySection> + Sync,
    {
        let targets = self
            .sections
            .par_iter()
            .map(&op)
            .collect::<Result<Vec<_>>>()?;
        self.fit(&targets)
    }
}

/// `λ_max / λ_min` of a hermitian positive matrix by power iteration and
/// inverse iteration on a Cholesky factor.
fn condition_estimate(g: &DMatrix<C64>) -> Result<f64> {
    let n = g.nrows();
    let Some(chol) = Cholesky::new(g.clone()) else {
        return Ok(f64::INFINITY);
    };
    let start = DVector::from_fn(n, |i, _| C64::new(1.0 + (i % 7) as f64 * 0.1, (i % 3) as f64 * 0.05));
    let iterate = |apply: &dyn Fn(&DVector<C64>) -> DVector<C64>| {
        let mut x = start.normalize();
        let mut lambda = 0.0;
        for _ in 0..60 {
            let y = apply(&x);
            let next = y.norm();
            if next == 0.0 {
                return 0.0;
            }
            let done = (next - lambda).abs() <= 1e-6 * next;
            lambda = next;
            x = y / C64::new(next, 0.0);
            if done {
                break;
            }
        }
        lambda
    };
    let max = iterate(&|x| g * x);
    let inv_max = iterate(&|x| chol.solve(x));
    if inv_max == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(max * inv_max)
}

/// `⟨ξ, η⟩_θ` defined through `⟨ξ, η⟩_θ ζ = ξ ⟨η, ζ⟩_α` on the battery.
pub fn inner_theta(
    xi: &GaussPolySection,
    eta: &GaussPolySection,
    battery: &TestBattery,
    tail_budget: f64,
) -> Result<Fit> {
    xi.same_module(eta)?;
    let window = battery.window();
    battery.fit_operator(|zeta| {
        let coeff = inner_alpha(eta, zeta, window, tail_budget)?.value;
        xi.act_right(&coeff)
    })
}

/// Closed-form cross-check for [`inner_theta`]: the coefficient at `U_w` is
/// `⟨U_w η, ξ⟩ / |qε|`, which follows from the trace duality
/// `τ_θ(⟨ξ,η⟩_θ) = τ_α(⟨η,ξ⟩_α) / |qε|`.
pub fn inner_theta_trace_dual(
    xi: &GaussPolySection,
    eta: &GaussPolySection,
    window: usize,
) -> Result<TwistedSeries> {
    xi.same_module(eta)?;
    let g = xi.geometry();
    let scale = 1.0 / (g.q as f64 * g.epsilon).abs();
    let w = window as i64;
    let side = 2 * w + 1;
    let coeffs = (0..side * side)
        .into_par_iter()
        .map(|i| {
            let (m, n) = (i / side - w, i % side - w);
            l2_inner(&eta.act_left_monomial(m, n), xi).map(|c| c * scale)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TwistedSeries::from_fn(g.theta, window, |m, n| {
        coeffs[lattice_index(window, m, n)]
    }))
}

/// Relative pointwise residual of `T ζ = ξ ⟨η, ζ⟩_α` on held-out sections.
pub fn morcom_residual(
    t: &TwistedSeries,
    xi: &GaussPolySection,
    eta: &GaussPolySection,
    held_out: &[GaussPolySection],
    window: usize,
    tail_budget: f64,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for zeta in held_out {
        let lhs = zeta.act_left(t)?;
        let rhs = xi.act_right(&inner_alpha(eta, zeta, window, tail_budget)?.value)?;
        worst = worst.max(lhs.relative_difference(&rhs));
    }
    Ok(worst)
}

/// Largest relative pointwise residual of
/// `[∇_μ, U_ν] = (2πi/qε) δ_μν U_ν` over `sections`.
pub fn induced_derivation_check(sections: &[GaussPolySection]) -> f64 {
    let mut worst = 0.0f64;
    for zeta in sections {
        let g = zeta.geometry();
        let factor = C64::new(0.0, 2.0 * PI / (g.q as f64 * g.epsilon));
        for mu in Axis::ALL {
            for nu in Axis::ALL {
                let (m, n) = match nu {
                    Axis::One => (1, 0),
                    Axis::Two => (0, 1),
                };
                let lhs = zeta.act_left_monomial(m, n).nabla(mu);
                let mut rhs = zeta.nabla(mu).act_left_monomial(m, n);
                if mu == nu {
                    rhs = rhs
                        .add(&zeta.act_left_monomial(m, n).scale(factor))
                        .expect("same module");
                }
                worst = worst.max(lhs.relative_difference(&rhs));
            }
        }
    }
    worst
}

//! Gaussian instantons: the projections `p_ψ = |ψ⟩⟨ψ,ψ⟩⁻¹⟨ψ|` built from
//! holomorphic Gaussian sections of a Heisenberg module, their gauge
//! orbits, and the moduli space `CP^{q−1} × T²_τ`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{invert_newton_schulz, purify_to_floor};
use crate::conformal::ConformalStructure;
use crate::error::{Error, Result};
use crate::module::{inner_alpha, GaussPolySection, GaussTerm, ModuleGeometry, TestBattery};
use crate::sigma::ProjectionReport;
use crate::spectral::{residual_norm, residual_window, spectral_bounds};
use crate::tolerances::Tolerances;
use crate::twisted::{TailReport, TwistedSeries};

/// Which first-order equation the Gaussian instantons satisfy, as measured
/// for every tested `(r, q, α, τ, λ)`: `∂̄_(τ)(p) p = 0`.
pub const INSTANTON_BRANCH: DualityBranch = DualityBranch::SelfDual;

/// Sign of the topological charge of a Gaussian instanton built from
/// `E_{r,q}` with `ε > 0`: the charge is `CHARGE_SIGN · q`.
pub const CHARGE_SIGN: i64 = -1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DualityBranch {
    SelfDual,
    AntiSelfDual,
}

/// Parameters of a Gaussian instanton.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstantonConfig {
    pub geometry: ModuleGeometry,
    pub cs: ConformalStructure,
    pub lambda: C64,
    /// Normalized: unit length, first nonzero entry real positive.
    pub amplitudes: Vec<C64>,
    pub window: usize,
    pub tolerances: Tolerances,
}

/// Projective normalization of an amplitude vector.
pub fn normalize_amplitudes(a: &[C64]) -> Result<Vec<C64>> {
    let norm = a.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::Parameter("amplitude vector must be nonzero and finite".into()));
    }
    let lead = a
        .iter()
        .find(|c| c.norm() > 1e-12 * norm)
        .copied()
        .unwrap_or(C64::new(1.0, 0.0));
    let phase = lead.conj() / lead.norm();
    Ok(a.iter().map(|c| c * phase / norm).collect())
}

impl InstantonConfig {
    pub fn new(
        geometry: ModuleGeometry,
        tau: C64,
        lambda: C64,
        amplitudes: &[C64],
        window: usize,
        tolerances: Tolerances,
    ) -> Result<Self> {
        geometry.validate()?;
        if amplitudes.len() != geometry.q as usize {
            return Err(Error::Parameter(format!(
                "expected {} amplitudes, got {}",
                geometry.q,
                amplitudes.len()
            )));
        }
        if window < 1 {
            return Err(Error::Parameter("window must be positive".into()));
        }
        if !lambda.re.is_finite() || !lambda.im.is_finite() {
            return Err(Error::Parameter("lambda must be finite".into()));
        }
        Ok(Self {
            geometry,
            cs: ConformalStructure::new(tau)?,
            lambda,
            amplitudes: normalize_amplitudes(amplitudes)?,
            window,
            tolerances,
        })
    }

    /// `(r, q) = (0, 1)`, `α = −1/θ`, `λ = 0`.
    pub fn boca(theta: f64, tau: C64, window: usize) -> Result<Self> {
        Self::new(
            ModuleGeometry::boca(theta)?,
            tau,
            C64::new(0.0, 0.0),
            &[C64::new(1.0, 0.0)],
            window,
            Tolerances::default(),
        )
    }

    pub fn with_lambda(&self, lambda: C64) -> Self {
        Self {
            lambda,
            ..self.clone()
        }
    }

    pub fn with_amplitudes(&self, amplitudes: &[C64]) -> Result<Self> {
        Self::new(
            self.geometry,
            self.cs.tau(),
            self.lambda,
            amplitudes,
            self.window,
            self.tolerances.clone(),
        )
    }
}

/// `ψ_λ(s, k) = A_k exp(iτπ s²/ε + λ(τ̄ − τ) s)`.
pub fn gaussian_section(cfg: &InstantonConfig) -> Result<GaussPolySection> {
    let tau = cfg.cs.tau();
    let quad = C64::new(0.0, PI) * tau / cfg.geometry.epsilon;
    if !(quad.re < 0.0) {
        return Err(Error::Integrability(format!(
            "iτπ/ε = {quad} is not decaying: ε = {} must be positive for Im τ > 0; \
             flip the orientation of (r, q, α)",
            cfg.geometry.epsilon
        )));
    }
    let lin = cfg.lambda * (tau.conj() - tau);
    let mut psi = GaussPolySection::zero(cfg.geometry);
    for (k, a) in cfg.amplitudes.iter().enumerate() {
        if a.norm() > 0.0 {
            psi.push(k as i64, GaussTerm::gaussian(*a, quad, lin)?)?;
        }
    }
    Ok(psi)
}

/// The Gram element `⟨ψ, ψ⟩_α`.
pub fn gram(psi: &GaussPolySection, window: usize, tol: &Tolerances) -> Result<TwistedSeries> {
    Ok(inner_alpha(psi, psi, window, tol.tail_budget)?.value.hermitian_part())
}

/// Drops coefficients below `rel` times the largest one.
fn prune(a: &TwistedSeries, rel: f64) -> TwistedSeries {
    let cut = a.max_abs() * rel;
    TwistedSeries::from_fn(a.theta(), a.half_width(), |m, n| {
        let c = a.coeff(m, n);
        if c.norm() > cut {
            c
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Diagnostics of one projection build.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BuildDiagnostics {
    pub gram_lower_bound: f64,
    pub gram_upper_bound: f64,
    pub inverse_iterations: usize,
    pub battery_sections: usize,
    pub battery_condition: f64,
    pub extraction_residual: f64,
    /// ℓ¹ norm of `p² − p` before purification.
    pub pre_purify_idempotency: f64,
    /// ℓ¹ norm of `p − p*` before purification.
    pub pre_purify_hermiticity: f64,
    pub purify_iterations: usize,
    pub tail: TailReport,
}

#[derive(Clone, Debug)]
pub struct Instanton {
    pub projection: TwistedSeries,
    pub report: ProjectionReport,
    pub diagnostics: BuildDiagnostics,
}

/// Extracts `p_ψ` for an arbitrary section with invertible Gram element:
/// the operator `ζ ↦ ψ ⟨ψ,ψ⟩⁻¹ ⟨ψ, ζ⟩_α` is fitted on the battery, then
/// purified.
pub fn projection_from_section(
    psi: &GaussPolySection,
    battery: &TestBattery,
    tol: &Tolerances,
) -> Result<(TwistedSeries, BuildDiagnostics)> {
    let window = battery.window();
    let g = gram(psi, window, tol)?;
    let bounds = spectral_bounds(&g, residual_window(&g));
    if bounds.lower <= 0.0 {
        return Err(Error::NotInvertible {
            lower: bounds.lower,
        });
    }
    let inv = invert_newton_schulz(&g, 500, tol.inverse * g.l1_norm().max(1.0))?;
    let g_inv = inv.inverse;
    // targets ζ ↦ ψ·(g⁻¹⟨ψ, ζ⟩_α), with tails merged in battery order so
    // the diagnostics are reproducible bit for bit
    let targets = battery
        .sections()
        .par_iter()
        .map(|zeta| {
            let h = inner_alpha(psi, zeta, window, tol.tail_budget)?.value;
            let (gh, t) = g_inv.multiply(&h)?;
            Ok((psi.act_right(&prune(&gh, 1e-17))?, t))
        })
        .collect::<Result<Vec<_>>>()?;
    let tail = targets.iter().fold(inv.tail, |acc, (_, t)| acc.merge(*t));
    let targets: Vec<GaussPolySection> = targets.into_iter().map(|(s, _)| s).collect();
    let fit = battery.fit(&targets)?;
    let scale = fit.series.l1_norm().max(1.0);
    if tail.discarded_mass > tol.tail_budget * scale {
        return Err(Error::Window(format!(
            "A_α products at half-width {window} discard ℓ¹ mass {:.3e}",
            tail.discarded_mass
        )));
    }
    if !(fit.residual <= tol.extraction) {
        return Err(Error::Window(format!(
            "least-squares extraction residual {:.3e} exceeds {:.1e} at half-width {window}",
            fit.residual, tol.extraction
        )));
    }
    let raw = fit.series;
    // ℓ¹ bounds: cheap, and only diagnostic before purification
    let pre_idempotency = (&raw.multiply(&raw)?.0 - &raw).l1_norm();
    let pre_hermiticity = (&raw - &raw.adjoint()).l1_norm();
    // a window too narrow for the decay of p leaves an idempotency floor;
    // it is accepted (and reported) as long as p still counts as a projection
    let purified = purify_to_floor(&raw.hermitian_part(), 5, tol.purify, tol.projection_input)?;
    Ok((
        purified.projection,
        BuildDiagnostics {
            gram_lower_bound: bounds.lower,
            gram_upper_bound: bounds.upper,
            inverse_iterations: inv.iterations,
            battery_sections: battery.sections().len(),
            battery_condition: battery.condition(),
            extraction_residual: fit.residual,
            pre_purify_idempotency: pre_idempotency,
            pre_purify_hermiticity: pre_hermiticity,
            purify_iterations: purified.iterations,
            tail: tail.merge(purified.tail),
        },
    ))
}

/// The standard battery for a configuration.
pub fn battery_for(cfg: &InstantonConfig) -> Result<TestBattery> {
    TestBattery::standard(cfg.geometry, cfg.window, cfg.tolerances.battery_condition)
}

fn check_battery(cfg: &InstantonConfig, battery: &TestBattery) -> Result<()> {
    if battery.window() != cfg.window || battery.geometry() != &cfg.geometry {
        return Err(Error::Parameter("battery does not match the configuration".into()));
    }
    Ok(())
}

/// Builds `p_ψ` without evaluating the (comparatively expensive) report.
pub fn build_projection_only(
    cfg: &InstantonConfig,
    battery: &TestBattery,
) -> Result<(TwistedSeries, BuildDiagnostics)> {
    check_battery(cfg, battery)?;
    let psi = gaussian_section(cfg)?;
    projection_from_section(&psi, battery, &cfg.tolerances)
}

/// Builds `p_ψ` for the Gaussian of `cfg` using a prepared battery.
pub fn build_projection_with(cfg: &InstantonConfig, battery: &TestBattery) -> Result<Instanton> {
    let (projection, diagnostics) = build_projection_only(cfg, battery)?;
    let report = ProjectionReport::evaluate(&projection, &cfg.cs, &cfg.tolerances)?;
    Ok(Instanton {
        projection,
        report,
        diagnostics,
    })
}

pub fn build_projection(cfg: &InstantonConfig) -> Result<Instanton> {
    build_projection_with(cfg, &battery_for(cfg)?)
}

/// Operator-norm distance between two projections; the ℓ¹ bound is used
/// when it already settles the comparison with `tol`.
pub fn projection_distance(a: &TwistedSeries, b: &TwistedSeries, tol: f64) -> Result<f64> {
    let d = a.checked_sub(b)?;
    let l1 = d.l1_norm();
    if l1 <= tol {
        Ok(l1)
    } else {
        Ok(residual_norm(&d).min(l1))
    }
}

/// Generators `2πiτ/(τ−τ̄)` and `−2πi/(τ−τ̄)` of the lattice of gauge
/// shifts of `λ` (monomials `Z1` and `Z2`).
pub fn lattice_generators(cs: &ConformalStructure) -> [C64; 2] {
    let tau = cs.tau();
    let d = tau - tau.conj();
    let two_pi_i = C64::new(0.0, 2.0 * PI);
    [two_pi_i * tau / d, -two_pi_i / d]
}

/// `λ_g` for the monomial gauge transformation `g = Z1^m Z2^n`.
pub fn gauge_transform_lambda(lambda: C64, m: i64, n: i64, cs: &ConformalStructure) -> C64 {
    let tau = cs.tau();
    let d = tau - tau.conj();
    lambda + C64::new(0.0, 2.0 * PI) * tau / d * (C64::new(m as f64, 0.0) - n as f64 / tau)
}

/// `g⁻¹ λ g + g⁻¹ ∂̄_(τ) g` evaluated in the truncated `A_α`, for a general
/// invertible `g` and `λ ∈ A_α`. The inverse is `g* (g g*)⁻¹`.
pub fn gauge_transform_general(
    lambda: &TwistedSeries,
    g: &TwistedSeries,
    cs: &ConformalStructure,
    tol: &Tolerances,
) -> Result<TwistedSeries> {
    let gg = g.multiply(&g.adjoint())?.0.hermitian_part();
    let inv = invert_newton_schulz(&gg, 500, tol.inverse * gg.l1_norm().max(1.0))?.inverse;
    let g_inv = g.adjoint().multiply(&inv)?.0;
    let conj_part = g_inv.multiply(&lambda.multiply(g)?.0)?.0;
    let deriv = g_inv.multiply(&g.holo_derive(cs, true))?.0;
    Ok(&conj_part + &deriv)
}

/// A point of `CP^{q−1} × T²_τ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModuliPoint {
    /// Representative in `{x L1 + y L2 : 0 ≤ x, y < 1}`.
    pub lambda_class: C64,
    pub amplitudes_class: Vec<C64>,
}

/// Real coordinates of `λ` in the lattice basis.
fn lattice_coordinates(lambda: C64, basis: [C64; 2]) -> Result<(f64, f64)> {
    let [l1, l2] = basis;
    let det = l1.re * l2.im - l1.im * l2.re;
    if det.abs() <= 1e-12 * l1.norm() * l2.norm() {
        return Err(Error::Parameter("lattice generators are collinear".into()));
    }
    let x = (lambda.re * l2.im - lambda.im * l2.re) / det;
    let y = (l1.re * lambda.im - l1.im * lambda.re) / det;
    Ok((x, y))
}

/// Moves `(λ, A)` by `Z1^{-a} Z2^{-b}`: `λ ↦ λ − a L1 − b L2` and the
/// amplitudes pick up the matching `k`-shift and clock phases.
fn shift_point(lambda: C64, amps: &[C64], a: i64, b: i64, g: &ModuleGeometry, basis: [C64; 2]) -> (C64, Vec<C64>) {
    let q = g.q;
    let lam = lambda - basis[0] * a as f64 - basis[1] * b as f64;
    let shifted: Vec<C64> = (0..q)
        .map(|k| {
            // ψ·Z1^{-a}: A_k ↦ A_{k + a r};  ψ·Z2^{-b}: A_k ↦ e^{2πi b k/q} A_k
            let src = (k + a * g.r).rem_euclid(q) as usize;
            let phase = crate::twisted::unit_phase(((b * k).rem_euclid(q)) as f64 / q as f64);
            amps[src] * phase
        })
        .collect();
    (lam, shifted)
}

/// The sample gauge-equivalent to `(λ, A)` with `λ' = λ + m L1 + n L2`:
/// for `q > 1` the amplitudes are permuted and rephased to match.
pub fn lattice_translate(
    lambda: C64,
    amplitudes: &[C64],
    m: i64,
    n: i64,
    geometry: &ModuleGeometry,
    cs: &ConformalStructure,
) -> Result<(C64, Vec<C64>)> {
    if amplitudes.len() != geometry.q as usize {
        return Err(Error::Parameter("amplitude count must equal q".into()));
    }
    Ok(shift_point(lambda, amplitudes, -m, -n, geometry, lattice_generators(cs)))
}

/// Reduces `λ` into the fundamental parallelogram of the gauge lattice and
/// normalizes the amplitudes. The reduction is iterated to a fixed point so
/// that applying it twice changes nothing.
pub fn moduli_reduce(
    lambda: C64,
    amplitudes: &[C64],
    geometry: &ModuleGeometry,
    cs: &ConformalStructure,
) -> Result<ModuliPoint> {
    if amplitudes.len() != geometry.q as usize {
        return Err(Error::Parameter("amplitude count must equal q".into()));
    }
    let basis = lattice_generators(cs);
    let mut lam = lambda;
    let mut amps = normalize_amplitudes(amplitudes)?;
    for _ in 0..8 {
        let (x, y) = lattice_coordinates(lam, basis)?;
        let (a, b) = (x.floor() as i64, y.floor() as i64);
        if a == 0 && b == 0 {
            return Ok(ModuliPoint {
                lambda_class: lam,
                amplitudes_class: amps,
            });
        }
        let (l, s) = shift_point(lam, &amps, a, b, geometry, basis);
        lam = l;
        amps = normalize_amplitudes(&s)?;
    }
    Err(Error::Parameter(format!("lattice reduction of {lambda} did not settle")))
}

/// Kind of relation asserted between two scan samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairKind {
    /// `λ` differs by a lattice vector (with matching amplitude action).
    Lattice,
    /// Amplitudes differ by a global phase.
    Phase,
    /// Different moduli points: the distance is only reported.
    Distinct,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanSample {
    pub lambda: C64,
    pub amplitudes: Vec<C64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanRow {
    pub lambda: C64,
    pub amplitudes: Vec<C64>,
    pub report: Option<ProjectionReport>,
    pub diagnostics: Option<BuildDiagnostics>,
    pub error: Option<String>,
    #[serde(skip)]
    pub projection: Option<TwistedSeries>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairResult {
    pub first: usize,
    pub second: usize,
    pub kind: PairKind,
    pub distance: Option<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanTable {
    pub rows: Vec<ScanRow>,
    pub pairs: Vec<PairResult>,
    /// Tolerance for lattice-equivalent pairs.
    pub equivalence_tolerance: f64,
}

/// Lattice-equivalent and phase-equivalent pairs must agree this well.
pub const EQUIVALENCE_TOLERANCE: f64 = 1e-5;

impl ScanTable {
    /// Every row built (and, when reported, valid) and every pair passing.
    pub fn all_pass(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.error.is_none() && r.report.map(|rep| rep.valid).unwrap_or(true))
            && self.pairs.iter().all(|p| p.pass)
    }

    pub fn csv(&self) -> String {
        let q = self.rows.first().map(|r| r.amplitudes.len()).unwrap_or(0);
        let mut out = String::from("lambda_re,lambda_im");
        for k in 0..q {
            out.push_str(&format!(",a{k}_re,a{k}_im"));
        }
        out.push_str(",trace,action,charge,bp_gap,sd_residual,asd_residual,idempotency,error\n");
        for r in &self.rows {
            out.push_str(&format!("{:e},{:e}", r.lambda.re, r.lambda.im));
            for a in &r.amplitudes {
                out.push_str(&format!(",{:e},{:e}", a.re, a.im));
            }
            match &r.report {
                Some(rep) => out.push_str(&format!(
                    ",{:e},{:e},{:e},{:e},{:e},{:e},{:e},",
                    rep.trace,
                    rep.action,
                    rep.charge_raw,
                    rep.bp_gap,
                    rep.sd_residual,
                    rep.asd_residual,
                    rep.idempotency_residual
                )),
                None => out.push_str(",,,,,,,,"),
            }
            if let Some(e) = &r.error {
                out.push_str(&e.replace([',', '\n'], ";"));
            }
            out.push('\n');
        }
        out
    }
}

/// Builds every sample (in parallel, output in input order) and measures
/// the flagged pairs. Reports are evaluated only when `reports` is set.
pub fn moduli_scan(
    base: &InstantonConfig,
    samples: &[ScanSample],
    pairs: &[(usize, usize, PairKind)],
    battery: &TestBattery,
    reports: bool,
) -> Result<ScanTable> {
    if samples.is_empty() {
        return Err(Error::Parameter("empty scan grid".into()));
    }
    for &(i, j, _) in pairs {
        if i >= samples.len() || j >= samples.len() {
            return Err(Error::Parameter(format!("pair ({i}, {j}) out of range")));
        }
    }
    let rows: Vec<ScanRow> = samples
        .par_iter()
        .map(|s| {
            let built = base
                .with_amplitudes(&s.amplitudes)
                .map(|c| c.with_lambda(s.lambda))
                .and_then(|c| {
                    let (p, d) = build_projection_only(&c, battery)?;
                    let report = if reports {
                        Some(ProjectionReport::evaluate(&p, &c.cs, &c.tolerances)?)
                    } else {
                        None
                    };
                    Ok((p, d, report))
                });
            match built {
                Ok((p, d, report)) => ScanRow {
                    lambda: s.lambda,
                    amplitudes: s.amplitudes.clone(),
                    report,
                    diagnostics: Some(d),
                    error: None,
                    projection: Some(p),
                },
                Err(e) => ScanRow {
                    lambda: s.lambda,
                    amplitudes: s.amplitudes.clone(),
                    report: None,
                    diagnostics: None,
                    error: Some(e.to_string()),
                    projection: None,
                },
            }
        })
        .collect();
    let pairs = pairs
        .par_iter()
        .map(|&(i, j, kind)| {
            let distance = match (&rows[i].projection, &rows[j].projection) {
                (Some(a), Some(b)) => projection_distance(a, b, EQUIVALENCE_TOLERANCE).ok(),
                _ => None,
            };
            let pass = match (kind, distance) {
                (_, None) => false,
                (PairKind::Distinct, Some(_)) => true,
                (_, Some(d)) => d <= EQUIVALENCE_TOLERANCE,
            };
            PairResult {
                first: i,
                second: j,
                kind,
                distance,
                pass,
            }
        })
        .collect();
    Ok(ScanTable {
        rows,
        pairs,
        equivalence_tolerance: EQUIVALENCE_TOLERANCE,
    })
}

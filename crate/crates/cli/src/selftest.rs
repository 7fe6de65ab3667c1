//! Fast internal consistency battery at a small window.
//!
//! Everything here runs at `selftest.window` (default 8), so the instanton
//! limits are looser than those of `build` at the production window.

use std::f64::consts::PI;

use nc_sigma::flow::{perturb, relax, stable_step, FlowConfig};
use nc_sigma::instanton::{
    build_projection, gauge_transform_general, gauge_transform_lambda, moduli_reduce,
    InstantonConfig, CHARGE_SIGN,
};
use nc_sigma::io::series_to_json;
use nc_sigma::module::{
    check_hermitian_structure, induced_derivation_check, GaussPolySection, GaussTerm,
    ModuleGeometry,
};
use nc_sigma::random::random_series;
use nc_sigma::sigma::ProjectionReport;
use nc_sigma::{Axis, ConformalStructure, TwistedSeries, C64};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::commands::mod_one_distance;
use crate::config::RunConfig;
use crate::output::{Check, OutputDir};
use crate::CliError;

/// Relative agreement demanded of algebraic identities.
const IDENTITY: f64 = 1e-11;
/// Module-axiom residual limit.
const AXIOM: f64 = 1e-9;
/// Loose instanton limits for the small window.
const SMALL_CHARGE: f64 = 1e-4;
const SMALL_ACTION: f64 = 1e-2;
const SMALL_TRACE: f64 = 1e-3;
const FLOW_STEPS: usize = 20;

fn rel(a: &TwistedSeries, b: &TwistedSeries) -> f64 {
    let scale = a.max_abs().max(b.max_abs()).max(f64::MIN_POSITIVE);
    a.max_abs_diff(b) / scale
}

fn mul(a: &TwistedSeries, b: &TwistedSeries) -> nc_sigma::Result<TwistedSeries> {
    Ok(a.multiply(b)?.0)
}

fn algebra_checks(rng: &mut ChaCha8Rng, theta: f64, w: usize) -> Result<Vec<Check>, CliError> {
    // radius 2 keeps every triple product inside the window
    let a = random_series(rng, theta, w, 2, 1.0);
    let b = random_series(rng, theta, w, 2, 1.0);
    let c = random_series(rng, theta, w, 2, 1.0);
    let assoc = rel(&mul(&mul(&a, &b)?, &c)?, &mul(&a, &mul(&b, &c)?)?);
    let adj = rel(&mul(&a, &b)?.adjoint(), &mul(&b.adjoint(), &a.adjoint())?);
    let tab = a.trace_product(&b)?;
    let tba = b.trace_product(&a)?;
    let cyclic = (tab - tba).norm() / tab.norm().max(f64::MIN_POSITIVE);
    let mut leibniz = 0.0f64;
    let mut trace_deriv = 0.0f64;
    for axis in Axis::ALL {
        let lhs = mul(&a, &b)?.derive(axis);
        let rhs = &mul(&a.derive(axis), &b)? + &mul(&a, &b.derive(axis))?;
        leibniz = leibniz.max(rel(&lhs, &rhs));
        trace_deriv = trace_deriv.max(mul(&a, &b)?.derive(axis).trace().norm());
    }
    // Z2 Z1 = e^{2πiθ} Z1 Z2
    let one = C64::new(1.0, 0.0);
    let z1 = TwistedSeries::monomial(theta, w, 1, 0, one);
    let z2 = TwistedSeries::monomial(theta, w, 0, 1, one);
    let comm = rel(
        &mul(&z2, &z1)?,
        &mul(&z1, &z2)?.scale(C64::from_polar(1.0, 2.0 * PI * theta)),
    );
    Ok(vec![
        Check::at_most("associativity", assoc, IDENTITY),
        Check::at_most("adjoint_antimultiplicative", adj, IDENTITY),
        Check::at_most("trace_cyclic", cyclic, IDENTITY),
        Check::at_most("commutation_relation", comm, IDENTITY),
        Check::at_most("leibniz", leibniz, IDENTITY),
        Check::at_most("trace_of_derivative", trace_deriv, IDENTITY),
    ])
}

fn laplacian_check(rng: &mut ChaCha8Rng, theta: f64, w: usize, cs: &ConformalStructure) -> Check {
    let a = random_series(rng, theta, w, 3, 1.0);
    let lap = a.laplacian(cs);
    let dd = a.holo_derive(cs, true).holo_derive(cs, false).scale_real(4.0);
    Check::at_most("laplacian_is_four_del_delbar", rel(&lap, &dd), IDENTITY)
}

/// A few well-separated Gaussian sections of `geometry`.
fn sample_sections(geometry: ModuleGeometry) -> Result<Vec<GaussPolySection>, CliError> {
    let eps = geometry.epsilon.abs();
    let quad = C64::new(-PI / eps, 0.3);
    let shifts = [(0.0, 0.0), (0.3, 0.2), (-0.2, 0.5)];
    let mut out = Vec::new();
    for (i, (s0, nu)) in shifts.iter().enumerate() {
        let mut s = GaussPolySection::zero(geometry);
        for k in 0..geometry.q {
            let amp = C64::new(1.0, 0.25 * (i as f64 + k as f64));
            let term = GaussTerm::gaussian(amp, quad, C64::new(0.0, 0.0))?
                .translate(s0 * eps)
                .modulate(C64::new(0.0, 2.0 * PI * nu), C64::new(1.0, 0.0));
            s.push(k, term)?;
        }
        out.push(s);
    }
    Ok(out)
}

fn module_checks(cfg: &RunConfig, w: usize) -> Result<Vec<Check>, CliError> {
    let variant = cfg.selftest.variant;
    let mut checks = Vec::new();
    for (label, g) in [
        ("boca", ModuleGeometry::boca(0.37)?),
        ("q2", ModuleGeometry::from_alpha(-1, 2, -1.6)?),
    ] {
        let sections = sample_sections(g)?;
        let h = check_hermitian_structure(variant, &sections, w)?;
        checks.push(Check::at_most(&format!("{label}_hermiticity"), h.hermiticity, AXIOM));
        checks.push(Check::at_most(
            &format!("{label}_right_linearity"),
            h.right_linearity,
            AXIOM,
        ));
        checks.push(Check {
            name: format!("{label}_positivity"),
            pass: h.positivity > 0.0,
            value: Some(h.positivity),
            limit: Some(0.0),
            detail: Some("smallest λ_min/λ_max of ⟨ξ,ξ⟩ (must be > 0)".into()),
        });
        checks.push(Check::at_most(
            &format!("{label}_compatibility"),
            h.compatibility,
            AXIOM,
        ));
        checks.push(Check::at_most(
            &format!("{label}_induced_derivation"),
            induced_derivation_check(&sections),
            IDENTITY,
        ));
    }
    Ok(checks)
}

fn instanton_and_flow_checks(w: usize, cs: &ConformalStructure, seed: u64) -> Result<Vec<Check>, CliError> {
    let theta = 0.37;
    let icfg = InstantonConfig::boca(theta, cs.tau(), w)?;
    let inst = build_projection(&icfg)?;
    let rep = &inst.report;
    let mut checks = vec![
        Check::at_most("small_window_charge", (rep.charge_raw - CHARGE_SIGN as f64).abs(), SMALL_CHARGE),
        Check::at_most("small_window_action", (rep.action - 2.0).abs(), SMALL_ACTION),
        Check::at_most("small_window_trace", mod_one_distance(rep.trace - theta), SMALL_TRACE),
    ];

    let p = &inst.projection;
    let shifted = series_to_json(&p.with_theta(theta + 1.0))?;
    checks.push(Check::flag(
        "theta_shift_serialization",
        series_to_json(p)? == shifted,
        "θ and θ+1 files are byte-identical",
    ));

    let tol = &icfg.tolerances;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = perturb(p, &mut rng, 1e-2, 2, tol)?;
    let flow_cfg = FlowConfig::new(stable_step(w, cs), FLOW_STEPS, *cs)?;
    let (_, trace) = relax(&start, &flow_cfg)?;
    let first = trace.records.first().map(|r| r.action).unwrap_or(f64::NAN);
    let last = trace.last().map(|r| r.action).unwrap_or(f64::NAN);
    checks.push(Check::flag(
        "flow_decreases_action",
        last < first && trace.max_action_increase() <= 1e-9,
        format!("action {first:.12} -> {last:.12}"),
    ));
    let report = ProjectionReport::evaluate(p, cs, tol)?;
    checks.push(Check::flag("small_window_valid", report.valid, "report of the built projection"));
    Ok(checks)
}

fn moduli_checks(cs: &ConformalStructure) -> Result<Vec<Check>, CliError> {
    let g = ModuleGeometry::from_alpha(-1, 2, -1.6)?;
    let amps = [C64::new(0.6, 0.1), C64::new(-0.3, 0.7)];
    let lambda = C64::new(7.3, -4.1);
    let once = moduli_reduce(lambda, &amps, &g, cs)?;
    let twice = moduli_reduce(once.lambda_class, &once.amplitudes_class, &g, cs)?;
    let drift = (once.lambda_class - twice.lambda_class).norm()
        + once
            .amplitudes_class
            .iter()
            .zip(&twice.amplitudes_class)
            .map(|(a, b)| (a - b).norm())
            .sum::<f64>();

    // monomial gauge transformation of a constant λ
    let theta = 0.37;
    let w = 4;
    let lam = C64::new(0.4, -1.3);
    let lam_series = TwistedSeries::scalar(theta, w, lam);
    let mut worst = 0.0f64;
    for (m, n) in [(1, 0), (0, 1), (2, -1)] {
        let gm = TwistedSeries::monomial(theta, w, m, n, C64::new(1.0, 0.0));
        let general = gauge_transform_general(&lam_series, &gm, cs, &Default::default())?;
        let expected = TwistedSeries::scalar(theta, w, gauge_transform_lambda(lam, m, n, cs));
        worst = worst.max(general.max_abs_diff(&expected) / expected.max_abs());
    }
    Ok(vec![
        Check::at_most("moduli_reduce_idempotent", drift, 1e-12),
        Check::at_most("monomial_gauge_shift", worst, 1e-10),
    ])
}

#[derive(Serialize)]
struct SelftestReport<'a> {
    window: usize,
    variant: &'static str,
    checks: &'a [Check],
}

pub fn cmd_selftest(cfg: &RunConfig, out: &mut OutputDir) -> Result<Vec<Check>, CliError> {
    let w = cfg.selftest.window;
    let cs = ConformalStructure::new(cfg.tau())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut checks = algebra_checks(&mut rng, 0.37, w)?;
    checks.push(laplacian_check(&mut rng, 0.37, w, &cs));
    checks.extend(module_checks(cfg, w)?);
    checks.extend(instanton_and_flow_checks(w, &cs, cfg.seed)?);
    checks.extend(moduli_checks(&cs)?);
    out.write_json(
        "selftest.json",
        &SelftestReport {
            window: w,
            variant: cfg.selftest.variant.name(),
            checks: &checks,
        },
    )?;
    Ok(checks)
}

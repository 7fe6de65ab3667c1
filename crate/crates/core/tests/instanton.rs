use std::sync::OnceLock;

use nc_sigma::instanton::{
    battery_for, build_projection_only, gaussian_section, lattice_translate, moduli_reduce,
    moduli_scan, projection_distance, projection_from_section, InstantonConfig, PairKind,
    ScanSample, CHARGE_SIGN, EQUIVALENCE_TOLERANCE,
};
use nc_sigma::module::{ModuleGeometry, TestBattery};
use nc_sigma::random::random_series;
use nc_sigma::sigma::{
    action_holomorphic_form, action_metric_form, charge_raw, duality_conditions, ProjectionReport,
};
use nc_sigma::{ConformalStructure, TwistedSeries, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const THETA: f64 = 0.37;
const WINDOW: usize = 16;

struct Fixture {
    cfg: InstantonConfig,
    battery: TestBattery,
    p: TwistedSeries,
}

fn boca() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let cfg = InstantonConfig::boca(THETA, C64::new(0.0, 1.0), WINDOW).unwrap();
        let battery = battery_for(&cfg).unwrap();
        let p = build_projection_only(&cfg, &battery).unwrap().0;
        Fixture { cfg, battery, p }
    })
}

fn complement(p: &TwistedSeries) -> TwistedSeries {
    &TwistedSeries::identity(p.theta(), p.half_width()) - p
}

#[test]
fn boca_instanton_invariants() {
    let f = boca();
    let r = ProjectionReport::evaluate(&f.p, &f.cfg.cs, &f.cfg.tolerances).unwrap();
    assert!(r.valid);
    assert_eq!(r.charge_rounded, CHARGE_SIGN);
    assert!((r.action - 2.0).abs() < 1e-3);
    assert!(r.sd_residual <= 1e-6 && r.eom_residual <= 1e-6);
    // the other branch is far from satisfied
    assert!(r.asd_residual > 0.1);
    assert!((r.trace - THETA).abs() < 1e-4);
}

#[test]
fn charge_is_metric_independent() {
    let p = &boca().p;
    let q = charge_raw(p).unwrap().raw;
    for tau in [C64::new(1.0, 2.0), C64::new(0.3, 0.7)] {
        // the charge never sees τ; the action form does
        let cs = ConformalStructure::new(tau).unwrap();
        assert!(action_metric_form(p, &cs).unwrap() >= 2.0 * q.abs() - 1e-8);
    }
    assert!((q - charge_raw(p).unwrap().raw).abs() <= 1e-8);
}

#[test]
fn complement_reverses_charge_and_keeps_action() {
    let f = boca();
    let c = complement(&f.p);
    let (q, qc) = (charge_raw(&f.p).unwrap().raw, charge_raw(&c).unwrap().raw);
    assert!((q + qc).abs() <= 1e-8, "{q} {qc}");
    let (s, sc) = (
        action_metric_form(&f.p, &f.cfg.cs).unwrap(),
        action_metric_form(&c, &f.cfg.cs).unwrap(),
    );
    assert!((s - sc).abs() <= 1e-8);
    // and 1 − p is anti-self-dual
    let r = ProjectionReport::evaluate(&c, &f.cfg.cs, &f.cfg.tolerances).unwrap();
    assert!(r.asd_residual <= 1e-6);
}

#[test]
fn action_formulas_and_duality_halves_agree() {
    let f = boca();
    for tau in [C64::new(0.0, 1.0), C64::new(0.3, 0.8)] {
        let cs = ConformalStructure::new(tau).unwrap();
        let a = action_metric_form(&f.p, &cs).unwrap();
        let b = action_holomorphic_form(&f.p, &cs).unwrap();
        assert!((a - b).abs() <= 1e-10, "{a} {b}");
    }
    // the two halves of each condition are adjoint to one another
    let [x, y] = duality_conditions(&f.p, &f.cfg.cs, false).unwrap();
    assert!((x - y).abs() <= 1e-10, "{x} {y}");
    let [x, y] = duality_conditions(&f.p, &f.cfg.cs, true).unwrap();
    assert!((x - y).abs() <= 1e-3 * x, "{x} {y}");
}

#[test]
fn projection_is_gauge_invariant() {
    // ψ ↦ ψ·g for invertible g ∈ A_α leaves p_ψ unchanged
    let f = boca();
    let psi = gaussian_section(&f.cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let alpha = f.cfg.geometry.alpha;
    let g = &TwistedSeries::identity(alpha, 2) + &random_series(&mut rng, alpha, 2, 1, 0.3);
    let rotated = psi.act_right(&g).unwrap();
    let (p2, _) = projection_from_section(&rotated, &f.battery, &f.cfg.tolerances).unwrap();
    let d = projection_distance(&f.p, &p2, 1e-6).unwrap();
    assert!(d <= 1e-6, "{d:e}");
}

#[test]
fn lattice_orbit_shares_invariants() {
    let f = boca();
    let cs = f.cfg.cs;
    let lambda = C64::new(0.4, -0.3);
    let (l2, a2) = lattice_translate(lambda, &f.cfg.amplitudes, 1, -1, &f.cfg.geometry, &cs).unwrap();
    let p1 = build_projection_only(&f.cfg.with_lambda(lambda), &f.battery).unwrap().0;
    let shifted = f.cfg.with_lambda(l2).with_amplitudes(&a2).unwrap();
    let p2 = build_projection_only(&shifted, &f.battery).unwrap().0;
    assert!(projection_distance(&p1, &p2, EQUIVALENCE_TOLERANCE).unwrap() <= EQUIVALENCE_TOLERANCE);
    let action = |p| action_metric_form(p, &cs).unwrap();
    let charge = |p| charge_raw(p).unwrap().raw;
    assert!((action(&p1) - action(&p2)).abs() <= 1e-6);
    assert!((charge(&p1) - charge(&p2)).abs() <= 1e-6);
    assert!((p1.trace() - p2.trace()).norm() <= 1e-6);
}

#[test]
fn moduli_reduction_is_a_retraction() {
    let cs = ConformalStructure::new(C64::new(0.3, 0.8)).unwrap();
    let g = ModuleGeometry::from_alpha(-1, 2, -1.6).unwrap();
    let amps = [C64::new(0.2, 0.9), C64::new(-0.5, 0.1)];
    let lambda = C64::new(-9.1, 13.4);
    let once = moduli_reduce(lambda, &amps, &g, &cs).unwrap();
    let twice = moduli_reduce(once.lambda_class, &once.amplitudes_class, &g, &cs).unwrap();
    assert_eq!(once, twice);
    // a lattice translate reduces to the same point
    let (l, a) = lattice_translate(lambda, &amps, 3, -2, &g, &cs).unwrap();
    let other = moduli_reduce(l, &a, &g, &cs).unwrap();
    assert!((other.lambda_class - once.lambda_class).norm() < 1e-9);
    for (x, y) in other.amplitudes_class.iter().zip(&once.amplitudes_class) {
        assert!((x - y).norm() < 1e-12);
    }
}

#[test]
fn small_scan_flags_pairs_and_failures() {
    let f = boca();
    let one = vec![C64::new(1.0, 0.0)];
    let (l, a) = lattice_translate(C64::new(0.0, 0.0), &one, 0, 1, &f.cfg.geometry, &f.cfg.cs).unwrap();
    let samples = vec![
        ScanSample { lambda: C64::new(0.0, 0.0), amplitudes: one.clone() },
        ScanSample { lambda: l, amplitudes: a },
        ScanSample { lambda: C64::new(0.0, 0.0), amplitudes: vec![C64::new(0.0, 0.0)] },
    ];
    let table = moduli_scan(
        &f.cfg,
        &samples,
        &[(0, 1, PairKind::Lattice), (0, 2, PairKind::Lattice)],
        &f.battery,
        false,
    )
    .unwrap();
    assert!(table.pairs[0].pass);
    assert!(!table.pairs[1].pass);
    assert!(table.rows[2].error.is_some());
    assert!(!table.all_pass());
    assert_eq!(table.csv().lines().count(), 4);
}

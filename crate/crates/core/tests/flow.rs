use nc_sigma::calculus::purify;
use nc_sigma::flow::{
    descent_direction, descent_direction_bracket, flow_step, perturb, relax, stable_step,
    FlowConfig, FlowStatus,
};
use nc_sigma::instanton::{battery_for, build_projection_only, InstantonConfig};
use nc_sigma::random::random_hermitian;
use nc_sigma::sigma::action_metric_form;
use nc_sigma::tolerances::Tolerances;
use nc_sigma::{ConformalStructure, TwistedSeries, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn instanton(window: usize, tau: C64) -> (TwistedSeries, ConformalStructure) {
    let cfg = InstantonConfig::boca(0.37, tau, window).unwrap();
    let p = build_projection_only(&cfg, &battery_for(&cfg).unwrap()).unwrap().0;
    (p, cfg.cs)
}

#[test]
fn purify_restores_a_noisy_instanton() {
    let (p, _) = instanton(16, C64::new(0.0, 1.0));
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let noise = random_hermitian(&mut rng, p.theta(), 16, 2, 1e-3);
    let out = purify(&(&p + &noise), 20, 1e-10).unwrap();
    assert!(out.residual <= 1e-10);
    assert!(out.projection.max_abs_diff(&out.projection.adjoint()) <= 1e-15);
    // stays in the same component: the trace is unchanged
    assert!((out.projection.trace().re - p.trace().re).abs() <= 1e-2);
}

#[test]
fn descent_direction_is_the_double_bracket() {
    let (p, cs) = instanton(10, C64::new(0.3, 0.8));
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let q = perturb(&p, &mut rng, 5e-2, 2, &Tolerances::default()).unwrap();
    let a = descent_direction(&q, &cs).unwrap();
    let b = descent_direction_bracket(&q, &cs).unwrap();
    // the two forms agree up to the idempotency defect times ‖Δp‖
    let defect = (&q.multiply(&q).unwrap().0 - &q).l1_norm();
    let lap = q.laplacian(&cs).l1_norm();
    let diff = a.max_abs_diff(&b);
    assert!(diff <= 4.0 * defect * lap + 1e-12 * lap, "{diff:e} {defect:e} {lap:e}");
    // the direction is hermitian
    assert!(a.max_abs_diff(&a.adjoint()) <= 1e-13);
}

#[test]
fn a_small_step_decreases_the_action() {
    let (p, cs) = instanton(12, C64::new(0.0, 1.0));
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let q = perturb(&p, &mut rng, 2e-2, 2, &Tolerances::default()).unwrap();
    let cfg = FlowConfig::new(stable_step(12, &cs), 1, cs).unwrap();
    let g = descent_direction(&q, &cs).unwrap();
    let r = flow_step(&q, &g, cfg.step, true, &cfg).unwrap();
    assert!(r.accepted);
    assert!(r.action < action_metric_form(&q, &cs).unwrap());
}

#[test]
fn relaxation_is_monotone_and_conserves_charge() {
    let (p, cs) = instanton(12, C64::new(0.0, 1.0));
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let q = perturb(&p, &mut rng, 1e-2, 2, &Tolerances::default()).unwrap();
    let cfg = FlowConfig::new(stable_step(12, &cs), 40, cs).unwrap();
    let (_, trace) = relax(&q, &cfg).unwrap();
    assert_eq!(trace.status, FlowStatus::BudgetExhausted);
    assert_eq!(trace.records.len(), 41);
    assert!(trace.max_action_increase() <= 0.0);
    assert!(trace.charge_drift() <= 1e-4);
    let (first, last) = (&trace.records[0], trace.last().unwrap());
    assert!(last.bp_gap < first.bp_gap);
    assert!(trace.csv().lines().count() == 42);
}

#[test]
fn oversized_step_is_halved_not_fatal() {
    let (p, cs) = instanton(10, C64::new(0.0, 1.0));
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    let q = perturb(&p, &mut rng, 1e-2, 2, &Tolerances::default()).unwrap();
    let cfg = FlowConfig::new(0.5, 5, cs).unwrap();
    let (_, trace) = relax(&q, &cfg).unwrap();
    assert!(trace.rejected > 0);
    assert!(trace.max_action_increase() <= 0.0);
}

#[test]
fn non_projection_is_rejected() {
    let cs = ConformalStructure::square();
    let half = TwistedSeries::scalar(0.37, 4, C64::new(0.5, 0.0));
    let cfg = FlowConfig::new(1e-3, 5, cs).unwrap();
    assert!(relax(&half, &cfg).is_err());
}

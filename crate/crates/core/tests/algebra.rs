use nc_sigma::calculus::{invert_newton_schulz, purify};
use nc_sigma::random::random_series;
use nc_sigma::spectral::{norm_estimate, spectral_bounds};
use nc_sigma::{Axis, ConformalStructure, TwistedSeries, C64};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rel(a: &TwistedSeries, b: &TwistedSeries) -> f64 {
    a.max_abs_diff(b) / a.max_abs().max(b.max_abs()).max(f64::MIN_POSITIVE)
}

fn mul(a: &TwistedSeries, b: &TwistedSeries) -> TwistedSeries {
    let (c, tail) = a.multiply(b).unwrap();
    assert_eq!(tail.discarded_mass, 0.0, "product must fit the window");
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ring_identities(seed in any::<u64>(), theta in 0.0f64..1.0, radius in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = 12;
        let a = random_series(&mut rng, theta, w, radius, 1.0);
        let b = random_series(&mut rng, theta, w, radius, 1.0);
        let c = random_series(&mut rng, theta, w, radius, 1.0);
        prop_assert!(rel(&mul(&mul(&a, &b), &c), &mul(&a, &mul(&b, &c))) <= 1e-10);
        prop_assert!(rel(&mul(&a, &b).adjoint(), &mul(&b.adjoint(), &a.adjoint())) <= 1e-10);
        let (x, y) = (mul(&a, &b).trace(), mul(&b, &a).trace());
        prop_assert!((x - y).norm() <= 1e-12);
        prop_assert!((a.trace_product(&b).unwrap() - mul(&a, &b).trace()).norm() <= 1e-14);
        for axis in Axis::ALL {
            prop_assert_eq!(mul(&a, &b).derive(axis).trace(), C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn derivations_obey_leibniz(seed in any::<u64>(), theta in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_series(&mut rng, theta, 10, 3, 1.0);
        let b = random_series(&mut rng, theta, 10, 3, 1.0);
        for axis in Axis::ALL {
            let lhs = mul(&a, &b).derive(axis);
            let rhs = &mul(&a.derive(axis), &b) + &mul(&a, &b.derive(axis));
            prop_assert!(rel(&lhs, &rhs) <= 1e-12);
        }
    }

    #[test]
    fn norm_is_bounded_by_l1(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_series(&mut rng, 0.37, 6, 2, 1.0);
        let n = norm_estimate(&a, 12);
        prop_assert!(n <= a.l1_norm() * (1.0 + 1e-12));
        prop_assert!(n >= a.l2_norm() * (1.0 - 1e-9));
    }
}

#[test]
fn generators_satisfy_the_commutation_relation() {
    let theta = 0.37;
    let one = C64::new(1.0, 0.0);
    let u1 = TwistedSeries::monomial(theta, 3, 1, 0, one);
    let u2 = TwistedSeries::monomial(theta, 3, 0, 1, one);
    let phase = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * theta);
    assert!(rel(&mul(&u2, &u1), &mul(&u1, &u2).scale(phase)) < 1e-15);
    assert!(rel(&mul(&u1, &u1.adjoint()), &TwistedSeries::identity(theta, 3)) < 1e-15);
}

#[test]
fn laplacian_factorizes_through_holomorphic_derivatives() {
    for tau in [C64::new(0.0, 1.0), C64::new(0.3, 0.8), C64::new(-1.2, 2.5)] {
        let cs = ConformalStructure::new(tau).unwrap();
        let a = TwistedSeries::from_fn(0.37, 8, |m, n| C64::new(1.0 + m as f64, n as f64 - 0.5));
        let four = a.holo_derive(&cs, false).holo_derive(&cs, true).scale_real(4.0);
        assert!(rel(&a.laplacian(&cs), &four) < 1e-13);
    }
}

#[test]
fn inverse_of_a_positive_element() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = random_series(&mut rng, 0.61, 10, 2, 0.2).hermitian_part();
    let a = &TwistedSeries::identity(0.61, 10) + &h;
    assert!(spectral_bounds(&a, 20).lower > 0.0);
    let inv = invert_newton_schulz(&a, 200, 1e-12).unwrap();
    let check = &a.multiply(&inv.inverse).unwrap().0 - &TwistedSeries::identity(0.61, 10);
    assert!(check.l1_norm() <= 1e-10, "{}", check.l1_norm());
}

#[test]
fn purification_of_a_symbol_projection() {
    // a hermitian element near 1 is pulled onto the identity
    let one = C64::new(1.0, 0.0);
    let theta = 0.0;
    let mut x = TwistedSeries::scalar(theta, 6, C64::new(0.98, 0.0));
    x.set(1, 0, one * 0.004);
    x.set(-1, 0, one * 0.004);
    let p = purify(&x, 20, 1e-12).unwrap();
    assert!(p.residual <= 1e-12);
    assert!((p.projection.coeff(0, 0).re - 1.0).abs() < 1e-10);
}

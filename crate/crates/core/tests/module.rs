use std::f64::consts::PI;

use nc_sigma::module::{
    check_hermitian_structure, inner_alpha, inner_theta, inner_theta_trace_dual, l2_inner,
    morcom_residual, theta_of_alpha, GaussPolySection, GaussTerm, HermitianVariant,
    ModuleGeometry, SectionFile, TestBattery,
};
use nc_sigma::spectral::spectral_bounds;
use nc_sigma::{Axis, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn section(rng: &mut ChaCha8Rng, g: ModuleGeometry) -> GaussPolySection {
    let eps = g.epsilon.abs();
    let mut s = GaussPolySection::zero(g);
    for k in 0..g.q {
        let poly = (0..=rng.gen_range(0..=2))
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let quad = C64::new(-PI / eps * rng.gen_range(0.6..1.6), rng.gen_range(-0.5..0.5));
        let lin = C64::new(rng.gen_range(-0.3..0.3), rng.gen_range(-2.0..2.0));
        s.push(k, GaussTerm::new(poly, quad, lin).unwrap().translate(rng.gen_range(-0.4..0.4) * eps))
            .unwrap();
    }
    s
}

fn geometries() -> [ModuleGeometry; 3] {
    [
        ModuleGeometry::boca(0.37).unwrap(),
        ModuleGeometry::from_alpha(-1, 2, -1.6).unwrap(),
        ModuleGeometry::from_alpha(2, 3, -0.8).unwrap(),
    ]
}

#[test]
fn geometry_relations() {
    for (r, q, alpha) in [(0, 1, -2.7), (-1, 2, -1.6), (1, 2, 0.25), (2, 3, -0.8), (3, 5, 1.9)] {
        let g = theta_of_alpha(r, q, alpha).unwrap();
        assert_eq!(g.a * r + g.b * q, 1);
        let theta = (g.a as f64 * alpha + g.b as f64) / (-(q as f64) * alpha + r as f64);
        assert!((g.theta - theta).abs() < 1e-12, "{g:?}");
        // 1/(qε) = a + qθ
        assert!((g.coupling() - (g.a as f64 + q as f64 * g.theta)).abs() < 1e-12, "{g:?}");
    }
    assert!(theta_of_alpha(2, 4, 0.3).is_err());
}

#[test]
fn only_one_ordering_is_a_hermitian_structure() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for g in geometries() {
        let sections: Vec<_> = (0..4).map(|_| section(&mut rng, g)).collect();
        for v in HermitianVariant::ALL {
            let h = check_hermitian_structure(v, &sections, 8).unwrap();
            let expected = v == HermitianVariant::Z1Z2Inverse;
            assert_eq!(h.passes(1e-8), expected, "{v:?} on {g:?}: {h:?}");
        }
    }
}

#[test]
fn inner_alpha_is_positive() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for i in 0..50 {
        let g = geometries()[i % 3];
        let xi = section(&mut rng, g);
        let v = inner_alpha(&xi, &xi, 8, f64::INFINITY).unwrap().value;
        let b = spectral_bounds(&v.hermitian_part(), 16);
        assert!(b.lower >= -1e-10, "{i}: {b:?}");
        assert!(v.max_abs_diff(&v.adjoint()) <= 1e-10 * v.max_abs());
    }
}

#[test]
fn trace_of_inner_alpha_is_the_l2_pairing() {
    // the (0,0) coefficient is ⟨ξ, η⟩ in L²(ℝ × Z_q)
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for g in geometries() {
        let (xi, eta) = (section(&mut rng, g), section(&mut rng, g));
        let v = inner_alpha(&xi, &eta, 6, f64::INFINITY).unwrap().value;
        let direct = l2_inner(&xi, &eta).unwrap();
        assert!((v.trace() - direct).norm() <= 1e-12 * direct.norm().max(1.0));
    }
}

#[test]
fn connection_has_constant_curvature() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for g in geometries() {
        let xi = section(&mut rng, g);
        let lhs = xi
            .nabla(Axis::Two)
            .nabla(Axis::One)
            .sub(&xi.nabla(Axis::One).nabla(Axis::Two))
            .unwrap();
        let rhs = xi.scale(C64::new(0.0, -2.0 * PI / g.epsilon));
        assert!(lhs.relative_difference(&rhs) < 1e-12);
    }
}

#[test]
fn theta_inner_product_matches_trace_duality() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let g = ModuleGeometry::boca(0.37).unwrap();
    let battery = TestBattery::standard(g, 8, 1e12).unwrap();
    let (xi, eta) = (section(&mut rng, g), section(&mut rng, g));
    let fit = inner_theta(&xi, &eta, &battery, f64::INFINITY).unwrap();
    let dual = inner_theta_trace_dual(&xi, &eta, 8).unwrap();
    let scale = dual.max_abs();
    assert!(fit.series.max_abs_diff(&dual) <= 1e-6 * scale, "{}", fit.series.max_abs_diff(&dual) / scale);
    let held_out: Vec<_> = (0..3).map(|_| section(&mut rng, g)).collect();
    let r = morcom_residual(&fit.series, &xi, &eta, &held_out, 8, f64::INFINITY).unwrap();
    assert!(r <= 1e-6, "morcom residual {r:e}");
    // ⟨ξ,ξ⟩_θ is hermitian
    let t = inner_theta(&xi, &xi, &battery, f64::INFINITY).unwrap().series;
    assert!(t.max_abs_diff(&t.adjoint()) <= 1e-8 * t.max_abs());
}

#[test]
fn sections_round_trip_through_json() {
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    for g in geometries() {
        let xi = section(&mut rng, g);
        let text = serde_json::to_string(&SectionFile::from(&xi)).unwrap();
        let back: GaussPolySection = serde_json::from_str::<SectionFile>(&text).unwrap().try_into().unwrap();
        assert!(xi.relative_difference(&back) < 1e-14);
    }
}

use brenier_lab::hermite::{
    certificate_report, expand, matrix_inequality_excess, near_minimizers, poincare_galerkin,
    CertificateSettings, GalerkinSettings, HermiteExpansion,
};
use brenier_lab::measures::{Factor, Family, RidgeProfile};
use brenier_lab::numerics::QuadratureRule;
use brenier_lab::transport::exact_product_map;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;

use common::*;

#[test]
fn parseval_and_dirichlet_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for case in 0..20 {
        let dim = 1 + case % 2;
        let degree = rng.gen_range(1..=5);
        let terms = random_band_limited(&mut rng, dim, degree);
        let coeffs: Vec<f64> = terms.iter().map(|t| t.1).collect();
        let e = HermiteExpansion::new(dim, degree, coeffs).unwrap();
        let l2 = gaussian_trapezoid(dim, |x| oracle(&terms, x).0.powi(2));
        let energy = gaussian_trapezoid(dim, |x| oracle(&terms, x).1.iter().map(|g| g * g).sum());
        assert!(
            (e.norm_sq() - l2).abs() < 1e-8,
            "case {case}: {} vs {l2}",
            e.norm_sq()
        );
        assert!(
            (e.dirichlet() - energy).abs() < 1e-8,
            "case {case}: {} vs {energy}",
            e.dirichlet()
        );

        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let (v, g) = oracle(&terms, &x);
        assert!((e.eval(&x) - v).abs() < 1e-10 * (1.0 + v.abs()));
        for (a, b) in e.gradient(&x).iter().zip(&g) {
            assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()));
        }

        let quad = QuadratureRule::gauss_hermite(degree + 6, dim).unwrap();
        let back = expand(|x| oracle(&terms, x).0, degree, &quad).unwrap();
        for (a, b) in back.coefficients().iter().zip(e.coefficients()) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

#[test]
fn matrix_inequality_on_random_admissible_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let n = rng.gen_range(1..=4);
        let g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let q = g.qr().q();
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| {
            rng.gen_range(0.0..=1.0)
        }));
        let a = &q * d * q.transpose();
        assert!(matrix_inequality_excess(&a) <= 1e-12);
    }
    // an eigenvalue above one breaks it: 2λ(λ − 1) = 1.5 at λ = 1.5
    let bad = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.5, 0.2]));
    assert!((matrix_inequality_excess(&bad) - 1.5).abs() < 1e-12);
}

#[test]
fn scaled_gaussian_gap_matches_finite_differences() {
    let mu = measure(Family::GaussianScaled {
        dimension: 1,
        sigma: 2.0,
    });
    let spec = poincare_galerkin(&mu, 10, &GalerkinSettings::default()).unwrap();
    assert!((spec.gap() - 4.0).abs() < 1e-6);
    let fd = finite_difference_gap(|x| 2.0 * x * x, 4.0, 4000);
    assert!((spec.gap() - fd).abs() < 1e-4, "{} vs {fd}", spec.gap());
}

#[test]
fn quartic_gap_matches_finite_differences() {
    let mu = measure(Family::Quartic {
        dimension: 1,
        a: 0.5,
        b: 0.0,
    });
    let spec = poincare_galerkin(&mu, 14, &GalerkinSettings::default()).unwrap();
    let fd = finite_difference_gap(|x| 0.5 * x * x + 0.125 * x.powi(4), 6.0, 4000);
    assert!((spec.gap() - fd).abs() < 1e-3, "{} vs {fd}", spec.gap());
}

#[test]
fn standard_gaussian_minimizer_is_the_coordinate() {
    let mu = measure(Family::GaussianScaled {
        dimension: 1,
        sigma: 1.0,
    });
    let spec = poincare_galerkin(&mu, 12, &GalerkinSettings::default()).unwrap();
    assert!((spec.gap() - 1.0).abs() < 1e-8);
    let u = &spec.eigenfunctions[0];
    let off: f64 = u
        .indices()
        .iter()
        .zip(u.coefficients())
        .filter(|(j, _)| j.as_slice() != [1])
        .map(|(_, c)| c * c)
        .sum::<f64>()
        .sqrt();
    assert!(off < 1e-6);
    assert!((u.coefficient(&[1]).abs() - 1.0).abs() < 1e-6);
}

#[test]
fn audited_measures_have_gap_at_least_one() {
    let cases = vec![
        (
            Family::Quartic {
                dimension: 1,
                a: 1.0,
                b: 0.0,
            },
            12,
        ),
        (
            Family::Quartic {
                dimension: 1,
                a: 0.5,
                b: 0.4,
            },
            12,
        ),
        (
            Family::GaussianScaled {
                dimension: 1,
                sigma: 1.5,
            },
            8,
        ),
        (Family::GaussianShifted { shift: vec![0.5] }, 8),
        (
            Family::GaussianShifted {
                shift: vec![0.3, -0.2],
            },
            6,
        ),
        (
            Family::Product {
                factors: vec![Factor::standard(), Factor::Quartic { a: 1.0, b: 0.0 }],
            },
            8,
        ),
        (
            Family::rotated_2d(
                0.5,
                vec![Factor::Quartic { a: 0.5, b: 0.0 }, Factor::standard()],
            ),
            8,
        ),
        (
            Family::RidgePerturbation {
                dimension: 2,
                t: 0.4,
                axis: 1,
                profile: RidgeProfile::Quartic,
            },
            8,
        ),
    ];
    for (family, degree) in cases {
        let mu = measure(family.clone());
        assert!(mu.passes_audit());
        let spec = poincare_galerkin(&mu, degree, &GalerkinSettings::default()).unwrap();
        assert!(spec.gap() >= 1.0 - 1e-6, "{family:?}: {}", spec.gap());
        assert!(
            spec.orthonormality_error < 1e-6,
            "{family:?}: {:e}",
            spec.orthonormality_error
        );
    }
}

#[test]
fn galerkin_gap_decreases_with_degree() {
    let mu = measure(Family::Quartic {
        dimension: 1,
        a: 0.5,
        b: 0.0,
    });
    let gaps: Vec<f64> = [6, 10, 14]
        .iter()
        .map(|&d| {
            poincare_galerkin(&mu, d, &GalerkinSettings::default())
                .unwrap()
                .gap()
        })
        .collect();
    assert!(
        gaps[0] >= gaps[1] - 1e-12 && gaps[1] >= gaps[2] - 1e-12,
        "{gaps:?}"
    );
}

#[test]
fn ridge_certificate_passes_every_stage() {
    let mu = measure(Family::RidgePerturbation {
        dimension: 2,
        t: 0.2,
        axis: 1,
        profile: RidgeProfile::Quartic,
    });
    let map = exact_product_map(&mu).unwrap();
    let report = certificate_report(&mu, &map, 1, 8, &CertificateSettings::default()).unwrap();
    assert!(report.passed(), "{:?}", report.first_failure());
    for hf in &report.high_frequency {
        assert!(*hf <= report.epsilon + 1e-6);
    }
    let nm = near_minimizers(
        &poincare_galerkin(&mu, 8, &GalerkinSettings::default()).unwrap(),
        1,
    )
    .unwrap();
    assert!((nm.epsilon - report.epsilon).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dirichlet_dominates_variance(seed in any::<u64>(), dim in 1usize..=3, degree in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let terms = random_band_limited(&mut rng, dim, degree);
        let e = HermiteExpansion::new(dim, degree, terms.iter().map(|t| t.1).collect()).unwrap();
        let variance = e.norm_sq() - e.coefficients()[0].powi(2);
        prop_assert!(e.dirichlet() >= variance - 1e-12);
        prop_assert!(e.high_frequency() >= -1e-15);
        prop_assert!((e.dirichlet() - variance - e.high_frequency()).abs() < 1e-10);
    }

    #[test]
    fn evaluation_is_linear(seed in any::<u64>(), s in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_band_limited(&mut rng, 2, 3);
        let b = random_band_limited(&mut rng, 2, 3);
        let ea = HermiteExpansion::new(2, 3, a.iter().map(|t| t.1).collect()).unwrap();
        let eb = HermiteExpansion::new(2, 3, b.iter().map(|t| t.1).collect()).unwrap();
        let sum = HermiteExpansion::new(
            2,
            3,
            a.iter().zip(&b).map(|(x, y)| x.1 + s * y.1).collect(),
        )
        .unwrap();
        let x = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
        prop_assert!((sum.eval(&x) - ea.eval(&x) - s * eb.eval(&x)).abs() < 1e-9);
    }
}

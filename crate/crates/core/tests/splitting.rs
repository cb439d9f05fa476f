use brenier_lab::measures::{Factor, Family, LogConcaveMeasure, Potential, RidgeProfile};
use brenier_lab::numerics::QuadratureRule;
use brenier_lab::splitting::{
    align_rotation, build_candidate, detect_factors, stability_curve, CandidateSettings,
    CurveSettings, Directions,
};
use brenier_lab::transport::{eigen_profile, exact_product_map, TransportMap};
use brenier_lab::wasserstein::w1_from_map;
use brenier_lab::Result;
use nalgebra::DMatrix;

fn measure(family: Family) -> Result<LogConcaveMeasure> {
    LogConcaveMeasure::with_defaults(Potential::new(family)?)
}

fn rotation(angle: f64) -> DMatrix<f64> {
    let (s, c) = angle.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

fn gaussian_times_quartic() -> Family {
    Family::Product {
        factors: vec![Factor::standard(), Factor::Quartic { a: 1.0, b: 0.0 }],
    }
}

fn ridge(t: f64) -> Result<LogConcaveMeasure> {
    measure(Family::RidgePerturbation {
        dimension: 2,
        t,
        axis: 1,
        profile: RidgeProfile::Quartic,
    })
}

#[test]
fn detection_on_reference_measures() {
    let quad2 = QuadratureRule::gauss_hermite(20, 2).unwrap();
    let id = eigen_profile(&TransportMap::identity(2), &quad2).unwrap();
    assert_eq!(detect_factors(&id, None), 2);

    let narrow = measure(Family::GaussianScaled {
        dimension: 1,
        sigma: 2.0,
    })
    .unwrap();
    let quad1 = QuadratureRule::gauss_hermite(32, 1).unwrap();
    let p = eigen_profile(&exact_product_map(&narrow).unwrap(), &quad1).unwrap();
    assert!((p.m[0] - 0.5).abs() < 1e-8);
    assert_eq!(detect_factors(&p, None), 0);

    let gq = measure(gaussian_times_quartic()).unwrap();
    let p = eigen_profile(&exact_product_map(&gq).unwrap(), &quad2).unwrap();
    assert_eq!(detect_factors(&p, None), 1);
}

#[test]
fn rotated_directions_are_recovered() {
    let a = 30f64.to_radians();
    // directions e₁, e₂ rotated by +30°
    let r = rotation(a);
    let rows: Vec<Vec<f64>> = (0..2).map(|j| vec![r[(0, j)], r[(1, j)]]).collect();
    let found = align_rotation(Directions::Linear(&rows)).unwrap();
    assert!((found - rotation(-a)).amax() < 1e-8);
}

#[test]
fn candidate_examples() {
    let id = DMatrix::identity(2, 2);
    let settings = CandidateSettings::default();

    let g = measure(Family::GaussianScaled {
        dimension: 2,
        sigma: 1.0,
    })
    .unwrap();
    let c = build_candidate(&g, 2, &id, &settings).unwrap();
    assert!(c.gap <= 1e-6 && c.barycenter.iter().all(|p| p.abs() < 1e-10));

    let shifted = measure(Family::GaussianShifted {
        shift: vec![1.0, 0.0],
    })
    .unwrap();
    let c = build_candidate(&shifted, 2, &id, &settings).unwrap();
    assert!((c.barycenter[0] - 1.0).abs() < 1e-10 && c.barycenter[1].abs() < 1e-10);
    assert!(c.gap <= 1e-6);

    let gq = measure(gaussian_times_quartic()).unwrap();
    let c = build_candidate(&gq, 1, &id, &settings).unwrap();
    assert!(c.gap <= 5e-2, "{}", c.gap);
    assert!((c.mu2_mass.unwrap() - 1.0).abs() < 1e-8);
    assert_eq!(c.mu2_concavity_violation, Some(0.0));
    assert!(c.barycenter[0].abs() < 1e-10);
}

#[test]
fn rigidity_survives_a_rotation() {
    let base = measure(gaussian_times_quartic()).unwrap();
    let angle = 0.7;
    let rotated = measure(Family::rotated_2d(
        angle,
        vec![Factor::standard(), Factor::Quartic { a: 1.0, b: 0.0 }],
    ))
    .unwrap();
    let settings = CurveSettings::default();
    let a = stability_curve(|_| Ok(base.clone()), &[0.0], &settings);
    let b = stability_curve(|_| Ok(rotated.clone()), &[0.0], &settings);
    let (pa, pb) = (&a.points[0], &b.points[0]);
    assert_eq!(pa.k_detected, Some(1));
    assert_eq!(pb.k_detected, Some(1));
    assert!((pa.epsilon.unwrap() - pb.epsilon.unwrap()).abs() < 1e-8);
    assert!((pa.gap.unwrap() - pb.gap.unwrap()).abs() < 1e-3);
    // the Gaussian direction of the rotated measure is R e₁
    let ra = pa.candidate.as_ref().unwrap().rotation_matrix();
    let rb = pb.candidate.as_ref().unwrap().rotation_matrix();
    let expected = &ra * rotation(angle).transpose();
    assert!(
        (rb.row(0) - expected.row(0)).amax() < 1e-6,
        "{rb} vs {expected}"
    );
}

#[test]
fn scaling_family_has_the_closed_form_ratio() {
    let family = |t: f64| {
        measure(Family::GaussianScaled {
            dimension: 1,
            sigma: 1.0 + t,
        })
    };
    let curve = stability_curve(
        family,
        &[0.0, 0.01, 0.02, 0.05, 0.1, 0.2],
        &CurveSettings::default(),
    );
    assert_eq!(curve.failures(), 0);
    let expected = (2.0 / std::f64::consts::PI).sqrt();
    assert!(curve.points[0].gap.unwrap() < 1e-10);
    for p in &curve.points[1..] {
        assert!((p.epsilon.unwrap() - p.t / (1.0 + p.t)).abs() < 1e-8);
        assert!((p.ratio.unwrap() - expected).abs() < 1e-4);
    }
}

#[test]
fn quartic_family_gap_is_linear_in_epsilon() {
    let family = |t: f64| {
        measure(Family::Quartic {
            dimension: 1,
            a: t,
            b: 0.0,
        })
    };
    let curve = stability_curve(
        family,
        &[0.01, 0.05, 0.1, 0.2, 0.3],
        &CurveSettings::default(),
    );
    assert_eq!(curve.failures(), 0);
    for p in &curve.points {
        assert!(p.gap.unwrap() <= 2.0 * p.epsilon.unwrap(), "{p:?}");
    }
}

#[test]
fn ridge_gap_shrinks_with_the_perturbation() {
    let settings = CurveSettings {
        k: Some(2),
        ..Default::default()
    };
    let ts = [0.0, 0.05, 0.1, 0.2, 0.4];
    let curve = stability_curve(ridge, &ts, &settings);
    assert_eq!(curve.failures(), 0);
    let gaps: Vec<f64> = curve.points.iter().map(|p| p.gap.unwrap()).collect();
    assert!(gaps[0] < 1e-6);
    for w in gaps.windows(2) {
        assert!(w[0] <= w[1], "{gaps:?}");
    }
    // the map-based bound dominates the candidate gap (ν = γ here)
    let quad = QuadratureRule::gauss_hermite(24, 2).unwrap();
    for (p, &t) in curve.points.iter().zip(&ts) {
        let map = exact_product_map(&ridge(t).unwrap()).unwrap();
        let bound = w1_from_map(&map, &quad).unwrap();
        assert!(
            p.gap.unwrap() <= bound + 1e-3,
            "t = {t}: {} > {bound}",
            p.gap.unwrap()
        );
    }
}

#[test]
fn candidate_exports() {
    let gq = measure(gaussian_times_quartic()).unwrap();
    let c = build_candidate(
        &gq,
        1,
        &DMatrix::identity(2, 2),
        &CandidateSettings::default(),
    )
    .unwrap();
    let mut rot = Vec::new();
    c.write_rotation_csv(&mut rot).unwrap();
    let rot = String::from_utf8(rot).unwrap();
    assert_eq!(rot.lines().next(), Some("c1,c2"));
    assert_eq!(rot.lines().count(), 3);
    let mut grid = Vec::new();
    c.mu2.as_ref().unwrap().write_csv(&mut grid).unwrap();
    let grid = String::from_utf8(grid).unwrap();
    assert_eq!(grid.lines().next(), Some("x1,density"));
    let json = serde_json::to_value(&c).unwrap();
    assert_eq!(json["k"], 1);
}

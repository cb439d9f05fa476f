use brenier_lab::hermite::{
    certificate_report, poincare_galerkin, CertificateSettings, GalerkinSettings,
};
use brenier_lab::measures::{LogConcaveMeasure, Potential};
use brenier_lab::numerics::QuadratureRule;
use brenier_lab::splitting::{
    align_rotation, build_candidate, detect_factors, stability_curve, CandidateSettings,
    CurveSettings, Directions, MapMethod,
};
use brenier_lab::transport::{
    assemble_profile, contraction_defect, epsilon_hypothesis, richardson, EigenvalueProfile,
    EntropicSettings,
};
use brenier_lab::Result;
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{MapKind, Scenario, ScenarioConfig};

/// Lower bound on Galerkin gaps of 1-log-concave measures.
const POINCARE_FLOOR: f64 = 1.0 - 1e-6;
/// Default match tolerance for an expected Poincaré constant.
const GAP_MATCH_TOL: f64 = 1e-8;
/// Default tolerance on an expected curve ratio.
const RATIO_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub id: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(id: &str, value: f64, limit: f64) -> Self {
        Self {
            id: id.into(),
            value,
            limit,
            passed: value <= limit,
        }
    }

    fn at_least(id: &str, value: f64, limit: f64) -> Self {
        Self {
            id: id.into(),
            value,
            limit,
            passed: value >= limit,
        }
    }
}

pub struct Outcome {
    pub results: Value,
    pub checks: Vec<Check>,
    /// `(file name, CSV bytes)`
    pub tables: Vec<(String, Vec<u8>)>,
}

fn to_json(v: impl Serialize) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn measure(config: &ScenarioConfig) -> Result<LogConcaveMeasure> {
    LogConcaveMeasure::with_defaults(Potential::new(config.measure.clone())?)
}

fn map_method(config: &ScenarioConfig, reg: f64) -> MapMethod {
    match config.numerics.map {
        MapKind::Exact => MapMethod::Exact,
        MapKind::Entropic => MapMethod::Entropic(EntropicSettings {
            nodes: config.numerics.grid_nodes,
            ..EntropicSettings::default().with_reg(reg)
        }),
    }
}

fn curve_settings(config: &ScenarioConfig) -> CurveSettings {
    CurveSettings {
        map: map_method(config, config.numerics.reg),
        k: config.numerics.k,
        detect_tol: config.numerics.detect_tol,
        profile_order: config.numerics.quadrature_order,
        candidate: CandidateSettings::default(),
    }
}

fn profile_for(
    config: &ScenarioConfig,
    mu: &LogConcaveMeasure,
    reg: f64,
) -> Result<EigenvalueProfile> {
    let n = mu.dimension();
    let map = map_method(config, reg).build(mu)?;
    let order = curve_settings(config).profile_order_for(n);
    assemble_profile(&map, &QuadratureRule::gauss_hermite(order, n)?)
}

fn profile_csv(p: &EigenvalueProfile) -> Vec<u8> {
    let n = p.dimension();
    let mut header: Vec<String> = (1..=n).map(|d| format!("x{d}")).collect();
    header.push("weight".into());
    header.extend((1..=n).map(|d| format!("lambda{d}")));
    let mut out = header.join(",") + "\n";
    for ((x, w), l) in p.nodes.iter().zip(&p.weights).zip(&p.eigenvalues) {
        let row: Vec<String> = x
            .iter()
            .chain(std::iter::once(w))
            .chain(l)
            .map(|v| format!("{v:.17e}"))
            .collect();
        out += &row.join(",");
        out.push('\n');
    }
    out.into_bytes()
}

fn contraction(config: &ScenarioConfig) -> Result<Outcome> {
    let mu = measure(config)?;
    let reg = config.numerics.reg;
    let profile = profile_for(config, &mu, reg)?;
    let (upper, lower) = contraction_defect(&profile);
    let tol = config
        .numerics
        .tolerance
        .unwrap_or(profile.provenance.map_tolerance());
    let mut checks = vec![Check::at_most("contraction-defect", upper.max(lower), tol)];
    let mut results = json!({
        "summary": to_json(profile.summary()),
        "defect": {"upper": upper, "lower": lower},
        "tolerance": tol,
    });
    if config.numerics.map == MapKind::Entropic && config.numerics.reg_halving {
        let half = profile_for(config, &mu, 0.5 * reg)?;
        let (hu, hl) = contraction_defect(&half);
        checks.push(Check::at_most(
            "defect-halving",
            hu.max(hl),
            upper.max(lower) + 1e-12,
        ));
        results["halving"] = json!({
            "summary": to_json(half.summary()),
            "defect": {"upper": hu, "lower": hl},
            "debiased": to_json(richardson(reg, &profile, &half)),
        });
    }
    Ok(Outcome {
        results,
        checks,
        tables: vec![("profile.csv".into(), profile_csv(&profile))],
    })
}

fn rigidity(config: &ScenarioConfig) -> Result<Outcome> {
    let mu = measure(config)?;
    let n = mu.dimension();
    let profile = profile_for(config, &mu, config.numerics.reg)?;
    let detected = detect_factors(&profile, config.numerics.detect_tol);
    let k = config.numerics.k.unwrap_or(detected);
    let mut checks = Vec::new();
    if let Some(expect) = config.checks.expect_k {
        checks.push(Check {
            id: "factor-count".into(),
            value: detected as f64,
            limit: expect as f64,
            passed: detected == expect,
        });
    }
    let mut results = json!({
        "summary": to_json(profile.summary()),
        "k_detected": detected,
        "k": k,
    });
    let mut tables = vec![("profile.csv".into(), profile_csv(&profile))];
    if k >= 1 {
        let rotation = if k == n {
            DMatrix::identity(n, n)
        } else {
            align_rotation(Directions::Profile {
                profile: &profile,
                k,
            })?
        };
        let candidate = build_candidate(&mu, k, &rotation, &CandidateSettings::default())?;
        checks.push(Check::at_most(
            "split-gap",
            candidate.gap,
            config.numerics.gap_tol,
        ));
        results["epsilon"] = json!(epsilon_hypothesis(&profile, k)?);
        let mut rot = Vec::new();
        candidate.write_rotation_csv(&mut rot)?;
        tables.push(("rotation.csv".into(), rot));
        if let Some(g) = &candidate.mu2 {
            let mut grid = Vec::new();
            g.write_csv(&mut grid)?;
            tables.push(("mu2.csv".into(), grid));
        }
        results["candidate"] = to_json(&candidate);
    }
    Ok(Outcome {
        results,
        checks,
        tables,
    })
}

fn curve(config: &ScenarioConfig) -> Result<Outcome> {
    let spec = config.curve.as_ref().expect("validated config has a curve");
    let family = |t: f64| {
        let f = config
            .member(t)
            .map_err(brenier_lab::Error::InvalidArgument)?;
        LogConcaveMeasure::with_defaults(Potential::new(f)?)
    };
    let curve = stability_curve(family, &spec.values, &curve_settings(config));
    let failures = curve.failures();
    let mut checks = vec![Check::at_most("curve-points", failures as f64, 0.0)];
    let c = &config.checks;
    if let Some(expect) = c.expect_ratio {
        let tol = c.ratio_tol.unwrap_or(RATIO_TOL);
        let worst = curve
            .points
            .iter()
            .filter_map(|p| p.ratio)
            .map(|r| (r - expect).abs())
            .fold(0.0, f64::max);
        checks.push(Check::at_most("linear-rate", worst, tol));
    }
    if let Some(bound) = c.max_ratio {
        // points with ε inside the map tolerance carry no ratio
        let worst = curve
            .points
            .iter()
            .filter_map(|p| p.ratio)
            .fold(0.0, f64::max);
        checks.push(Check::at_most("ratio-bound", worst, bound));
    }
    if c.monotone_gap {
        let gaps: Vec<f64> = curve.points.iter().filter_map(|p| p.gap).collect();
        let worst = gaps.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
        checks.push(Check::at_most("gap-monotone", worst, 0.0));
    }
    let mut csv = Vec::new();
    curve.write_csv(&mut csv)?;
    Ok(Outcome {
        results: to_json(&curve),
        checks,
        tables: vec![("curve.csv".into(), csv)],
    })
}

fn poincare(config: &ScenarioConfig) -> Result<Outcome> {
    let mu = measure(config)?;
    let spec = poincare_galerkin(&mu, config.numerics.degree, &GalerkinSettings::default())?;
    let mut checks = Vec::new();
    if mu.passes_audit() {
        checks.push(Check::at_least(
            "poincare-lower-bound",
            spec.gap(),
            POINCARE_FLOOR,
        ));
    }
    if let Some(expect) = config.checks.expect_gap {
        let tol = config.checks.gap_match_tol.unwrap_or(GAP_MATCH_TOL);
        checks.push(Check::at_most(
            "poincare-expected",
            (spec.gap() - expect).abs(),
            tol,
        ));
    }
    let mut csv = String::from("index,eigenvalue\n");
    for (i, l) in spec.eigenvalues.iter().enumerate() {
        csv += &format!("{},{l:.17e}\n", i + 1);
    }
    Ok(Outcome {
        results: json!({"gap": spec.gap(), "audited": mu.passes_audit(), "spectrum": to_json(&spec)}),
        checks,
        tables: vec![("eigenvalues.csv".into(), csv.into_bytes())],
    })
}

fn certificate(config: &ScenarioConfig) -> Result<Outcome> {
    let mu = measure(config)?;
    let map = map_method(config, config.numerics.reg).build(&mu)?;
    let settings = CertificateSettings {
        c_cert: config.numerics.c_cert,
        max_epsilon: config.numerics.max_epsilon,
        ..CertificateSettings::default()
    };
    let k = config.numerics.k.unwrap_or(1);
    let report = certificate_report(&mu, &map, k, config.numerics.degree, &settings)?;
    let checks = report
        .stages
        .iter()
        .map(|s| Check {
            id: format!("certificate-{}", s.stage),
            value: s.value,
            limit: s.limit,
            passed: s.passed,
        })
        .collect();
    Ok(Outcome {
        results: to_json(&report),
        checks,
        tables: Vec::new(),
    })
}

pub fn run(config: &ScenarioConfig) -> Result<Outcome> {
    match config.scenario {
        Scenario::Contraction => contraction(config),
        Scenario::Rigidity => rigidity(config),
        Scenario::StabilityCurve => curve(config),
        Scenario::Poincare => poincare(config),
        Scenario::Certificate => certificate(config),
    }
}

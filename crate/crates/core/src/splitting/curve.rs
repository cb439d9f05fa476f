use std::io::Write;

use nalgebra::DMatrix;
use serde::Serialize;

use super::candidate::{build_candidate, CandidateSettings, SplitCandidate};
use super::detect::{align_rotation, detect_factors, Directions};
use crate::error::{Error, Result};
use crate::measures::LogConcaveMeasure;
use crate::numerics::QuadratureRule;
use crate::transport::{
    eigen_profile, entropic_map, epsilon_hypothesis, exact_product_map, EntropicSettings,
    TransportMap,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MapMethod {
    /// Monotone rearrangement in 1D, product of 1D maps otherwise.
    Exact,
    Entropic(EntropicSettings),
}

impl MapMethod {
    pub fn build(&self, mu: &LogConcaveMeasure) -> Result<TransportMap> {
        match self {
            MapMethod::Exact => exact_product_map(mu),
            MapMethod::Entropic(s) => entropic_map(mu, s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveSettings {
    pub map: MapMethod,
    /// Gaussian factor count used for `ε` and the candidate; `None` takes
    /// the detected count, raised to 1.
    pub k: Option<usize>,
    /// Detection tolerance; `None` is twice the map tolerance.
    pub detect_tol: Option<f64>,
    /// Gauss–Hermite nodes per axis of the profile; `None` uses 64 (1D),
    /// 24 (2D), 12 (3D) or 8 (4D).
    pub profile_order: Option<usize>,
    pub candidate: CandidateSettings,
}

impl Default for CurveSettings {
    fn default() -> Self {
        Self {
            map: MapMethod::Exact,
            k: None,
            detect_tol: None,
            profile_order: None,
            candidate: CandidateSettings::default(),
        }
    }
}

impl CurveSettings {
    pub fn profile_order_for(&self, dimension: usize) -> usize {
        self.profile_order.unwrap_or(match dimension {
            1 => 64,
            2 => 24,
            3 => 12,
            _ => 8,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PointFailure {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvePoint {
    pub t: f64,
    pub epsilon: Option<f64>,
    pub gap: Option<f64>,
    /// `gap / ε`, absent when `ε` is within the map tolerance of zero.
    pub ratio: Option<f64>,
    pub k_detected: Option<usize>,
    pub k: Option<usize>,
    /// `m_k` for `k = 1..n`.
    pub m: Vec<f64>,
    pub provenance: String,
    pub candidate: Option<SplitCandidate>,
    pub failure: Option<PointFailure>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityCurve {
    pub points: Vec<CurvePoint>,
}

impl StabilityCurve {
    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| p.failure.is_some()).count()
    }

    /// CSV with header `t,epsilon,gap,ratio,k_detected,provenance`; missing
    /// values are empty cells.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        fn cell(v: Option<f64>) -> String {
            v.map(|x| format!("{x:.17e}")).unwrap_or_default()
        }
        writeln!(out, "t,epsilon,gap,ratio,k_detected,provenance")?;
        for p in &self.points {
            writeln!(
                out,
                "{:.17e},{},{},{},{},{}",
                p.t,
                cell(p.epsilon),
                cell(p.gap),
                cell(p.ratio),
                p.k_detected.map(|k| k.to_string()).unwrap_or_default(),
                p.provenance
            )?;
        }
        Ok(())
    }
}

fn run_point(
    point: &mut CurvePoint,
    mu: &LogConcaveMeasure,
    settings: &CurveSettings,
) -> Result<()> {
    if !mu.passes_audit() {
        return Err(Error::InvalidPotential(format!(
            "measure fails the 1-log-concavity audit (margin {:e})",
            mu.convexity_margin()
        )));
    }
    let n = mu.dimension();
    let map = settings.map.build(mu)?;
    point.provenance = map.provenance().label();
    let quad = QuadratureRule::gauss_hermite(settings.profile_order_for(n), n)?;
    let profile = eigen_profile(&map, &quad)?;
    point.m = profile.m.clone();
    let detected = detect_factors(&profile, settings.detect_tol);
    point.k_detected = Some(detected);
    let k = settings.k.unwrap_or(detected.max(1));
    point.k = Some(k);
    let epsilon = epsilon_hypothesis(&profile, k)?;
    point.epsilon = Some(epsilon);
    let rotation = if k == n {
        DMatrix::identity(n, n)
    } else {
        align_rotation(Directions::Profile {
            profile: &profile,
            k,
        })?
    };
    let candidate = build_candidate(mu, k, &rotation, &settings.candidate)?;
    point.gap = Some(candidate.gap);
    point.ratio = (epsilon > map.provenance().map_tolerance()).then(|| candidate.gap / epsilon);
    point.candidate = Some(candidate);
    Ok(())
}

/// Runs map → profile → `ε` → candidate → gap for each parameter value.
///
/// Points are sorted by `t`. A failing point keeps whatever was computed
/// before the failure and records the stage; the curve continues.
pub fn stability_curve(
    family: impl Fn(f64) -> Result<LogConcaveMeasure>,
    params: &[f64],
    settings: &CurveSettings,
) -> StabilityCurve {
    let mut ts = params.to_vec();
    ts.sort_by(f64::total_cmp);
    let points = ts
        .into_iter()
        .map(|t| {
            let mut point = CurvePoint {
                t,
                epsilon: None,
                gap: None,
                ratio: None,
                k_detected: None,
                k: None,
                m: Vec::new(),
                provenance: String::new(),
                candidate: None,
                failure: None,
            };
            let outcome = family(t).and_then(|mu| run_point(&mut point, &mu, settings));
            if let Err(e) = outcome {
                log::warn!("curve point t = {t}: {e}");
                point.failure = Some(PointFailure {
                    stage: e.stage().to_string(),
                    message: e.to_string(),
                });
            }
            point
        })
        .collect();
    StabilityCurve { points }
}

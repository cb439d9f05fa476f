use std::io::Write;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{marginal, Cdf1d, Family, GridDensity, LogConcaveMeasure, Potential};
use crate::numerics::{gaussian_log_density, QuadratureRule};
use crate::wasserstein::{w1_discrete, w1_exact_1d, DiscreteCloud};

/// Orthogonality tolerance on candidate rotations.
pub const ROTATION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[derive(Default)]
pub struct CandidateSettings {
    /// Gauss–Hermite nodes per axis of the clouds compared by the gap;
    /// `None` uses 24 (2D), 12 (3D) or 8 (4D).
    pub cloud_order: Option<usize>,
}


impl CandidateSettings {
    pub fn order_for(&self, dimension: usize) -> usize {
        self.cloud_order.unwrap_or(match dimension {
            0..=2 => 24,
            3 => 12,
            _ => 8,
        })
    }
}

/// How the gap was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapMethod {
    /// CDF formula in 1D.
    Exact1d,
    /// Network simplex on reweighted Gauss–Hermite clouds.
    Discrete,
}

/// `ν = γ_{p,k} ⊗ μ₂` in rotated coordinates and its distance to `μ`.
#[derive(Debug, Clone, Serialize)]
pub struct SplitCandidate {
    pub k: usize,
    /// Rows of the orthogonal matrix `R`; `μ` is compared in coordinates `Rx`.
    pub rotation: Vec<Vec<f64>>,
    pub barycenter: Vec<f64>,
    #[serde(skip)]
    pub mu2: Option<GridDensity>,
    pub mu2_mass: Option<f64>,
    /// Discrete 1-log-concavity surrogate of `μ₂` (zero when it passes).
    pub mu2_concavity_violation: Option<f64>,
    pub gap: f64,
    pub method: GapMethod,
    pub atoms: usize,
}

impl SplitCandidate {
    pub fn rotation_matrix(&self) -> DMatrix<f64> {
        let n = self.rotation.len();
        DMatrix::from_fn(n, n, |i, j| self.rotation[i][j])
    }

    /// CSV of `R` without header row names beyond `c1..cn`.
    pub fn write_rotation_csv(&self, mut out: impl Write) -> Result<()> {
        let n = self.rotation.len();
        let header: Vec<String> = (1..=n).map(|j| format!("c{j}")).collect();
        writeln!(out, "{}", header.join(","))?;
        for row in &self.rotation {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

fn check_rotation(r: &DMatrix<f64>, n: usize) -> Result<()> {
    if r.nrows() != n || r.ncols() != n {
        return Err(Error::Dimension(format!(
            "rotation is {}x{}, expected {n}x{n}",
            r.nrows(),
            r.ncols()
        )));
    }
    let defect = (r * r.transpose() - DMatrix::<f64>::identity(n, n)).amax();
    if !(defect <= ROTATION_TOLERANCE) {
        return Err(Error::InvalidMatrix(format!(
            "rotation is not orthogonal (defect {defect:e})"
        )));
    }
    Ok(())
}

/// Multilinear interpolation of the grid log-density; `−∞` off the grid.
fn interpolate_log_density(grid: &GridDensity, z: &[f64]) -> f64 {
    let axes = grid.axes();
    let shape = grid.shape();
    let mut base = Vec::with_capacity(z.len());
    let mut frac = Vec::with_capacity(z.len());
    for (a, &v) in axes.iter().zip(z) {
        let nodes = &a.nodes;
        if !(v >= nodes[0] && v <= nodes[nodes.len() - 1]) {
            return f64::NEG_INFINITY;
        }
        let i = nodes
            .partition_point(|&x| x <= v)
            .saturating_sub(1)
            .min(nodes.len() - 2);
        base.push(i);
        frac.push((v - nodes[i]) / (nodes[i + 1] - nodes[i]));
    }
    let logs = grid.log_density();
    let mut acc = 0.0;
    for corner in 0..1usize << z.len() {
        let mut flat = 0usize;
        let mut w = 1.0;
        for d in 0..z.len() {
            let up = (corner >> d) & 1;
            flat = flat * shape[d] + base[d] + up;
            w *= if up == 1 { frac[d] } else { 1.0 - frac[d] };
        }
        if w == 0.0 {
            continue;
        }
        let l = logs[flat];
        if l == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        acc += w * l;
    }
    acc
}

fn gaussian_at(p: &[f64]) -> Result<LogConcaveMeasure> {
    LogConcaveMeasure::with_defaults(Potential::new(Family::GaussianShifted {
        shift: p.to_vec(),
    })?)
}

/// Rotates `μ` by `R`, projects out `μ₂ = (π̄_{n−k})_♯(R_♯μ)` and measures
/// `W1(R_♯μ, γ_{p,k} ⊗ μ₂)` with `p` the barycenter of the first `k`
/// rotated coordinates.
///
/// Outside 1D both measures live on the same Gauss–Hermite nodes of
/// `R_♯μ`: `ν` reuses them with weights `w_μ · ν/μ`, so the gap vanishes
/// exactly when `ν = μ` up to the grid interpolation of `μ₂`.
pub fn build_candidate(
    mu: &LogConcaveMeasure,
    k: usize,
    rotation: &DMatrix<f64>,
    settings: &CandidateSettings,
) -> Result<SplitCandidate> {
    let n = mu.dimension();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "k must lie in 1..={n}, got {k}"
        )));
    }
    check_rotation(rotation, n)?;
    let mu_r = mu.rotated(rotation)?;
    let barycenter = mu_r.barycenter()?[..k].to_vec();
    let rows = (0..n)
        .map(|i| rotation.row(i).iter().copied().collect())
        .collect();

    if n == 1 {
        let gap = w1_exact_1d(
            &Cdf1d::new(&mu_r)?,
            &Cdf1d::new(&gaussian_at(&barycenter)?)?,
        );
        return Ok(SplitCandidate {
            k,
            rotation: rows,
            barycenter,
            mu2: None,
            mu2_mass: None,
            mu2_concavity_violation: None,
            gap,
            method: GapMethod::Exact1d,
            atoms: 0,
        });
    }

    let kept: Vec<usize> = (k..n).collect();
    let mu2 = if kept.is_empty() {
        None
    } else {
        Some(marginal(&mu_r, &kept)?)
    };
    let quad = QuadratureRule::gauss_hermite(settings.order_for(n), n)?;
    let (nodes, weights) = mu_r.weighted_nodes(&quad)?;
    let mut nu_weights = Vec::with_capacity(nodes.len());
    for (x, w) in nodes.iter().zip(&weights) {
        let shifted: Vec<f64> = x[..k].iter().zip(&barycenter).map(|(a, b)| a - b).collect();
        let mut log_nu = gaussian_log_density(&shifted);
        if let Some(g) = &mu2 {
            log_nu += interpolate_log_density(g, &x[k..]);
        }
        let ratio = (log_nu - mu_r.log_density(x)).exp();
        nu_weights.push(if ratio.is_finite() { w * ratio } else { 0.0 });
    }
    let atoms = nodes.len();
    let a = DiscreteCloud::normalized(nodes.clone(), weights)?;
    let b = DiscreteCloud::normalized(nodes, nu_weights)?;
    let (gap, _) = w1_discrete(&a, &b)?;
    Ok(SplitCandidate {
        k,
        rotation: rows,
        barycenter,
        mu2_mass: mu2.as_ref().map(GridDensity::total_mass),
        mu2_concavity_violation: mu2.as_ref().map(GridDensity::log_concavity_violation),
        mu2,
        gap,
        method: GapMethod::Discrete,
        atoms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn measure(family: Family) -> LogConcaveMeasure {
        LogConcaveMeasure::with_defaults(Potential::new(family).unwrap()).unwrap()
    }

    #[test]
    fn standard_gaussian_splits_exactly() {
        let mu = measure(Family::GaussianScaled {
            dimension: 2,
            sigma: 1.0,
        });
        let c = build_candidate(&mu, 2, &DMatrix::identity(2, 2), &Default::default()).unwrap();
        assert!(c.gap <= 1e-6);
        assert!(c.barycenter.iter().all(|p| p.abs() < 1e-12));
        assert!(c.mu2.is_none());
    }

    #[test]
    fn translated_gaussian_barycenter() {
        let mu = measure(Family::GaussianShifted {
            shift: vec![1.0, 0.0],
        });
        let c = build_candidate(&mu, 2, &DMatrix::identity(2, 2), &Default::default()).unwrap();
        assert!((c.barycenter[0] - 1.0).abs() < 1e-10 && c.barycenter[1].abs() < 1e-10);
        assert!(c.gap <= 1e-6);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mu = measure(Family::GaussianScaled {
            dimension: 2,
            sigma: 1.0,
        });
        let id = DMatrix::identity(2, 2);
        assert!(build_candidate(&mu, 0, &id, &Default::default()).is_err());
        assert!(build_candidate(&mu, 3, &id, &Default::default()).is_err());
        let skew = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(build_candidate(&mu, 1, &skew, &Default::default()).is_err());
    }

    #[test]
    fn interpolation_is_exact_on_nodes() {
        let mu = measure(Family::Quartic {
            dimension: 2,
            a: 1.0,
            b: 0.0,
        });
        let g = marginal(&mu, &[1]).unwrap();
        for flat in [3, 100, 200] {
            let x = g.point(flat);
            assert!((interpolate_log_density(&g, &x) - g.log_density()[flat]).abs() < 1e-12);
        }
        assert_eq!(interpolate_log_density(&g, &[100.0]), f64::NEG_INFINITY);
    }
}

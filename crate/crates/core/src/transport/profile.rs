use nalgebra::DMatrix;
use serde::Serialize;

use super::map::{Provenance, TransportMap};
use crate::error::{Error, Result};
use crate::numerics::{eigen, QuadratureRule};

/// Range outside which a Hessian eigenvalue signals a broken map estimate.
pub const PLAUSIBLE_RANGE: (f64, f64) = (-0.1, 1.1);

/// Spectra of `D²φ` at the nodes of a Gaussian quadrature rule.
#[derive(Debug, Clone, Serialize)]
pub struct EigenvalueProfile {
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// Ascending eigenvalues at each node.
    pub eigenvalues: Vec<Vec<f64>>,
    /// Orthonormal eigenvectors (columns, matching `eigenvalues`).
    #[serde(skip)]
    pub eigenvectors: Vec<DMatrix<f64>>,
    /// `m[k−1] = ∫ λ_{n−k+1}(D²φ) dγₙ` for `k = 1..n`.
    pub m: Vec<f64>,
    pub provenance: Provenance,
}

/// JSON summary of a profile.
#[derive(Debug, Clone, Serialize)]
pub struct ProfileSummary {
    pub m_k: Vec<f64>,
    pub defect: (f64, f64),
    pub provenance: String,
    pub reg: Option<f64>,
}

impl EigenvalueProfile {
    pub fn dimension(&self) -> usize {
        self.m.len()
    }

    pub fn summary(&self) -> ProfileSummary {
        ProfileSummary {
            m_k: self.m.clone(),
            defect: contraction_defect(self),
            provenance: self.provenance.label(),
            reg: self.provenance.reg(),
        }
    }

    /// `∫ λ_j(D²ψ) dγₙ` for the ascending index `j` (1-based), where
    /// `ψ = |x|²/2 − φ` so that `λ_j(D²ψ) = 1 − λ_{n−j+1}(D²φ)`.
    pub fn psi_functional(&self, j: usize) -> f64 {
        let n = self.dimension();
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, _)| self.weights[i] * (1.0 - self.eigenvalues[i][n - j]))
            .sum()
    }
}

/// Eigenvalues of `D²φ` at every node without range checks.
pub fn assemble_profile(map: &TransportMap, quad: &QuadratureRule) -> Result<EigenvalueProfile> {
    let n = map.dimension();
    if quad.dimension() != n {
        return Err(Error::Dimension(format!(
            "quadrature dimension {} does not match map dimension {n}",
            quad.dimension()
        )));
    }
    let mut nodes = Vec::with_capacity(quad.len());
    let mut weights = Vec::with_capacity(quad.len());
    quad.for_each(|x, w| {
        nodes.push(x.to_vec());
        weights.push(w);
    });
    let mut eigenvalues = Vec::with_capacity(nodes.len());
    let mut eigenvectors = Vec::with_capacity(nodes.len());
    for x in &nodes {
        let h = map.hessian(x);
        let h = (&h + h.transpose()) * 0.5;
        let spec = eigen::sym_eigen(&h)?;
        eigenvalues.push(spec.eigenvalues.clone());
        eigenvectors.push(spec.eigenvectors);
    }
    let m = (1..=n)
        .map(|k| {
            weights
                .iter()
                .zip(&eigenvalues)
                .map(|(w, l)| w * l[n - k])
                .sum()
        })
        .collect();
    Ok(EigenvalueProfile {
        nodes,
        weights,
        eigenvalues,
        eigenvectors,
        m,
        provenance: map.provenance(),
    })
}

/// Profile of `D²φ` on `quad`; rejects eigenvalues outside
/// [`PLAUSIBLE_RANGE`].
pub fn eigen_profile(map: &TransportMap, quad: &QuadratureRule) -> Result<EigenvalueProfile> {
    let profile = assemble_profile(map, quad)?;
    for (node, spec) in profile.eigenvalues.iter().enumerate() {
        for &eigenvalue in spec {
            if !(PLAUSIBLE_RANGE.0..=PLAUSIBLE_RANGE.1).contains(&eigenvalue) {
                return Err(Error::ContractionViolation { node, eigenvalue });
            }
        }
    }
    Ok(profile)
}

/// `(max (λₙ − 1)₊, max (−λ₁)₊)` over the nodes.
pub fn contraction_defect(profile: &EigenvalueProfile) -> (f64, f64) {
    let mut upper = 0.0f64;
    let mut lower = 0.0f64;
    for spec in &profile.eigenvalues {
        upper = upper.max(spec[spec.len() - 1] - 1.0);
        lower = lower.max(-spec[0]);
    }
    (upper, lower)
}

/// `ε = 1 − m_k`, clamped to `[0, 1]`.
pub fn epsilon_hypothesis(profile: &EigenvalueProfile, k: usize) -> Result<f64> {
    let n = profile.dimension();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "k must lie in 1..={n}, got {k}"
        )));
    }
    Ok((1.0 - profile.m[k - 1]).clamp(0.0, 1.0))
}

/// Functionals at `reg` and `reg/2` with their Richardson extrapolation
/// `2·m(reg/2) − m(reg)`, which cancels the first-order entropic bias.
#[derive(Debug, Clone, Serialize)]
pub struct DebiasedFunctionals {
    pub reg: f64,
    pub m_reg: Vec<f64>,
    pub m_half: Vec<f64>,
    pub m_extrapolated: Vec<f64>,
}

pub fn richardson(
    reg: f64,
    coarse: &EigenvalueProfile,
    fine: &EigenvalueProfile,
) -> DebiasedFunctionals {
    DebiasedFunctionals {
        reg,
        m_reg: coarse.m.clone(),
        m_half: fine.m.clone(),
        m_extrapolated: coarse
            .m
            .iter()
            .zip(&fine.m)
            .map(|(c, f)| 2.0 * f - c)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_profile() {
        let quad = QuadratureRule::gauss_hermite(6, 2).unwrap();
        let p = eigen_profile(&TransportMap::identity(2), &quad).unwrap();
        assert!(p.m.iter().all(|m| (m - 1.0).abs() < 1e-12));
        let (up, low) = contraction_defect(&p);
        assert!(up < 1e-15 && low == 0.0);
        assert!(epsilon_hypothesis(&p, 1).unwrap() < 1e-15);
        assert!(p.psi_functional(1).abs() < 1e-12);
    }

    #[test]
    fn scaled_map_profile() {
        let quad = QuadratureRule::gauss_hermite(8, 1).unwrap();
        let t = TransportMap::affine(DMatrix::from_element(1, 1, 0.5), vec![0.0]).unwrap();
        let p = eigen_profile(&t, &quad).unwrap();
        assert!((p.m[0] - 0.5).abs() < 1e-12);
        assert!((epsilon_hypothesis(&p, 1).unwrap() - 0.5).abs() < 1e-12);
        assert!(epsilon_hypothesis(&p, 2).is_err());
    }

    #[test]
    fn out_of_range_eigenvalue_is_a_violation() {
        let quad = QuadratureRule::gauss_hermite(4, 1).unwrap();
        let t = TransportMap::affine(DMatrix::from_element(1, 1, 1.3), vec![0.0]).unwrap();
        assert!(matches!(
            eigen_profile(&t, &quad),
            Err(Error::ContractionViolation { .. })
        ));
        let raw = assemble_profile(&t, &quad).unwrap();
        assert!((contraction_defect(&raw).0 - 0.3).abs() < 1e-12);
    }
}

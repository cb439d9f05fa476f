use nalgebra::DMatrix;
use serde::Serialize;

use super::basis::{multi_indices, BasisTable, HermiteExpansion, MultiIndex};
use crate::error::{Error, Result};
use crate::measures::LogConcaveMeasure;
use crate::numerics::{generalized_sym_eigen, sym_eigen, QuadratureRule};

/// Nodes processed per block during matrix assembly.
const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GalerkinSettings {
    /// Gauss–Hermite nodes per axis; `None` picks `degree + 16` (capped by
    /// dimension so the tensor rule stays below ~10⁵ nodes).
    pub quadrature_order: Option<usize>,
    /// Largest accepted condition number of the mass matrix.
    pub max_condition: f64,
}

impl Default for GalerkinSettings {
    fn default() -> Self {
        Self {
            quadrature_order: None,
            max_condition: 1e12,
        }
    }
}

impl GalerkinSettings {
    pub fn order_for(&self, dimension: usize, degree: usize) -> usize {
        self.quadrature_order.unwrap_or(match dimension {
            1 | 2 => degree + 16,
            3 => (degree + 8).min(40),
            _ => (degree + 4).min(16),
        })
    }
}

/// Largest Galerkin degree for a given dimension.
pub fn max_degree(dimension: usize) -> usize {
    if dimension <= 2 {
        40
    } else {
        12
    }
}

/// Rayleigh–Ritz spectrum of the weighted Laplacian of `μ` on
/// mean-zero Hermite polynomials.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralResult {
    pub measure: String,
    pub dimension: usize,
    pub degree: usize,
    pub eigenvalues: Vec<f64>,
    /// μ-orthonormal, μ-mean-zero eigenfunctions (constant term included).
    pub eigenfunctions: Vec<HermiteExpansion>,
    /// `∫ u dμ` of each eigenfunction.
    pub mean_residuals: Vec<f64>,
    /// `max |∫ uᵢuⱼ dμ − δᵢⱼ|`.
    pub orthonormality_error: f64,
    pub mass_condition: f64,
    #[serde(skip)]
    pub(crate) stiffness: DMatrix<f64>,
    #[serde(skip)]
    pub(crate) mass: DMatrix<f64>,
    /// Coefficients over the non-constant basis functions.
    #[serde(skip)]
    pub(crate) vectors: DMatrix<f64>,
    #[serde(skip)]
    pub(crate) means: Vec<f64>,
}

impl SpectralResult {
    /// The Poincaré constant estimate `λ⁽¹⁾`.
    pub fn gap(&self) -> f64 {
        self.eigenvalues[0]
    }
}

fn expansion_from(
    dimension: usize,
    degree: usize,
    coeffs: &[f64],
    means: &[f64],
) -> Result<HermiteExpansion> {
    let constant = -coeffs.iter().zip(means).map(|(c, m)| c * m).sum::<f64>();
    let mut full = Vec::with_capacity(coeffs.len() + 1);
    full.push(constant);
    full.extend_from_slice(coeffs);
    HermiteExpansion::new(dimension, degree, full)
}

/// Assembles `A = ∫∇bᵢ·∇bⱼ dμ`, `M = ∫bᵢbⱼ dμ` for `bⱼ = H_J − ∫H_J dμ`
/// (`J ≠ 0`) and solves `A c = λ M c`.
pub fn poincare_galerkin(
    mu: &LogConcaveMeasure,
    degree: usize,
    settings: &GalerkinSettings,
) -> Result<SpectralResult> {
    let n = mu.dimension();
    if degree == 0 || degree > max_degree(n) {
        return Err(Error::InvalidArgument(format!(
            "degree must lie in 1..={} for dimension {n}, got {degree}",
            max_degree(n)
        )));
    }
    let indices: Vec<MultiIndex> = multi_indices(n, degree).into_iter().skip(1).collect();
    let nb = indices.len();
    let order = settings.order_for(n, degree);
    let quad = QuadratureRule::gauss_hermite(order, n)?;
    let (nodes, weights) = mu.weighted_nodes(&quad)?;

    let mut raw_mass = DMatrix::<f64>::zeros(nb, nb);
    let mut stiffness = DMatrix::<f64>::zeros(nb, nb);
    let mut means = vec![0.0; nb];
    for start in (0..nodes.len()).step_by(CHUNK) {
        let end = (start + CHUNK).min(nodes.len());
        let rows = end - start;
        let mut b = DMatrix::<f64>::zeros(rows, nb);
        let mut g: Vec<DMatrix<f64>> = (0..n).map(|_| DMatrix::zeros(rows, nb)).collect();
        for (r, q) in (start..end).enumerate() {
            let table = BasisTable::new(degree, &nodes[q]);
            let sw = weights[q].sqrt();
            for (c, j) in indices.iter().enumerate() {
                let v = table.value(j);
                means[c] += weights[q] * v;
                b[(r, c)] = sw * v;
                for (d, gd) in g.iter_mut().enumerate() {
                    gd[(r, c)] = sw * table.partial(j, d);
                }
            }
        }
        raw_mass += b.tr_mul(&b);
        for gd in &g {
            stiffness += gd.tr_mul(gd);
        }
    }
    if raw_mass
        .iter()
        .chain(stiffness.iter())
        .any(|v| !v.is_finite())
    {
        return Err(Error::NumericalDomain(
            "non-finite Galerkin matrix entry".into(),
        ));
    }
    let mvec = nalgebra::DVector::from_column_slice(&means);
    let mass = &raw_mass - &mvec * mvec.transpose();
    let spec = generalized_sym_eigen(&stiffness, &mass, settings.max_condition)?;

    let nev = spec.eigenvalues.len();
    let gram = spec.eigenvectors.transpose() * &mass * &spec.eigenvectors;
    let orthonormality_error = (&gram - DMatrix::<f64>::identity(nev, nev)).amax();
    let mut eigenfunctions = Vec::with_capacity(nev);
    let mut mean_residuals = Vec::with_capacity(nev);
    for c in spec.eigenvectors.column_iter() {
        let coeffs: Vec<f64> = c.iter().copied().collect();
        let e = expansion_from(n, degree, &coeffs, &means)?;
        mean_residuals.push(nodes.iter().zip(&weights).map(|(x, w)| w * e.eval(x)).sum());
        eigenfunctions.push(e);
        if eigenfunctions.len() >= 16 {
            // expansions are for reporting; keep the low end only
            break;
        }
    }
    Ok(SpectralResult {
        measure: mu.potential().family().name().to_string(),
        dimension: n,
        degree,
        eigenvalues: spec.eigenvalues,
        eigenfunctions,
        mean_residuals,
        orthonormality_error,
        mass_condition: spec.mass_condition,
        stiffness,
        mass,
        vectors: spec.eigenvectors,
        means,
    })
}

/// The `k` lowest eigenfunctions turned into exact near-minimizers.
#[derive(Debug, Clone, Serialize)]
pub struct NearMinimizers {
    pub functions: Vec<HermiteExpansion>,
    /// `∫ |∇uᵢ|² dμ`, ascending.
    pub dirichlet: Vec<f64>,
    /// `max ∫ |∇uᵢ|² dμ − 1`, clamped at zero.
    pub epsilon: f64,
    /// Largest off-diagonal `|∫∇uᵢ·∇uⱼ dμ|` before the final diagonalization.
    pub gram_before: f64,
}

/// μ-orthonormalizes the `k` lowest eigenvectors and diagonalizes their
/// Dirichlet Gram matrix so that `∫∇uᵢ·∇uⱼ dμ = 0` for `i ≠ j` exactly.
pub fn near_minimizers(spec: &SpectralResult, k: usize) -> Result<NearMinimizers> {
    let available = spec.vectors.ncols();
    if k == 0 || k > available {
        return Err(Error::InvalidArgument(format!(
            "k must lie in 1..={available}, got {k}"
        )));
    }
    let c = spec.vectors.columns(0, k).into_owned();
    let gram = c.transpose() * &spec.mass * &c;
    let chol = gram
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidMatrix("eigenvector Gram matrix is not positive".into()))?;
    let l_inv = chol
        .l()
        .try_inverse()
        .ok_or_else(|| Error::InvalidMatrix("singular eigenvector Gram matrix".into()))?;
    let c = &c * l_inv.transpose();
    let dir = c.transpose() * &spec.stiffness * &c;
    let mut gram_before = 0.0f64;
    for i in 0..k {
        for j in 0..k {
            if i != j {
                gram_before = gram_before.max(dir[(i, j)].abs());
            }
        }
    }
    let eig = sym_eigen(&((&dir + dir.transpose()) * 0.5))?;
    let c = &c * &eig.eigenvectors;
    let mut functions = Vec::with_capacity(k);
    for col in c.column_iter() {
        let mut coeffs: Vec<f64> = col.iter().copied().collect();
        let lead = coeffs
            .iter()
            .copied()
            .fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
        if lead < 0.0 {
            coeffs.iter_mut().for_each(|v| *v = -*v);
        }
        functions.push(expansion_from(
            spec.dimension,
            spec.degree,
            &coeffs,
            &spec.means,
        )?);
    }
    let dirichlet = eig.eigenvalues.clone();
    let epsilon = (dirichlet.iter().copied().fold(f64::NEG_INFINITY, f64::max) - 1.0).max(0.0);
    if epsilon > 1.0 {
        return Err(Error::HypothesisFailure { epsilon });
    }
    Ok(NearMinimizers {
        functions,
        dirichlet,
        epsilon,
        gram_before,
    })
}

use std::collections::BTreeMap;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numerics::QuadratureRule;

/// Largest total degree accepted by [`hermite_eval`].
pub const MAX_TOTAL_DEGREE: usize = 200;
/// Coordinates beyond this magnitude overflow high-degree products.
pub const MAX_ABS_COORDINATE: f64 = 40.0;

pub type MultiIndex = Vec<usize>;

/// `h_0(x), …, h_d(x)` for the orthonormal probabilists' Hermite family,
/// `h_{j+1} = (x h_j − √j h_{j−1}) / √(j+1)`.
pub fn hermite_1d(degree: usize, x: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(degree + 1);
    h.push(1.0);
    if degree >= 1 {
        h.push(x);
    }
    for j in 1..degree {
        let next = (x * h[j] - (j as f64).sqrt() * h[j - 1]) / ((j + 1) as f64).sqrt();
        h.push(next);
    }
    h
}

/// `H_J(x) = Π h_{jₘ}(xₘ)`.
pub fn hermite_eval(j: &[usize], x: &[f64]) -> Result<f64> {
    if j.len() != x.len() {
        return Err(Error::Dimension(format!(
            "multi-index of length {} at a point of dimension {}",
            j.len(),
            x.len()
        )));
    }
    let total: usize = j.iter().sum();
    if total > MAX_TOTAL_DEGREE {
        return Err(Error::InvalidArgument(format!(
            "total degree {total} exceeds {MAX_TOTAL_DEGREE}"
        )));
    }
    if let Some(v) = x.iter().find(|v| !(v.abs() <= MAX_ABS_COORDINATE)) {
        return Err(Error::NumericalDomain(format!(
            "coordinate {v} outside ±{MAX_ABS_COORDINATE}"
        )));
    }
    Ok(j.iter()
        .zip(x)
        .map(|(&jm, &xm)| hermite_1d(jm, xm)[jm])
        .product())
}

/// All multi-indices with `|J| ≤ degree`, graded by total degree and within
/// a degree in descending lexicographic order, so `e₁, e₂, …` follow `0`.
pub fn multi_indices(dimension: usize, degree: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    for total in 0..=degree {
        let mut current = vec![0; dimension];
        push_with_total(&mut out, &mut current, 0, total);
    }
    out
}

fn push_with_total(out: &mut Vec<MultiIndex>, current: &mut MultiIndex, pos: usize, rest: usize) {
    if pos + 1 == current.len() {
        current[pos] = rest;
        out.push(current.clone());
        return;
    }
    for j in (0..=rest).rev() {
        current[pos] = j;
        push_with_total(out, current, pos + 1, rest - j);
    }
    current[pos] = 0;
}

pub fn index_key(j: &[usize]) -> String {
    j.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

/// Values and gradients of a list of basis functions at one point, from
/// per-axis tables.
pub(crate) struct BasisTable {
    degree: usize,
    values: Vec<Vec<f64>>,
    derivs: Vec<Vec<f64>>,
}

impl BasisTable {
    pub(crate) fn new(degree: usize, x: &[f64]) -> Self {
        let values: Vec<Vec<f64>> = x.iter().map(|&xm| hermite_1d(degree, xm)).collect();
        let derivs = values
            .iter()
            .map(|h| {
                (0..=degree)
                    .map(|j| {
                        if j == 0 {
                            0.0
                        } else {
                            (j as f64).sqrt() * h[j - 1]
                        }
                    })
                    .collect()
            })
            .collect();
        Self {
            degree,
            values,
            derivs,
        }
    }

    pub(crate) fn value(&self, j: &[usize]) -> f64 {
        debug_assert!(j.iter().all(|&jm| jm <= self.degree));
        j.iter()
            .enumerate()
            .map(|(m, &jm)| self.values[m][jm])
            .product()
    }

    pub(crate) fn partial(&self, j: &[usize], d: usize) -> f64 {
        j.iter()
            .enumerate()
            .map(|(m, &jm)| {
                if m == d {
                    self.derivs[m][jm]
                } else {
                    self.values[m][jm]
                }
            })
            .product()
    }
}

/// Coefficients `α_J` of a function in the tensor Hermite basis of
/// `L²(γₙ)`, for all `|J| ≤ degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteExpansion {
    dimension: usize,
    degree: usize,
    indices: Vec<MultiIndex>,
    coefficients: Vec<f64>,
    /// `∫ v² dγ − Σ α_J²` when the expansion came from a function.
    truncation_residual: Option<f64>,
}

impl Serialize for HermiteExpansion {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let map: BTreeMap<String, f64> = self
            .indices
            .iter()
            .zip(&self.coefficients)
            .map(|(j, c)| (index_key(j), *c))
            .collect();
        let mut s = serializer.serialize_struct("HermiteExpansion", 4)?;
        s.serialize_field("dimension", &self.dimension)?;
        s.serialize_field("degree", &self.degree)?;
        s.serialize_field("coefficients", &map)?;
        s.serialize_field("truncation_residual", &self.truncation_residual)?;
        s.end()
    }
}

impl HermiteExpansion {
    /// Coefficients listed in the order of [`multi_indices`].
    pub fn new(dimension: usize, degree: usize, coefficients: Vec<f64>) -> Result<Self> {
        let indices = multi_indices(dimension, degree);
        if indices.len() != coefficients.len() {
            return Err(Error::Dimension(format!(
                "{} coefficients for {} basis functions",
                coefficients.len(),
                indices.len()
            )));
        }
        Ok(Self {
            dimension,
            degree,
            indices,
            coefficients,
            truncation_residual: None,
        })
    }

    /// The single basis element `H_J`.
    pub fn basis_element(j: &[usize]) -> Self {
        let degree = j.iter().sum();
        let indices = multi_indices(j.len(), degree);
        let coefficients = indices
            .iter()
            .map(|i| if i == j { 1.0 } else { 0.0 })
            .collect();
        Self {
            dimension: j.len(),
            degree,
            indices,
            coefficients,
            truncation_residual: None,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn truncation_residual(&self) -> Option<f64> {
        self.truncation_residual
    }

    pub fn coefficient(&self, j: &[usize]) -> f64 {
        self.indices
            .iter()
            .position(|i| i == j)
            .map_or(0.0, |p| self.coefficients[p])
    }

    fn weighted_sum(&self, weight: impl Fn(usize) -> f64) -> f64 {
        self.indices
            .iter()
            .zip(&self.coefficients)
            .map(|(j, c)| weight(j.iter().sum()) * c * c)
            .sum()
    }

    /// `Σ α_J² = ∫ v² dγ` for band-limited `v`.
    pub fn norm_sq(&self) -> f64 {
        self.weighted_sum(|_| 1.0)
    }

    /// `Σ |J| α_J² = ∫ |∇v|² dγ` for band-limited `v`.
    pub fn dirichlet(&self) -> f64 {
        self.weighted_sum(|t| t as f64)
    }

    /// `Σ_{|J|≥2} (|J| − 1) α_J²`.
    pub fn high_frequency(&self) -> f64 {
        self.weighted_sum(|t| if t >= 2 { t as f64 - 1.0 } else { 0.0 })
    }

    /// `Σ_{|J|≥2} (1 + |J|) α_J²`, the squared `W^{1,2}(γ)` norm of the
    /// part above degree one.
    pub fn sobolev_above_linear(&self) -> f64 {
        self.weighted_sum(|t| if t >= 2 { 1.0 + t as f64 } else { 0.0 })
    }

    /// `V = Σⱼ α_{eⱼ} eⱼ`.
    pub fn linear_part(&self) -> Vec<f64> {
        (0..self.dimension)
            .map(|d| {
                let mut e = vec![0; self.dimension];
                e[d] = 1;
                self.coefficient(&e)
            })
            .collect()
    }

    /// `Σ_J α_J ∫ H_J · (other)_J`, the `L²(γ)` inner product.
    pub fn dot(&self, other: &Self) -> f64 {
        if self.indices == other.indices {
            return self
                .coefficients
                .iter()
                .zip(&other.coefficients)
                .map(|(a, b)| a * b)
                .sum();
        }
        self.indices
            .iter()
            .zip(&self.coefficients)
            .map(|(j, c)| c * other.coefficient(j))
            .sum()
    }

    /// `Σ_J |J| α_J β_J = ∫ ∇v·∇w dγ`.
    pub fn dirichlet_dot(&self, other: &Self) -> f64 {
        if self.indices == other.indices {
            return self
                .indices
                .iter()
                .zip(self.coefficients.iter().zip(&other.coefficients))
                .map(|(j, (a, b))| j.iter().sum::<usize>() as f64 * a * b)
                .sum();
        }
        self.indices
            .iter()
            .zip(&self.coefficients)
            .map(|(j, c)| j.iter().sum::<usize>() as f64 * c * other.coefficient(j))
            .sum()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let table = BasisTable::new(self.degree, x);
        self.indices
            .iter()
            .zip(&self.coefficients)
            .map(|(j, c)| c * table.value(j))
            .sum()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let table = BasisTable::new(self.degree, x);
        (0..self.dimension)
            .map(|d| {
                self.indices
                    .iter()
                    .zip(&self.coefficients)
                    .map(|(j, c)| c * table.partial(j, d))
                    .sum()
            })
            .collect()
    }
}

/// `α_J = ∫ v H_J dγₙ` for `|J| ≤ degree` by Gauss–Hermite quadrature.
///
/// The rule must have at least `degree + 2` nodes per axis.
pub fn expand(
    v: impl Fn(&[f64]) -> f64,
    degree: usize,
    quad: &QuadratureRule,
) -> Result<HermiteExpansion> {
    let n = quad.dimension();
    if quad.orders().iter().any(|&q| q < degree + 2) {
        return Err(Error::InvalidArgument(format!(
            "quadrature order {:?} too low for degree {degree}",
            quad.orders()
        )));
    }
    let indices = multi_indices(n, degree);
    let mut coefficients = vec![0.0; indices.len()];
    let mut square = 0.0;
    let mut mass = 0.0;
    quad.for_each(|x, w| {
        let value = v(x);
        let table = BasisTable::new(degree, x);
        for (c, j) in coefficients.iter_mut().zip(&indices) {
            *c += w * value * table.value(j);
        }
        square += w * value * value;
        mass += w;
    });
    for c in coefficients.iter_mut() {
        *c /= mass;
    }
    square /= mass;
    let mut e = HermiteExpansion {
        dimension: n,
        degree,
        indices,
        coefficients,
        truncation_residual: None,
    };
    e.truncation_residual = Some(square - e.norm_sq());
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_degree_values() {
        assert_eq!(hermite_eval(&[1], &[2.0]).unwrap(), 2.0);
        assert_eq!(hermite_eval(&[0, 0], &[3.0, -7.0]).unwrap(), 1.0);
        let h2 = hermite_eval(&[2], &[0.0]).unwrap();
        assert!((h2 + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(
            hermite_eval(&[3], &[41.0]),
            Err(Error::NumericalDomain(_))
        ));
        assert!(hermite_eval(&[201], &[0.0]).is_err());
        assert!(hermite_eval(&[1, 1], &[0.0]).is_err());
    }

    #[test]
    fn index_enumeration() {
        let idx = multi_indices(2, 2);
        assert_eq!(
            idx,
            vec![
                vec![0, 0],
                vec![1, 0],
                vec![0, 1],
                vec![2, 0],
                vec![1, 1],
                vec![0, 2]
            ]
        );
        assert_eq!(multi_indices(3, 4).len(), 35);
    }

    #[test]
    fn expansion_of_square() {
        let quad = QuadratureRule::gauss_hermite(10, 1).unwrap();
        let e = expand(|x| x[0] * x[0], 4, &quad).unwrap();
        assert!((e.coefficient(&[0]) - 1.0).abs() < 1e-13);
        assert!((e.coefficient(&[2]) - 2f64.sqrt()).abs() < 1e-13);
        assert!((e.norm_sq() - 3.0).abs() < 1e-12);
        assert!((e.dirichlet() - 4.0).abs() < 1e-12);
        assert!(e.truncation_residual().unwrap().abs() < 1e-12);
    }

    #[test]
    fn serializes_with_string_keys() {
        let e = HermiteExpansion::basis_element(&[1, 1]);
        let json = serde_json::to_value(&e).unwrap();
        assert_eq!(json["coefficients"]["1,1"], 1.0);
        assert_eq!(json["coefficients"]["0,0"], 0.0);
    }

    #[test]
    fn gradient_matches_derivative_rule() {
        let e = HermiteExpansion::basis_element(&[3]);
        // h3 = (x³ − 3x)/√6, h3' = √3 h2 = √3 (x² − 1)/√2
        let x = 0.7;
        let expected = 3f64.sqrt() * (x * x - 1.0) / 2f64.sqrt();
        assert!((e.gradient(&[x])[0] - expected).abs() < 1e-14);
    }
}

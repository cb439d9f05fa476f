use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{Cdf1d, GridDensity, LogConcaveMeasure};
use crate::numerics::QuadratureRule;

/// Largest cloud accepted by the exact solver.
pub const MAX_ATOMS: usize = 4096;

/// Weighted point cloud, a discrete probability measure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteCloud {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl DiscreteCloud {
    /// Checks that weights are nonnegative and sum to one within 1e-12.
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("empty cloud".into()));
        }
        if points.len() != weights.len() {
            return Err(Error::Dimension(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if points.len() > MAX_ATOMS {
            return Err(Error::ResourceLimit(format!(
                "{} atoms exceed the limit of {MAX_ATOMS}",
                points.len()
            )));
        }
        let n = points[0].len();
        if n == 0 || points.iter().any(|p| p.len() != n) {
            return Err(Error::Dimension(
                "points must share a positive dimension".into(),
            ));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NumericalDomain("non-finite coordinate".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "weights sum to {total}, not 1"
            )));
        }
        Ok(Self { points, weights })
    }

    /// Rescales nonnegative weights to unit mass before validating.
    pub fn normalized(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "cannot normalize total mass {total}"
            )));
        }
        Self::new(points, weights.iter().map(|w| w / total).collect())
    }

    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let w = 1.0 / points.len().max(1) as f64;
        let n = points.len();
        Self::normalized(points, vec![w; n])
    }

    /// Atoms `F⁻¹((i + ½)/N)` of equal weight.
    pub fn quantile_1d(cdf: &Cdf1d, count: usize) -> Result<Self> {
        let points = (0..count)
            .map(|i| vec![cdf.quantile((i as f64 + 0.5) / count as f64)])
            .collect();
        Self::uniform(points)
    }

    /// Gauss–Hermite nodes of `γ_{p,k}` with their weights.
    pub fn gaussian(barycenter: &[f64], order: usize) -> Result<Self> {
        let quad = QuadratureRule::gauss_hermite(order, barycenter.len())?;
        let mut points = Vec::with_capacity(quad.len());
        let mut weights = Vec::with_capacity(quad.len());
        quad.for_each(|x, w| {
            points.push(x.iter().zip(barycenter).map(|(a, p)| a + p).collect());
            weights.push(w);
        });
        Self::normalized(points, weights)
    }

    /// Gauss–Hermite cloud of `μ`, nodes placed in its Laplace frame.
    pub fn from_measure(measure: &LogConcaveMeasure, order: usize) -> Result<Self> {
        let quad = QuadratureRule::gauss_hermite(order, measure.dimension())?;
        let (points, weights) = measure.weighted_nodes(&quad)?;
        Self::normalized(points, weights)
    }

    /// Grid nodes with their masses; massless nodes are dropped.
    pub fn from_grid(grid: &GridDensity) -> Result<Self> {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (i, &m) in grid.mass().iter().enumerate() {
            if m > 0.0 {
                points.push(grid.point(i));
                weights.push(m);
            }
        }
        Self::normalized(points, weights)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dimension()];
        for (p, w) in self.points.iter().zip(&self.weights) {
            for (a, x) in m.iter_mut().zip(p) {
                *a += w * x;
            }
        }
        m
    }

    /// Image under `f`, weights unchanged.
    pub fn map(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        Self::new(
            self.points.iter().map(|p| f(p)).collect(),
            self.weights.clone(),
        )
    }

    /// Image under the coordinate projection onto `coords`.
    pub fn project(&self, coords: &[usize]) -> Result<Self> {
        if coords.iter().any(|&c| c >= self.dimension()) {
            return Err(Error::Dimension("projection index out of range".into()));
        }
        self.map(|p| coords.iter().map(|&c| p[c]).collect())
    }

    /// Tensor product `self ⊗ other`, coordinates concatenated.
    pub fn product(&self, other: &Self) -> Result<Self> {
        let mut points = Vec::with_capacity(self.len() * other.len());
        let mut weights = Vec::with_capacity(self.len() * other.len());
        for (p, w) in self.points.iter().zip(&self.weights) {
            for (q, v) in other.points.iter().zip(&other.weights) {
                let mut x = p.clone();
                x.extend_from_slice(q);
                points.push(x);
                weights.push(w * v);
            }
        }
        Self::normalized(points, weights)
    }

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let header: Vec<String> = (1..=self.dimension()).map(|d| format!("x{d}")).collect();
        writeln!(out, "{},weight", header.join(","))?;
        for (p, w) in self.points.iter().zip(&self.weights) {
            let row: Vec<String> = p.iter().map(|v| format!("{v:.17e}")).collect();
            writeln!(out, "{},{w:.17e}", row.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_weights() {
        assert!(DiscreteCloud::new(vec![vec![0.0]], vec![0.5]).is_err());
        assert!(DiscreteCloud::new(vec![vec![0.0], vec![1.0]], vec![1.5, -0.5]).is_err());
        assert!(DiscreteCloud::new(vec![vec![0.0], vec![1.0, 2.0]], vec![0.5, 0.5]).is_err());
        let big = vec![vec![0.0]; MAX_ATOMS + 1];
        assert!(matches!(
            DiscreteCloud::uniform(big),
            Err(Error::ResourceLimit(_))
        ));
    }

    #[test]
    fn gaussian_cloud_is_centred() {
        let c = DiscreteCloud::gaussian(&[0.3, -1.0], 8).unwrap();
        let m = c.mean();
        assert!((m[0] - 0.3).abs() < 1e-13 && (m[1] + 1.0).abs() < 1e-13);
        assert_eq!(c.len(), 64);
    }

    #[test]
    fn product_and_projection_round_trip() {
        let a = DiscreteCloud::uniform(vec![vec![0.0], vec![1.0]]).unwrap();
        let b = DiscreteCloud::uniform(vec![vec![5.0], vec![6.0], vec![7.0]]).unwrap();
        let ab = a.product(&b).unwrap();
        assert_eq!(ab.len(), 6);
        assert_eq!(ab.dimension(), 2);
        let back = ab.project(&[1]).unwrap();
        assert!((back.mean()[0] - 6.0).abs() < 1e-14);
    }
}

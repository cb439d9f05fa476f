use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One-dimensional building block of the built-in potentials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Factor {
    /// `σ²(s − shift)²/2`, the potential of `N(shift, 1/σ²)`.
    Gaussian { sigma: f64, shift: f64 },
    /// `s²/2 + a·s⁴/4 + b·s`.
    Quartic { a: f64, b: f64 },
}

impl Factor {
    pub fn standard() -> Self {
        Factor::Gaussian {
            sigma: 1.0,
            shift: 0.0,
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            Factor::Gaussian { sigma, shift } => 0.5 * sigma * sigma * (s - shift) * (s - shift),
            Factor::Quartic { a, b } => 0.5 * s * s + 0.25 * a * s.powi(4) + b * s,
        }
    }

    pub fn deriv(&self, s: f64) -> f64 {
        match *self {
            Factor::Gaussian { sigma, shift } => sigma * sigma * (s - shift),
            Factor::Quartic { a, b } => s + a * s.powi(3) + b,
        }
    }

    pub fn second(&self, s: f64) -> f64 {
        match *self {
            Factor::Gaussian { sigma, .. } => sigma * sigma,
            Factor::Quartic { a, .. } => 1.0 + 3.0 * a * s * s,
        }
    }

    pub fn is_gaussian(&self) -> bool {
        match *self {
            Factor::Gaussian { .. } => true,
            Factor::Quartic { a, .. } => a == 0.0,
        }
    }

    /// `(mean, σ)` of the factor when it is Gaussian.
    pub fn gaussian_params(&self) -> Option<(f64, f64)> {
        match *self {
            Factor::Gaussian { sigma, shift } => Some((shift, sigma)),
            Factor::Quartic { a, b } if a == 0.0 => Some((-b, 1.0)),
            Factor::Quartic { .. } => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Factor::Gaussian { sigma, shift } => {
                sigma.is_finite() && sigma > 0.0 && shift.is_finite()
            }
            Factor::Quartic { a, b } => a.is_finite() && a >= 0.0 && b.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidPotential(format!(
                "invalid factor parameters {self:?}"
            )))
        }
    }
}

/// Shape of the perturbation in a ridge family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RidgeProfile {
    /// `g(s) = s²/2`
    Quadratic,
    /// `g(s) = s⁴/4`
    Quartic,
}

/// Built-in potential families with their parameter records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    /// `σ²|x|²/2`
    GaussianScaled { dimension: usize, sigma: f64 },
    /// `|x − p|²/2`
    GaussianShifted { shift: Vec<f64> },
    /// `Σᵢ xᵢ²/2 + a xᵢ⁴/4 + b xᵢ`
    Quartic { dimension: usize, a: f64, b: f64 },
    /// `Σᵢ Vᵢ(xᵢ)`
    Product { factors: Vec<Factor> },
    /// `Σᵢ Vᵢ((Rᵀx)ᵢ)`, the image of a product measure under the rotation `R`
    /// (row-major).
    RotatedProduct {
        rotation: Vec<Vec<f64>>,
        factors: Vec<Factor>,
    },
    /// `|x|²/2 + t·g(x_axis)`
    RidgePerturbation {
        dimension: usize,
        t: f64,
        axis: usize,
        profile: RidgeProfile,
    },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::GaussianScaled { .. } => "gaussian-scaled",
            Family::GaussianShifted { .. } => "gaussian-shifted",
            Family::Quartic { .. } => "quartic",
            Family::Product { .. } => "product",
            Family::RotatedProduct { .. } => "rotated-product",
            Family::RidgePerturbation { .. } => "ridge-perturbation",
        }
    }

    /// 2D rotation of a product by `angle` radians.
    pub fn rotated_2d(angle: f64, factors: Vec<Factor>) -> Self {
        let (s, c) = angle.sin_cos();
        Family::RotatedProduct {
            rotation: vec![vec![c, -s], vec![s, c]],
            factors,
        }
    }
}

/// A smooth potential `V` on `ℝⁿ` with analytic gradient and Hessian.
///
/// Every built-in family is lowered to `V(x) = Σᵢ Vᵢ((Rᵀ(x − c))ᵢ)` for
/// one-dimensional factors `Vᵢ`, an orthogonal `R` and an offset `c`.
#[derive(Debug, Clone)]
pub struct Potential {
    family: Family,
    factors: Vec<Factor>,
    rotation: Option<DMatrix<f64>>,
    offset: Vec<f64>,
}

impl Potential {
    pub fn new(family: Family) -> Result<Self> {
        let (factors, rotation) = match &family {
            Family::GaussianScaled { dimension, sigma } => (
                vec![
                    Factor::Gaussian {
                        sigma: *sigma,
                        shift: 0.0
                    };
                    *dimension
                ],
                None,
            ),
            Family::GaussianShifted { shift } => (
                shift
                    .iter()
                    .map(|&p| Factor::Gaussian {
                        sigma: 1.0,
                        shift: p,
                    })
                    .collect(),
                None,
            ),
            Family::Quartic { dimension, a, b } => {
                (vec![Factor::Quartic { a: *a, b: *b }; *dimension], None)
            }
            Family::Product { factors } => (factors.clone(), None),
            Family::RotatedProduct { rotation, factors } => {
                let n = factors.len();
                if rotation.len() != n || rotation.iter().any(|r| r.len() != n) {
                    return Err(Error::InvalidPotential(format!("rotation must be {n}x{n}")));
                }
                let r = DMatrix::from_fn(n, n, |i, j| rotation[i][j]);
                let err = (&r * r.transpose() - DMatrix::identity(n, n)).amax();
                if err > 1e-10 {
                    return Err(Error::InvalidPotential(format!(
                        "rotation is not orthogonal (error {err:e})"
                    )));
                }
                (factors.clone(), Some(r))
            }
            Family::RidgePerturbation {
                dimension,
                t,
                axis,
                profile,
            } => {
                if *axis >= *dimension {
                    return Err(Error::InvalidPotential(format!(
                        "ridge axis {axis} out of range for dimension {dimension}"
                    )));
                }
                if !(t.is_finite() && *t >= 0.0) {
                    return Err(Error::InvalidPotential(format!(
                        "ridge strength {t} must be >= 0"
                    )));
                }
                let mut f = vec![Factor::standard(); *dimension];
                f[*axis] = match profile {
                    RidgeProfile::Quadratic => Factor::Gaussian {
                        sigma: (1.0 + t).sqrt(),
                        shift: 0.0,
                    },
                    RidgeProfile::Quartic => Factor::Quartic { a: *t, b: 0.0 },
                };
                (f, None)
            }
        };
        if factors.is_empty() {
            return Err(Error::Dimension(
                "potential dimension must be positive".into(),
            ));
        }
        for f in &factors {
            f.validate()?;
        }
        let n = factors.len();
        Ok(Self {
            family,
            factors,
            rotation,
            offset: vec![0.0; n],
        })
    }

    pub fn dimension(&self) -> usize {
        self.factors.len()
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// One-dimensional factors of the product structure (for oracles).
    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn rotation(&self) -> Option<&DMatrix<f64>> {
        self.rotation.as_ref()
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    /// True when `V` is an exact (possibly scaled or shifted) Gaussian.
    pub fn is_gaussian(&self) -> bool {
        self.factors.iter().all(Factor::is_gaussian)
    }

    /// Potential of `R_♯μ`, i.e. `x ↦ V(Rᵀx)`.
    pub fn rotated(&self, r: &DMatrix<f64>) -> Self {
        let base = self
            .rotation
            .clone()
            .unwrap_or_else(|| DMatrix::identity(self.dimension(), self.dimension()));
        let offset = r * DVector::from_column_slice(&self.offset);
        Self {
            family: self.family.clone(),
            factors: self.factors.clone(),
            rotation: Some(r * base),
            offset: offset.iter().copied().collect(),
        }
    }

    /// Potential of `μ` translated by `v`, i.e. `x ↦ V(x − v)`.
    pub fn translated(&self, v: &[f64]) -> Self {
        let mut out = self.clone();
        for (o, d) in out.offset.iter_mut().zip(v) {
            *o += d;
        }
        out
    }

    /// Coordinates in the product frame, `Rᵀ(x − c)`.
    fn local(&self, x: &[f64]) -> Vec<f64> {
        let shifted: Vec<f64> = x.iter().zip(&self.offset).map(|(a, b)| a - b).collect();
        match &self.rotation {
            None => shifted,
            Some(r) => {
                let n = shifted.len();
                (0..n)
                    .map(|i| (0..n).map(|j| r[(j, i)] * shifted[j]).sum())
                    .collect()
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dimension());
        let s = self.local(x);
        self.factors.iter().zip(&s).map(|(f, &v)| f.eval(v)).sum()
    }

    pub fn grad(&self, x: &[f64]) -> DVector<f64> {
        let s = self.local(x);
        let g = DVector::from_iterator(
            s.len(),
            self.factors.iter().zip(&s).map(|(f, &v)| f.deriv(v)),
        );
        match &self.rotation {
            None => g,
            Some(r) => r * g,
        }
    }

    pub fn hess(&self, x: &[f64]) -> DMatrix<f64> {
        let s = self.local(x);
        let d = DVector::from_iterator(
            s.len(),
            self.factors.iter().zip(&s).map(|(f, &v)| f.second(v)),
        );
        let h = DMatrix::from_diagonal(&d);
        match &self.rotation {
            None => h,
            Some(r) => {
                let m = r * h * r.transpose();
                (&m + m.transpose()) * 0.5
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartic_values() {
        let v = Potential::new(Family::Quartic {
            dimension: 1,
            a: 1.0,
            b: 0.0,
        })
        .unwrap();
        assert_eq!(v.eval(&[2.0]), 2.0 + 4.0);
        assert_eq!(v.grad(&[2.0])[0], 2.0 + 8.0);
        assert_eq!(v.hess(&[2.0])[(0, 0)], 13.0);
    }

    #[test]
    fn rotation_of_rotation_composes() {
        let base = Potential::new(Family::Product {
            factors: vec![Factor::standard(), Factor::Quartic { a: 1.0, b: 0.0 }],
        })
        .unwrap();
        let angle = 0.4f64;
        let (s, c) = angle.sin_cos();
        let r = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let rotated = base.rotated(&r);
        let direct = Potential::new(Family::rotated_2d(
            angle,
            vec![Factor::standard(), Factor::Quartic { a: 1.0, b: 0.0 }],
        ))
        .unwrap();
        for x in [[0.3, -1.2], [2.0, 0.5]] {
            assert!((rotated.eval(&x) - direct.eval(&x)).abs() < 1e-13);
            // V(Rᵀ(Rx)) = V(x)
            let rx = &r * DVector::from_column_slice(&x);
            assert!((rotated.eval(rx.as_slice()) - base.eval(&x)).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Potential::new(Family::GaussianScaled {
            dimension: 1,
            sigma: -1.0
        })
        .is_err());
        assert!(Potential::new(Family::RidgePerturbation {
            dimension: 2,
            t: 0.1,
            axis: 2,
            profile: RidgeProfile::Quartic
        })
        .is_err());
        assert!(Potential::new(Family::RotatedProduct {
            rotation: vec![vec![1.0, 1.0], vec![0.0, 1.0]],
            factors: vec![Factor::standard(); 2]
        })
        .is_err());
    }
}

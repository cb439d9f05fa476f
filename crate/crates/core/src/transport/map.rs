use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::sinkhorn::EntropicMap;
use crate::error::{Error, Result};
use crate::measures::LogConcaveMeasure;
use crate::numerics::{gaussian_log_density, MonotoneInterp};

/// How a map was obtained; fixes the tolerances its invariants are held to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    /// Monotone rearrangement in 1D, or a rotated product of such maps.
    Exact1d,
    Entropic {
        reg: f64,
    },
    /// Closed-form affine map (identity, translations, injected faults).
    Analytic,
}

impl Provenance {
    /// Allowed excess of Hessian eigenvalues over `[0, 1]`.
    pub fn map_tolerance(&self) -> f64 {
        match self {
            Provenance::Exact1d | Provenance::Analytic => 1e-8,
            Provenance::Entropic { .. } => 5e-2,
        }
    }

    /// Allowed push-forward error on test functions.
    pub fn push_tolerance(&self) -> f64 {
        match self {
            Provenance::Exact1d | Provenance::Analytic => 1e-8,
            Provenance::Entropic { .. } => 1e-3,
        }
    }

    pub fn reg(&self) -> Option<f64> {
        match self {
            Provenance::Entropic { reg } => Some(*reg),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Provenance::Exact1d => "exact-1d".into(),
            Provenance::Entropic { reg } => format!("entropic({reg})"),
            Provenance::Analytic => "analytic".into(),
        }
    }
}

/// Source of `T′` for a monotone 1D map.
#[derive(Debug, Clone)]
pub enum Derivative {
    /// `T′(x) = ρ_γ(x) / ρ_μ(T(x))`, exact up to the accuracy of `T`.
    ChangeOfVariables {
        target: LogConcaveMeasure,
        /// Added to the target log-density so it integrates to one on the
        /// table used to build the map.
        log_shift: f64,
    },
    /// Derivative of the interpolant.
    Interpolant,
}

/// A nondecreasing map of the line.
#[derive(Debug, Clone)]
pub struct Monotone1d {
    pub interp: MonotoneInterp,
    pub derivative: Derivative,
}

impl Monotone1d {
    pub fn eval(&self, x: f64) -> f64 {
        self.interp.eval(x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let (xs, _) = self.interp.knots();
        let inside = x >= xs[0] && x <= xs[xs.len() - 1];
        match &self.derivative {
            Derivative::ChangeOfVariables { target, log_shift } if inside => {
                let y = self.interp.eval(x);
                let l = gaussian_log_density(&[x]) - target.log_density(&[y]) - log_shift;
                let d = l.exp();
                if d.is_finite() {
                    d
                } else {
                    self.interp.derivative(x)
                }
            }
            _ => self.interp.derivative(x),
        }
    }
}

#[derive(Debug, Clone)]
pub enum MapRepr {
    /// `x ↦ A x + b` with `A` symmetric.
    Affine {
        matrix: DMatrix<f64>,
        shift: Vec<f64>,
    },
    Monotone1D(Monotone1d),
    /// `x ↦ c + R·(Tᵢ((Rᵀx)ᵢ))ᵢ` for monotone factor maps `Tᵢ`.
    Product {
        rotation: Option<DMatrix<f64>>,
        offset: Vec<f64>,
        factors: Vec<Monotone1d>,
    },
    BarycentricND(EntropicMap),
}

/// A transport map `T = ∇φ` from `γₙ`, evaluable with its Jacobian `D²φ`
/// anywhere.
#[derive(Debug, Clone)]
pub struct TransportMap {
    dimension: usize,
    repr: MapRepr,
    provenance: Provenance,
}

/// Map values tabulated at a node set.
#[derive(Debug, Clone, Serialize)]
pub struct MapTable {
    pub nodes: Vec<Vec<f64>>,
    pub mapped: Vec<Vec<f64>>,
    /// Row-major `n×n` entries of `D²φ` at each node.
    pub hessians: Vec<Vec<f64>>,
}

impl TransportMap {
    pub fn new(dimension: usize, repr: MapRepr, provenance: Provenance) -> Self {
        Self {
            dimension,
            repr,
            provenance,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::affine(DMatrix::identity(n, n), vec![0.0; n]).expect("identity is symmetric")
    }

    /// The gradient of the quadratic `⟨x, Ax⟩/2 + ⟨b, x⟩`.
    pub fn affine(matrix: DMatrix<f64>, shift: Vec<f64>) -> Result<Self> {
        let n = shift.len();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::Dimension("affine map shape mismatch".into()));
        }
        if crate::numerics::eigen::asymmetry(&matrix) > 1e-12 {
            return Err(Error::InvalidMatrix("affine map must be symmetric".into()));
        }
        Ok(Self::new(
            n,
            MapRepr::Affine { matrix, shift },
            Provenance::Analytic,
        ))
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn repr(&self) -> &MapRepr {
        &self.repr
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        match &self.repr {
            MapRepr::Affine { matrix, shift } => (0..self.dimension)
                .map(|i| {
                    shift[i]
                        + (0..self.dimension)
                            .map(|j| matrix[(i, j)] * x[j])
                            .sum::<f64>()
                })
                .collect(),
            MapRepr::Monotone1D(m) => vec![m.eval(x[0])],
            MapRepr::Product {
                rotation,
                offset,
                factors,
            } => {
                let z = rotate_t(rotation, x);
                let s: Vec<f64> = factors.iter().zip(&z).map(|(f, zi)| f.eval(*zi)).collect();
                let mut y = rotate(rotation, &s);
                for (yi, c) in y.iter_mut().zip(offset) {
                    *yi += c;
                }
                y
            }
            MapRepr::BarycentricND(e) => e.eval(x),
        }
    }

    /// `D²φ(x)`, the symmetric Jacobian of the map.
    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        self.eval_with_hessian(x).1
    }

    pub fn eval_with_hessian(&self, x: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
        match &self.repr {
            MapRepr::Affine { matrix, .. } => (self.eval(x), matrix.clone()),
            MapRepr::Monotone1D(m) => (
                vec![m.eval(x[0])],
                DMatrix::from_element(1, 1, m.derivative(x[0])),
            ),
            MapRepr::Product {
                rotation, factors, ..
            } => {
                let z = rotate_t(rotation, x);
                let d = DMatrix::from_fn(self.dimension, self.dimension, |i, j| {
                    if i == j {
                        factors[i].derivative(z[i])
                    } else {
                        0.0
                    }
                });
                let h = match rotation {
                    Some(r) => {
                        let h = r * d * r.transpose();
                        (&h + h.transpose()) * 0.5
                    }
                    None => d,
                };
                (self.eval(x), h)
            }
            MapRepr::BarycentricND(e) => e.eval_with_hessian(x),
        }
    }

    pub fn tabulate(&self, nodes: &[Vec<f64>]) -> MapTable {
        let mut mapped = Vec::with_capacity(nodes.len());
        let mut hessians = Vec::with_capacity(nodes.len());
        for x in nodes {
            let (y, h) = self.eval_with_hessian(x);
            mapped.push(y);
            hessians.push(h.transpose().iter().copied().collect());
        }
        MapTable {
            nodes: nodes.to_vec(),
            mapped,
            hessians,
        }
    }
}

impl MapTable {
    /// CSV with columns `x1..xn, t1..tn, h11..hnn`.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let n = self.nodes.first().map_or(0, Vec::len);
        let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        header.extend((1..=n).map(|i| format!("t{i}")));
        for i in 1..=n {
            for j in 1..=n {
                header.push(format!("h{i}{j}"));
            }
        }
        writeln!(out, "{}", header.join(","))?;
        for k in 0..self.nodes.len() {
            let row: Vec<String> = self.nodes[k]
                .iter()
                .chain(&self.mapped[k])
                .chain(&self.hessians[k])
                .map(|v| format!("{v:.17e}"))
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn rotate_t(r: &Option<DMatrix<f64>>, x: &[f64]) -> Vec<f64> {
    match r {
        Some(r) => (0..x.len())
            .map(|i| (0..x.len()).map(|j| r[(j, i)] * x[j]).sum())
            .collect(),
        None => x.to_vec(),
    }
}

fn rotate(r: &Option<DMatrix<f64>>, x: &[f64]) -> Vec<f64> {
    match r {
        Some(r) => (0..x.len())
            .map(|i| (0..x.len()).map(|j| r[(i, j)] * x[j]).sum())
            .collect(),
        None => x.to_vec(),
    }
}

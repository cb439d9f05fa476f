//! Gauss–Hermite rules for the standard Gaussian weight and their tensor
//! products.
//!
//! All rules use the probabilists' convention: weights integrate against
//! `e^{-x²/2}/√(2π)`, so they sum to one and `Σ wᵢ f(xᵢ) ≈ ∫ f dγ`.
//! Nodes come from the Golub–Welsch eigenproblem and are then polished by
//! Newton steps on the orthonormal three-term recurrence; weights are the
//! Christoffel numbers `1 / Σₖ hₖ(x)²`, evaluated with running rescaling so
//! that high orders do not overflow.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

/// Largest supported order per axis.
pub const MAX_ORDER: usize = 512;

/// One-dimensional rule: ascending nodes and matching weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rule1d {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1d {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Tensor-product Gauss–Hermite rule in `dimension` variables.
///
/// Nodes are enumerated in row-major order (last axis fastest). All
/// reductions run in that fixed order so results are bit-reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    axes: Vec<Arc<Rule1d>>,
}

impl QuadratureRule {
    /// Isotropic rule of `order` nodes per axis.
    pub fn gauss_hermite(order: usize, dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Dimension(
                "quadrature dimension must be positive".into(),
            ));
        }
        Self::tensor(&vec![order; dimension])
    }

    /// Anisotropic tensor rule with one order per axis.
    pub fn tensor(orders: &[usize]) -> Result<Self> {
        if orders.is_empty() {
            return Err(Error::Dimension(
                "quadrature dimension must be positive".into(),
            ));
        }
        let axes = orders
            .iter()
            .map(|&o| cached_rule(o))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { axes })
    }

    pub fn dimension(&self) -> usize {
        self.axes.len()
    }

    pub fn orders(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.order()).collect()
    }

    pub fn axis(&self, d: usize) -> &Rule1d {
        &self.axes[d]
    }

    /// Total number of tensor nodes.
    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.order()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Calls `f(x, w)` for every tensor node in row-major order.
    pub fn for_each(&self, mut f: impl FnMut(&[f64], f64)) {
        let dim = self.dimension();
        let mut idx = vec![0usize; dim];
        let mut x: Vec<f64> = self.axes.iter().map(|a| a.nodes[0]).collect();
        loop {
            let w: f64 = (0..dim).map(|d| self.axes[d].weights[idx[d]]).product();
            f(&x, w);
            // odometer increment, last axis fastest
            let mut d = dim;
            loop {
                if d == 0 {
                    return;
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < self.axes[d].order() {
                    x[d] = self.axes[d].nodes[idx[d]];
                    break;
                }
                idx[d] = 0;
                x[d] = self.axes[d].nodes[0];
            }
        }
    }

    /// Materialized nodes (flattened, `dimension` entries per node) and weights.
    pub fn materialize(&self) -> (Vec<f64>, Vec<f64>) {
        let mut pts = Vec::with_capacity(self.len() * self.dimension());
        let mut ws = Vec::with_capacity(self.len());
        self.for_each(|x, w| {
            pts.extend_from_slice(x);
            ws.push(w);
        });
        (pts, ws)
    }

    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        let mut acc = 0.0;
        self.for_each(|x, w| acc += w * f(x));
        acc
    }

    pub fn weight_sum(&self) -> f64 {
        self.axes
            .iter()
            .map(|a| a.weights.iter().sum::<f64>())
            .product()
    }
}

fn cache() -> &'static Mutex<HashMap<usize, Arc<Rule1d>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Rule1d>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn cached_rule(order: usize) -> Result<Arc<Rule1d>> {
    if order < 2 {
        return Err(Error::InvalidArgument(format!(
            "Gauss–Hermite order must be at least 2, got {order}"
        )));
    }
    if order > MAX_ORDER {
        return Err(Error::ResourceLimit(format!(
            "Gauss–Hermite order {order} exceeds {MAX_ORDER}"
        )));
    }
    if let Some(rule) = cache()
        .lock()
        .expect("quadrature cache poisoned")
        .get(&order)
    {
        return Ok(rule.clone());
    }
    let rule = Arc::new(gauss_hermite_1d(order));
    cache()
        .lock()
        .expect("quadrature cache poisoned")
        .insert(order, rule.clone());
    Ok(rule)
}

/// Evaluates `(h_n(x), h_{n-1}(x), ln scale)` of the orthonormal
/// probabilists' Hermite recurrence together with `ln Σ_{k<n} h_k(x)²`.
fn recurrence(n: usize, x: f64) -> (f64, f64, f64) {
    const BIG: f64 = 1e150;
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut log_scale = 0.0;
    let mut sum_sq = 0.0;
    for k in 0..n {
        sum_sq += cur * cur;
        let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
        if cur.abs() > BIG {
            cur /= BIG;
            prev /= BIG;
            sum_sq /= BIG * BIG;
            log_scale += BIG.ln();
        }
    }
    // returns ratio h_n / h_{n-1} pieces and log of the Christoffel sum
    (cur, prev, sum_sq.ln() + 2.0 * log_scale)
}

fn gauss_hermite_1d(n: usize) -> Rule1d {
    // Golub–Welsch seed: Jacobi matrix with off-diagonals √k.
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        jac[(k - 1, k)] = b;
        jac[(k, k - 1)] = b;
    }
    let eig = jac.symmetric_eigen();
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.total_cmp(b));

    for x in nodes.iter_mut() {
        for _ in 0..6 {
            let (hn, hn1, _) = recurrence(n, *x);
            let deriv = (n as f64).sqrt() * hn1;
            if deriv == 0.0 {
                break;
            }
            let step = hn / deriv;
            *x -= step;
            if step.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
    }
    // Enforce exact symmetry of the rule.
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let m = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -m;
        nodes[j] = m;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }

    let mut weights: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            let (_, _, log_sum) = recurrence(n, x);
            (-log_sum).exp()
        })
        .collect();
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
    }
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
    Rule1d { nodes, weights }
}

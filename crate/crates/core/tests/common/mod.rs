//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use brenier_lab::hermite::multi_indices;
use brenier_lab::measures::{Family, LogConcaveMeasure, Potential};
use brenier_lab::wasserstein::DiscreteCloud;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn measure(family: Family) -> LogConcaveMeasure {
    LogConcaveMeasure::with_defaults(Potential::new(family).unwrap()).unwrap()
}

/// Normalized probabilists' Hermite values and derivatives up to `n`.
pub fn he(n: usize, x: f64) -> (Vec<f64>, Vec<f64>) {
    let mut p = vec![1.0, x];
    for k in 1..n {
        p.push(x * p[k] - k as f64 * p[k - 1]);
    }
    p.truncate(n + 1);
    let mut fact = 1.0;
    let mut v = Vec::with_capacity(n + 1);
    let mut d = Vec::with_capacity(n + 1);
    for k in 0..=n {
        if k > 0 {
            fact *= k as f64;
        }
        v.push(p[k] / fact.sqrt());
        d.push(if k == 0 {
            0.0
        } else {
            k as f64 * p[k - 1] / fact.sqrt()
        });
    }
    (v, d)
}

/// Value and gradient of `Σ α_J Π He_{jᵢ}(xᵢ)/√jᵢ!`.
pub fn oracle(terms: &[(Vec<usize>, f64)], x: &[f64]) -> (f64, Vec<f64>) {
    let top = terms
        .iter()
        .flat_map(|(j, _)| j.iter().copied())
        .max()
        .unwrap_or(0);
    let tables: Vec<_> = x.iter().map(|&xi| he(top, xi)).collect();
    let mut value = 0.0;
    let mut grad = vec![0.0; x.len()];
    for (j, a) in terms {
        value += a * j
            .iter()
            .enumerate()
            .map(|(i, &ji)| tables[i].0[ji])
            .product::<f64>();
        for (g, gd) in grad.iter_mut().enumerate() {
            let prod: f64 = j
                .iter()
                .enumerate()
                .map(|(i, &ji)| {
                    if i == g {
                        tables[i].1[ji]
                    } else {
                        tables[i].0[ji]
                    }
                })
                .product();
            *gd += a * prod;
        }
    }
    (value, grad)
}

/// `∫ f dγ` by the trapezoid rule on `[−12, 12]ⁿ`.
pub fn gaussian_trapezoid(dim: usize, f: impl Fn(&[f64]) -> f64) -> f64 {
    let h = 0.05;
    let count = (24.0 / h) as usize + 1;
    let nodes: Vec<f64> = (0..count).map(|i| -12.0 + i as f64 * h).collect();
    let w: Vec<f64> = nodes
        .iter()
        .map(|x| h * (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt())
        .collect();
    match dim {
        1 => nodes.iter().zip(&w).map(|(&x, wx)| wx * f(&[x])).sum(),
        2 => {
            let mut s = 0.0;
            for (i, &x) in nodes.iter().enumerate() {
                if w[i] < 1e-30 {
                    continue;
                }
                for (j, &y) in nodes.iter().enumerate() {
                    s += w[i] * w[j] * f(&[x, y]);
                }
            }
            s
        }
        _ => unreachable!(),
    }
}

pub fn random_band_limited(
    rng: &mut ChaCha8Rng,
    dim: usize,
    degree: usize,
) -> Vec<(Vec<usize>, f64)> {
    multi_indices(dim, degree)
        .into_iter()
        .map(|j| (j.to_vec(), rng.gen_range(-1.0..1.0)))
        .collect()
}

/// Eigenvalue `index` (from zero) of the symmetric tridiagonal `(diag, off)` by Sturm
/// bisection.
pub fn tridiagonal_eigenvalue(diag: &[f64], off: &[f64], index: usize) -> f64 {
    let below = |x: f64| {
        let mut count = 0;
        let mut q = diag[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..diag.len() {
            let prev = if q == 0.0 { 1e-300 } else { q };
            q = diag[i] - x - off[i - 1] * off[i - 1] / prev;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    };
    let (mut lo, mut hi) = (-1.0, 100.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if below(mid) > index {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Smallest nonzero eigenvalue of `−(ρu′)′ = λρu` on `[−L, L]` with
/// Neumann ends, by conservative finite differences.
pub fn finite_difference_gap(v: impl Fn(f64) -> f64, half_width: f64, cells: usize) -> f64 {
    let h = 2.0 * half_width / cells as f64;
    let x = |i: usize| -half_width + i as f64 * h;
    let rho: Vec<f64> = (0..=cells).map(|i| (-v(x(i))).exp()).collect();
    let mid: Vec<f64> = (0..cells)
        .map(|i| (-v(x(i) + 0.5 * h)).exp() / (h * h))
        .collect();
    let mut mass = rho.clone();
    mass[0] *= 0.5;
    mass[cells] *= 0.5;
    let mut diag = vec![0.0; cells + 1];
    for i in 0..cells {
        diag[i] += mid[i];
        diag[i + 1] += mid[i];
    }
    let diag: Vec<f64> = diag.iter().zip(&mass).map(|(d, m)| d / m).collect();
    let off: Vec<f64> = (0..cells)
        .map(|i| -mid[i] / (mass[i] * mass[i + 1]).sqrt())
        .collect();
    tridiagonal_eigenvalue(&diag, &off, 1)
}

pub fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..n {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

/// Optimal uniform-weight coupling by enumeration of permutation matrices.
pub fn brute_force(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    permutations(a.len())
        .iter()
        .map(|p| {
            p.iter()
                .enumerate()
                .map(|(i, &j)| dist(&a[i], &b[j]))
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
        / a.len() as f64
}

pub fn random_points(rng: &mut ChaCha8Rng, count: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect()
}

pub fn random_cloud(rng: &mut ChaCha8Rng, count: usize, dim: usize) -> DiscreteCloud {
    let pts = random_points(rng, count, dim);
    let w: Vec<f64> = (0..count).map(|_| rng.gen_range(0.05..1.0)).collect();
    DiscreteCloud::normalized(pts, w).unwrap()
}

/// Monotone rearrangement of `γ₁` onto `e^{−v}` from cumulative trapezoid
/// tables on `[−15, 15]`.
pub struct QuantileOracle {
    grid: Vec<f64>,
    cdf: Vec<f64>,
    gauss: Vec<f64>,
    log_norm: f64,
    v: Box<dyn Fn(f64) -> f64>,
}

fn cumulative(grid: &[f64], f: impl Fn(f64) -> f64) -> (Vec<f64>, f64) {
    let vals: Vec<f64> = grid.iter().map(|&y| f(y)).collect();
    let mut acc = vec![0.0; grid.len()];
    for i in 1..grid.len() {
        acc[i] = acc[i - 1] + 0.5 * (grid[i] - grid[i - 1]) * (vals[i] + vals[i - 1]);
    }
    let total = acc[grid.len() - 1];
    acc.iter_mut().for_each(|a| *a /= total);
    (acc, total)
}

impl QuantileOracle {
    pub fn new(v: impl Fn(f64) -> f64 + 'static) -> Self {
        let h = 2e-4;
        let count = (30.0 / h) as usize + 1;
        let grid: Vec<f64> = (0..count).map(|i| -15.0 + i as f64 * h).collect();
        let floor = grid.iter().map(|&y| v(y)).fold(f64::INFINITY, f64::min);
        let (cdf, total) = cumulative(&grid, |y| (floor - v(y)).exp());
        let (gauss, _) = cumulative(&grid, |y| (-0.5 * y * y).exp());
        Self {
            grid,
            cdf,
            gauss,
            log_norm: total.ln() - floor,
            v: Box::new(v),
        }
    }

    fn invert(table: &[f64], grid: &[f64], p: f64) -> f64 {
        let i = table.partition_point(|&c| c < p).clamp(1, table.len() - 1);
        let s = (p - table[i - 1]) / (table[i] - table[i - 1]);
        grid[i - 1] + s * (grid[i] - grid[i - 1])
    }

    fn lookup(table: &[f64], grid: &[f64], x: f64) -> f64 {
        let i = grid.partition_point(|&g| g < x).clamp(1, grid.len() - 1);
        let s = (x - grid[i - 1]) / (grid[i] - grid[i - 1]);
        table[i - 1] + s * (table[i] - table[i - 1])
    }

    /// `T(x) = F⁻¹(Φ(x))`.
    pub fn map(&self, x: f64) -> f64 {
        let p = Self::lookup(&self.gauss, &self.grid, x);
        Self::invert(&self.cdf, &self.grid, p)
    }

    /// `T′(x) = φ(x) / ρ(T(x))`.
    pub fn derivative(&self, x: f64) -> f64 {
        let phi = -0.5 * x * x - 0.5 * (2.0 * std::f64::consts::PI).ln();
        let rho = -(self.v)(self.map(x)) - self.log_norm;
        (phi - rho).exp()
    }

    /// `∫ |F − Φ|`, the W1 distance to the standard Gaussian.
    pub fn w1_to_standard(&self) -> f64 {
        let d: Vec<f64> = self
            .cdf
            .iter()
            .zip(&self.gauss)
            .map(|(a, b)| (a - b).abs())
            .collect();
        (1..d.len())
            .map(|i| 0.5 * (self.grid[i] - self.grid[i - 1]) * (d[i] + d[i - 1]))
            .sum()
    }
}

/// Trapezoid nodes and weights for `γ₁` on `[−6, 6]`, renormalized.
pub fn gaussian_nodes(h: f64) -> Vec<(f64, f64)> {
    let count = (12.0 / h).round() as usize + 1;
    let raw: Vec<(f64, f64)> = (0..count)
        .map(|i| {
            let x = -6.0 + i as f64 * h;
            (x, (-0.5 * x * x).exp())
        })
        .collect();
    let total: f64 = raw.iter().map(|p| p.1).sum();
    raw.into_iter().map(|(x, w)| (x, w / total)).collect()
}

/// `[∫ max(a′, b′) dγ₂, ∫ min(a′, b′) dγ₂]` for the product map `(a, b)`.
pub fn product_m(a: &QuantileOracle, b: &QuantileOracle) -> [f64; 2] {
    let nodes = gaussian_nodes(0.01);
    let da: Vec<f64> = nodes.iter().map(|&(x, _)| a.derivative(x)).collect();
    let db: Vec<f64> = nodes.iter().map(|&(x, _)| b.derivative(x)).collect();
    let mut m = [0.0; 2];
    for (i, &(_, wi)) in nodes.iter().enumerate() {
        for (j, &(_, wj)) in nodes.iter().enumerate() {
            let w = wi * wj;
            m[0] += w * da[i].max(db[j]);
            m[1] += w * da[i].min(db[j]);
        }
    }
    m
}

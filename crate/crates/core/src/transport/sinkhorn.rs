//! Entropic optimal transport between tensor grids.
//!
//! All updates run in the log domain. The kernel `exp(−|x−y|²/2reg)`
//! factorizes over axes, so every soft-min is evaluated one axis at a time.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::map::{MapRepr, Provenance, TransportMap};
use crate::error::{Error, Result};
use crate::measures::{Axis, GridDensity, LogConcaveMeasure};
use crate::numerics::gaussian_log_density;

/// Terms this far below the running maximum are dropped from a log-sum-exp;
/// `e^{−40}` is below double-precision resolution of the sum.
const LSE_CUTOFF: f64 = 40.0;

/// Jacobian estimator for the barycentric map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum HessianMethod {
    /// `D²φ(x) = Cov(y | x)/reg`, the exact Jacobian of the barycentric map
    /// extended through the dual potential. Symmetric and PSD by
    /// construction.
    Covariance,
    /// Central differences of the barycentric map with the given step
    /// (grid spacing when `None`), symmetrized.
    FiniteDifference { step: Option<f64> },
}

/// Settings of [`entropic_transport`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EntropicSettings {
    pub reg: f64,
    /// Half-width of both grids around their centres.
    pub half_width: f64,
    /// Nodes per axis; `None` resolves the entropic kernel in 2D (spacing
    /// at most `min(0.075, 1.1·√reg)`) and uses 41 (3D) or 17 (4D) nodes.
    pub nodes: Option<usize>,
    /// L¹ marginal residual at which iteration stops.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Warm start through a geometric decrease of the regularization.
    pub eps_scaling: bool,
    /// Shrink each target axis by the marginal standard deviation of `μ`
    /// (at most 1 for 1-log-concave measures) so the lattice resolves the
    /// entropic conditional `Cov(y|x) = reg·D²φ` in contracting directions.
    pub scale_target: bool,
    pub hessian: HessianMethod,
}

impl Default for EntropicSettings {
    fn default() -> Self {
        Self {
            reg: 5e-3,
            half_width: 6.0,
            nodes: None,
            tolerance: 1e-9,
            max_iterations: 50_000,
            eps_scaling: true,
            scale_target: true,
            hessian: HessianMethod::Covariance,
        }
    }
}

impl EntropicSettings {
    pub fn nodes_for(&self, dimension: usize) -> usize {
        self.nodes.unwrap_or(match dimension {
            0..=2 => {
                let h = 0.075f64.min(1.1 * self.reg.sqrt());
                let cells = (2.0 * self.half_width / h).ceil() as usize;
                cells + 1 + cells % 2
            }
            3 => 41,
            _ => 17,
        })
    }

    pub fn with_reg(mut self, reg: f64) -> Self {
        self.reg = reg;
        self
    }
}

/// Convergence record of a Sinkhorn solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SinkhornReport {
    pub iterations: usize,
    pub residual: f64,
    pub relaxation: f64,
    pub stages: usize,
}

/// Barycentric projection of an entropic plan, extended to all of `ℝⁿ`
/// through the target dual potential:
/// `π(y_j | x) ∝ exp(h_j − |x − y_j|²/2reg)` with `h_j = g_j/reg + log b_j`.
#[derive(Debug, Clone)]
pub struct EntropicMap {
    reg: f64,
    /// Target axes relative to `center`.
    axes: Vec<Vec<f64>>,
    log_weights: Vec<f64>,
    center: Vec<f64>,
    spacing: f64,
    hessian: HessianMethod,
    report: SinkhornReport,
}

impl EntropicMap {
    pub fn reg(&self) -> f64 {
        self.reg
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn report(&self) -> &SinkhornReport {
        &self.report
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    fn dim(&self) -> usize {
        self.axes.len()
    }

    /// Visits `(flat index, log-weight of y_j given x)` for all target nodes.
    fn conditional_logs(&self, x: &[f64], out: &mut Vec<f64>) {
        let inv = 0.5 / self.reg;
        let q: Vec<Vec<f64>> = self
            .axes
            .iter()
            .zip(x)
            .map(|(ax, xi)| ax.iter().map(|y| (xi - y) * (xi - y) * inv).collect())
            .collect();
        out.clear();
        out.extend_from_slice(&self.log_weights);
        let shape: Vec<usize> = self.axes.iter().map(Vec::len).collect();
        let mut stride = out.len();
        for (d, qd) in q.iter().enumerate() {
            stride /= shape[d];
            for (flat, v) in out.iter_mut().enumerate() {
                *v -= qd[(flat / stride) % shape[d]];
            }
        }
    }

    fn moments(&self, x: &[f64], second: bool) -> (Vec<f64>, Option<DMatrix<f64>>) {
        let n = self.dim();
        let mut logs = Vec::new();
        self.conditional_logs(x, &mut logs);
        let (arg, m) =
            logs.iter()
                .copied()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (i, l)| if l > acc.1 { (i, l) } else { acc },
                );
        let shape: Vec<usize> = self.axes.iter().map(Vec::len).collect();
        // moments about the most likely node to avoid cancellation
        let mut origin = vec![0.0; n];
        let mut rem = arg;
        for d in (0..n).rev() {
            origin[d] = self.axes[d][rem % shape[d]];
            rem /= shape[d];
        }
        let mut total = 0.0;
        let mut mean = vec![0.0; n];
        let mut cross = DMatrix::<f64>::zeros(n, n);
        let mut y = vec![0.0; n];
        for (flat, l) in logs.iter().enumerate() {
            if *l < m - LSE_CUTOFF {
                continue;
            }
            let w = (l - m).exp();
            let mut rem = flat;
            for d in (0..n).rev() {
                y[d] = self.axes[d][rem % shape[d]] - origin[d];
                rem /= shape[d];
            }
            total += w;
            for a in 0..n {
                mean[a] += w * y[a];
                if second {
                    for b in 0..=a {
                        cross[(a, b)] += w * y[a] * y[b];
                    }
                }
            }
        }
        for v in mean.iter_mut() {
            *v /= total;
        }
        let centred = mean.clone();
        for (v, o) in mean.iter_mut().zip(&origin) {
            *v += o;
        }
        let cov = second.then(|| {
            DMatrix::from_fn(n, n, |a, b| {
                let (a, b) = if a >= b { (a, b) } else { (b, a) };
                (cross[(a, b)] / total - centred[a] * centred[b]) / self.reg
            })
        });
        (mean, cov)
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let (mut y, _) = self.moments(x, false);
        for (v, c) in y.iter_mut().zip(&self.center) {
            *v += c;
        }
        y
    }

    pub fn eval_with_hessian(&self, x: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
        match self.hessian {
            HessianMethod::Covariance => {
                let (mut y, h) = self.moments(x, true);
                for (v, c) in y.iter_mut().zip(&self.center) {
                    *v += c;
                }
                (y, h.expect("second moments requested"))
            }
            HessianMethod::FiniteDifference { step } => {
                let h = step.unwrap_or(self.spacing);
                (self.eval(x), self.fd_hessian(x, h))
            }
        }
    }

    /// Symmetrized central-difference Jacobian of the map.
    pub fn fd_hessian(&self, x: &[f64], step: f64) -> DMatrix<f64> {
        let n = self.dim();
        let mut jac = DMatrix::zeros(n, n);
        let mut xp = x.to_vec();
        for j in 0..n {
            xp[j] = x[j] + step;
            let fp = self.eval(&xp);
            xp[j] = x[j] - step;
            let fm = self.eval(&xp);
            xp[j] = x[j];
            for i in 0..n {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * step);
            }
        }
        (&jac + jac.transpose()) * 0.5
    }

    /// `‖J − Jᵀ‖_max` of the unsymmetrized finite-difference Jacobian; the
    /// distance of the barycentric map from an exact gradient.
    pub fn symmetrization_gap(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        let step = self.spacing;
        let mut jac = DMatrix::zeros(n, n);
        let mut xp = x.to_vec();
        for j in 0..n {
            xp[j] = x[j] + step;
            let fp = self.eval(&xp);
            xp[j] = x[j] - step;
            let fm = self.eval(&xp);
            xp[j] = x[j];
            for i in 0..n {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * step);
            }
        }
        (&jac - jac.transpose()).amax()
    }
}

/// Source (`γₙ`) and target (`μ`) grids for [`entropic_transport`].
///
/// The source is centred at the origin, the target at the barycenter of
/// `μ`. Both use the same node count; the target half-widths are scaled by
/// the marginal standard deviations of `μ` when `scale_target` is set.
pub fn entropic_grids(
    mu: &LogConcaveMeasure,
    settings: &EntropicSettings,
) -> Result<(GridDensity, GridDensity)> {
    let n = mu.dimension();
    check_dimension(n)?;
    let count = settings.nodes_for(n);
    let center = mu.barycenter()?;
    let src_axes = (0..n)
        .map(|_| Axis::uniform(0.0, settings.half_width, count))
        .collect::<Result<Vec<_>>>()?;
    let scales: Vec<f64> = if settings.scale_target {
        center
            .iter()
            .enumerate()
            .map(|(d, c)| {
                mu.expectation(|x| (x[d] - c) * (x[d] - c))
                    .map(|v| v.sqrt().clamp(0.25, 1.0))
            })
            .collect::<Result<_>>()?
    } else {
        vec![1.0; n]
    };
    let tgt_axes = center
        .iter()
        .zip(&scales)
        .map(|(&c, s)| Axis::uniform(c, settings.half_width * s, count))
        .collect::<Result<Vec<_>>>()?;
    let src = tabulate(src_axes, gaussian_log_density)?;
    let tgt = tabulate(tgt_axes, |x| mu.log_density(x))?;
    Ok((src, tgt))
}

fn tabulate(axes: Vec<Axis>, f: impl Fn(&[f64]) -> f64) -> Result<GridDensity> {
    let shape: Vec<usize> = axes.iter().map(Axis::len).collect();
    let mut values = Vec::with_capacity(shape.iter().product());
    let mut x = vec![0.0; axes.len()];
    crate::measures::for_each_index(&shape, |idx| {
        for (d, &i) in idx.iter().enumerate() {
            x[d] = axes[d].nodes[i];
        }
        values.push(f(&x));
    });
    GridDensity::from_log_density(axes, values)
}

fn check_dimension(n: usize) -> Result<()> {
    if !(2..=4).contains(&n) {
        return Err(Error::Dimension(format!(
            "entropic transport needs dimension 2-4, got {n}"
        )));
    }
    Ok(())
}

/// Entropic Brenier map from `γₙ` to `μ` on default grids.
pub fn entropic_map(mu: &LogConcaveMeasure, settings: &EntropicSettings) -> Result<TransportMap> {
    let (src, tgt) = entropic_grids(mu, settings)?;
    entropic_transport(mu, &src, &tgt, settings)
}

/// Solves the entropic problem between `source` and `target` with cost
/// `|x − y|²/2` and returns the barycentric map.
pub fn entropic_transport(
    mu: &LogConcaveMeasure,
    source: &GridDensity,
    target: &GridDensity,
    settings: &EntropicSettings,
) -> Result<TransportMap> {
    let n = mu.dimension();
    check_dimension(n)?;
    if source.dimension() != n || target.dimension() != n {
        return Err(Error::Dimension(
            "grid and measure dimensions differ".into(),
        ));
    }
    let reg = settings.reg;
    if !(1e-3..=1.0).contains(&reg) {
        return Err(Error::InvalidArgument(format!(
            "reg must lie in [1e-3, 1], got {reg}"
        )));
    }
    // Work in target coordinates relative to the grid barycenter.
    let center: Vec<f64> = (0..n)
        .map(|d| {
            (0..target.len())
                .map(|j| target.mass()[j] * target.point(j)[d])
                .sum()
        })
        .collect();
    let src_axes: Vec<Vec<f64>> = source.axes().iter().map(|a| a.nodes.clone()).collect();
    let tgt_axes: Vec<Vec<f64>> = target
        .axes()
        .iter()
        .zip(&center)
        .map(|(a, c)| a.nodes.iter().map(|y| y - c).collect())
        .collect();
    let log_a: Vec<f64> = source.mass().iter().map(|m| m.ln()).collect();
    let log_b: Vec<f64> = target.mass().iter().map(|m| m.ln()).collect();
    let problem = Problem {
        src_axes: &src_axes,
        tgt_axes: &tgt_axes,
        log_a: &log_a,
        log_b: &log_b,
    };
    let (v, report) = problem.solve(settings)?;
    let log_weights: Vec<f64> = v.iter().zip(&log_b).map(|(v, lb)| v + lb).collect();
    let spacing = tgt_axes
        .iter()
        .map(|a| a[1] - a[0])
        .fold(f64::INFINITY, f64::min);
    log::debug!(
        "sinkhorn reg={reg} iterations={} residual={:e} omega={}",
        report.iterations,
        report.residual,
        report.relaxation
    );
    Ok(TransportMap::new(
        n,
        MapRepr::BarycentricND(EntropicMap {
            reg,
            axes: tgt_axes,
            log_weights,
            center,
            spacing,
            hessian: settings.hessian,
            report,
        }),
        Provenance::Entropic { reg },
    ))
}

struct Problem<'a> {
    src_axes: &'a [Vec<f64>],
    tgt_axes: &'a [Vec<f64>],
    log_a: &'a [f64],
    log_b: &'a [f64],
}

impl Problem<'_> {
    /// Returns the scaled target potential `g/reg`.
    fn solve(&self, settings: &EntropicSettings) -> Result<(Vec<f64>, SinkhornReport)> {
        let target = settings.reg;
        let mut regs = Vec::new();
        if settings.eps_scaling {
            let mut r = 1.0f64;
            while r > 2.0 * target {
                regs.push(r);
                r *= 0.5;
            }
        }
        regs.push(target);
        // potentials scaled by the current reg: u = f/reg, v = g/reg
        let mut u = vec![0.0; self.log_a.len()];
        let mut v = vec![0.0; self.log_b.len()];
        let mut prev_reg = regs[0];
        let mut rate_hint: Option<(f64, f64)> = None;
        let mut total_iters = 0usize;
        let mut last = SinkhornReport {
            iterations: 0,
            residual: f64::INFINITY,
            relaxation: 1.0,
            stages: regs.len(),
        };
        for (stage, &reg) in regs.iter().enumerate() {
            let rescale = prev_reg / reg;
            u.iter_mut().for_each(|x| *x *= rescale);
            v.iter_mut().for_each(|x| *x *= rescale);
            prev_reg = reg;
            let final_stage = stage + 1 == regs.len();
            let tol = if final_stage {
                settings.tolerance
            } else {
                1e-2
            };
            let cap = if final_stage {
                settings.max_iterations.saturating_sub(total_iters).max(1)
            } else {
                500
            };
            let start = rate_hint.map(|(r, kappa): (f64, f64)| {
                // 1 − κ scales roughly linearly with the regularization
                let gap = ((1.0 - kappa) * reg / r).clamp(1e-6, 1.0);
                (2.0 / (1.0 + gap.sqrt())).min(1.9)
            });
            let (iters, residual, omega, observed) =
                self.iterate(&mut u, &mut v, reg, tol, cap, start.unwrap_or(1.0))?;
            if let Some(kappa) = observed {
                rate_hint = Some((reg, kappa));
            } else if omega > 1.0 {
                let root = 2.0 / omega - 1.0;
                rate_hint = Some((reg, 1.0 - root * root));
            }
            total_iters += iters;
            last = SinkhornReport {
                iterations: total_iters,
                residual,
                relaxation: omega,
                stages: regs.len(),
            };
            if final_stage && residual > tol {
                return Err(Error::Convergence {
                    iterations: total_iters,
                    residual,
                });
            }
        }
        Ok((v, last))
    }

    /// Over-relaxed Sinkhorn. Unless a starting factor is supplied, the
    /// relaxation is set from the contraction rate observed over the first
    /// plain iterations. Soft-mins use the banded evaluation; convergence is
    /// confirmed with the exhaustive one.
    fn iterate(
        &self,
        u: &mut [f64],
        v: &mut [f64],
        reg: f64,
        tol: f64,
        cap: usize,
        start_omega: f64,
    ) -> Result<(usize, f64, f64, Option<f64>)> {
        let kx = kernels(self.tgt_axes, self.src_axes, reg);
        let ky = kernels(self.src_axes, self.tgt_axes, reg);
        let mut omega = start_omega;
        let mut probing = omega == 1.0;
        let mut banded = true;
        let mut history: Vec<f64> = Vec::new();
        let mut scratch = Scratch::default();
        let mut hat_u = vec![0.0; u.len()];
        let mut hat_v = vec![0.0; v.len()];
        let mut input = vec![0.0; v.len().max(u.len())];
        let mut best = (f64::INFINITY, u.to_vec(), v.to_vec());
        for it in 1..=cap {
            // û = −LSE_j(v_j + log b_j − C_ij/reg)
            for (x, (a, b)) in input.iter_mut().zip(v.iter().zip(self.log_b)) {
                *x = a + b;
            }
            soft_min(
                &input[..v.len()],
                self.tgt_axes,
                &kx,
                &mut hat_u,
                &mut scratch,
                banded,
            );
            let mut residual = 0.0;
            for i in 0..u.len() {
                let a = self.log_a[i].exp();
                residual += (a - (self.log_a[i] + u[i] - hat_u[i]).exp()).abs();
                u[i] = (1.0 - omega) * u[i] + omega * hat_u[i];
            }
            for (x, (a, b)) in input.iter_mut().zip(u.iter().zip(self.log_a)) {
                *x = a + b;
            }
            soft_min(
                &input[..u.len()],
                self.src_axes,
                &ky,
                &mut hat_v,
                &mut scratch,
                banded,
            );
            for j in 0..v.len() {
                if self.log_b[j] == f64::NEG_INFINITY {
                    hat_v[j] = 0.0;
                    continue;
                }
                let b = self.log_b[j].exp();
                residual += (b - (self.log_b[j] + v[j] - hat_v[j]).exp()).abs();
                v[j] = (1.0 - omega) * v[j] + omega * hat_v[j];
            }
            if !residual.is_finite() || u.iter().chain(v.iter()).any(|x| !x.is_finite()) {
                return Err(Error::NumericalDomain(format!(
                    "non-finite Sinkhorn potentials at reg {reg}"
                )));
            }
            if residual < best.0 {
                best.0 = residual;
                best.1.copy_from_slice(u);
                best.2.copy_from_slice(v);
            } else if omega > 1.0 && residual > 1e3 * best.0 {
                // relaxation diverging: restore and fall back to plain updates
                u.copy_from_slice(&best.1);
                v.copy_from_slice(&best.2);
                omega = 1.0;
                probing = false;
            }
            if residual <= tol {
                if banded {
                    // confirm with exhaustive sums on the next pass
                    banded = false;
                    continue;
                }
                return Ok((it, residual, omega, plain_rate(&history, probing)));
            }
            history.push(residual);
            if probing && history.len() == 30 {
                probing = false;
                let rate = (history[29] / history[9]).powf(1.0 / 20.0);
                if rate.is_finite() && rate < 1.0 {
                    omega = (2.0 / (1.0 + (1.0 - rate).sqrt())).min(1.9);
                }
            }
        }
        Ok((cap, best.0, omega, plain_rate(&history, probing)))
    }
}

/// Contraction rate of un-relaxed iterations, from the second half of the
/// residual history.
fn plain_rate(history: &[f64], plain: bool) -> Option<f64> {
    if !plain || history.len() < 6 {
        return None;
    }
    let a = history.len() / 2;
    let b = history.len() - 1;
    let rate = (history[b] / history[a]).powf(1.0 / (b - a) as f64);
    (rate.is_finite() && rate > 0.0 && rate < 1.0).then_some(rate)
}

/// Per-axis cost matrices `K[i][j] = (x_i − y_j)²/2reg` stored row-major
/// (`x` from `to`, `y` from `from`).
fn kernels(from: &[Vec<f64>], to: &[Vec<f64>], reg: f64) -> Vec<Vec<f64>> {
    from.iter()
        .zip(to)
        .map(|(ys, xs)| {
            let mut k = Vec::with_capacity(xs.len() * ys.len());
            for x in xs {
                for y in ys {
                    k.push((x - y) * (x - y) * 0.5 / reg);
                }
            }
            k
        })
        .collect()
}

#[derive(Default)]
struct Scratch {
    a: Vec<f64>,
    b: Vec<f64>,
    fiber: Vec<f64>,
}

/// `out_i = −LSE_j(input_j − K(x_i, y_j))`, one axis at a time. `from`
/// holds the axes of `input`; the output shape follows the kernels.
fn soft_min(
    input: &[f64],
    from: &[Vec<f64>],
    kernels: &[Vec<f64>],
    out: &mut [f64],
    scratch: &mut Scratch,
    banded: bool,
) {
    let d = from.len();
    let mut shape: Vec<usize> = from.iter().map(Vec::len).collect();
    scratch.a.clear();
    scratch.a.extend_from_slice(input);
    for axis in 0..d {
        let n_from = shape[axis];
        let n_to = kernels[axis].len() / n_from;
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        scratch.b.clear();
        scratch.b.resize(outer * n_to * inner, 0.0);
        scratch.fiber.resize(n_from, 0.0);
        let k = &kernels[axis];
        for o in 0..outer {
            for r in 0..inner {
                for j in 0..n_from {
                    scratch.fiber[j] = scratch.a[(o * n_from + j) * inner + r];
                }
                let mut hint = 0usize;
                for i in 0..n_to {
                    let row = &k[i * n_from..(i + 1) * n_from];
                    let value = if banded {
                        banded_lse(&scratch.fiber, row, &mut hint)
                    } else {
                        full_lse(&scratch.fiber, row)
                    };
                    scratch.b[(o * n_to + i) * inner + r] = value;
                }
            }
        }
        shape[axis] = n_to;
        std::mem::swap(&mut scratch.a, &mut scratch.b);
    }
    for (o, v) in out.iter_mut().zip(&scratch.a) {
        *o = -v;
    }
}

/// `LSE_j(f_j − c_j)` over all terms.
fn full_lse(fiber: &[f64], row: &[f64]) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for (f, c) in fiber.iter().zip(row) {
        let t = f - c;
        if t > m {
            m = t;
        }
    }
    if m == f64::NEG_INFINITY {
        return m;
    }
    let floor = m - LSE_CUTOFF;
    let mut s = 0.0;
    for (f, c) in fiber.iter().zip(row) {
        let t = f - c;
        if t > floor {
            s += (t - m).exp();
        }
    }
    m + s.ln()
}

/// `LSE_j(f_j − c_j)` for terms that are concave in `j`, as they are for
/// log-concave marginals: hill-climb to the maximum from `hint`, then sum
/// outwards until the terms fall below the cutoff. Falls back to the full
/// sum when no finite maximum is found.
fn banded_lse(fiber: &[f64], row: &[f64], hint: &mut usize) -> f64 {
    const MISSES: usize = 4;
    let n = fiber.len();
    let t = |j: usize| fiber[j] - row[j];
    let mut j = (*hint).min(n - 1);
    let mut best = t(j);
    let start = j;
    while j + 1 < n && t(j + 1) >= best {
        j += 1;
        best = t(j);
    }
    if j == start {
        while j > 0 && t(j - 1) > best {
            j -= 1;
            best = t(j);
        }
    }
    if best == f64::NEG_INFINITY {
        return full_lse(fiber, row);
    }
    *hint = j;
    let mut m = best;
    let mut s = 1.0;
    for range in [
        &mut ((j + 1)..n) as &mut dyn Iterator<Item = usize>,
        &mut (0..j).rev(),
    ] {
        let mut misses = 0;
        for jj in range {
            let v = t(jj);
            if v > m - LSE_CUTOFF {
                if v > m {
                    s = s * (m - v).exp() + 1.0;
                    m = v;
                } else {
                    s += (v - m).exp();
                }
                misses = 0;
            } else {
                misses += 1;
                if misses >= MISSES {
                    break;
                }
            }
        }
    }
    m + s.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_min_matches_direct_sum() {
        let xs = vec![vec![-1.0, 0.0, 1.0], vec![-0.5, 0.5]];
        let ys = vec![vec![-1.0, 1.0], vec![-1.0, 0.0, 1.0]];
        let input = vec![0.1, -0.2, 0.3, 0.0, 0.5, -0.4];
        let reg = 0.3;
        let k = kernels(&ys, &xs, reg);
        let mut out = vec![0.0; 6];
        soft_min(&input, &ys, &k, &mut out, &mut Scratch::default(), false);
        let mut banded = vec![0.0; 6];
        soft_min(&input, &ys, &k, &mut banded, &mut Scratch::default(), true);
        for (a, b) in out.iter().zip(&banded) {
            assert!((a - b).abs() < 1e-13);
        }
        for i0 in 0..3 {
            for i1 in 0..2 {
                let mut s = 0.0;
                for j0 in 0..2 {
                    for j1 in 0..3 {
                        let c = ((xs[0][i0] - ys[0][j0]).powi(2) + (xs[1][i1] - ys[1][j1]).powi(2))
                            / (2.0 * reg);
                        s += (input[j0 * 3 + j1] - c).exp();
                    }
                }
                assert!((out[i0 * 2 + i1] + s.ln()).abs() < 1e-13);
            }
        }
    }
}

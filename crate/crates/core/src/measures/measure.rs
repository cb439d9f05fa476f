use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::potential::Potential;
use crate::error::{Error, Result};
use crate::numerics::{self, eigen, QuadratureRule, HALF_LN_2PI};

/// Numerical settings shared by the measure operations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasureSettings {
    /// Truncation radius of tensor grids, measured from the mode.
    pub window: f64,
    /// Gauss–Hermite order per axis for normalization and moments.
    pub quadrature_order: usize,
    /// Tensor-grid nodes per axis; `None` picks 257 (1D–2D) or 65 (3D–4D).
    pub grid_nodes: Option<usize>,
}

impl Default for MeasureSettings {
    fn default() -> Self {
        Self {
            window: 8.0,
            quadrature_order: 64,
            grid_nodes: None,
        }
    }
}

impl MeasureSettings {
    pub fn grid_nodes_for(&self, dimension: usize) -> usize {
        self.grid_nodes
            .unwrap_or(if dimension <= 2 { 257 } else { 65 })
    }

    /// Per-axis order used for `dimension`-variate quadratures, capped so
    /// the tensor rule stays at desk scale.
    pub fn quadrature_order_for(&self, dimension: usize) -> usize {
        let cap = match dimension {
            0 | 1 => usize::MAX,
            2 => 64,
            3 => 24,
            _ => 16,
        };
        self.quadrature_order.min(cap)
    }
}

/// Gaussian local frame of a convex potential: `x = mode + L·u` with
/// `L = (D²V(mode))^{-1/2}`.
#[derive(Debug, Clone)]
pub(crate) struct LaplaceFrame {
    pub mode: Vec<f64>,
    pub scale: DMatrix<f64>,
    pub log_det: f64,
}

impl LaplaceFrame {
    pub fn map(&self, u: &[f64], out: &mut [f64]) {
        let n = u.len();
        for i in 0..n {
            let mut v = self.mode[i];
            for j in 0..n {
                v += self.scale[(i, j)] * u[j];
            }
            out[i] = v;
        }
    }
}

/// Minimizes a smooth convex function by damped Newton iterations.
pub(crate) fn newton_minimize(
    f: impl Fn(&[f64]) -> f64,
    grad: impl Fn(&[f64]) -> DVector<f64>,
    hess: impl Fn(&[f64]) -> DMatrix<f64>,
    start: &[f64],
) -> Result<Vec<f64>> {
    let n = start.len();
    let mut x = start.to_vec();
    let mut fx = f(&x);
    if !fx.is_finite() {
        return Err(Error::NumericalDomain(
            "non-finite potential at Newton start".into(),
        ));
    }
    for _ in 0..200 {
        let g = grad(&x);
        if g.norm() <= 1e-13 * (1.0 + fx.abs()) {
            break;
        }
        let h = hess(&x);
        let step = match h.clone().cholesky() {
            Some(ch) => ch.solve(&g),
            None => g.clone(),
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = (0..n).map(|i| x[i] - t * step[i]).collect();
            let fc = f(&cand);
            if fc.is_finite() && fc <= fx - 1e-4 * t * g.dot(&step) + 1e-15 * fx.abs() {
                x = cand;
                fx = fc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted
            || step.norm() * t < 1e-15 * (1.0 + x.iter().map(|v| v.abs()).fold(0.0, f64::max))
        {
            break;
        }
    }
    Ok(x)
}

/// Rise of `V` above its minimum at which reference and target widths are matched.
const SECANT_LEVEL: f64 = 16.0;

pub(crate) fn laplace_frame(
    f: impl Fn(&[f64]) -> f64,
    grad: impl Fn(&[f64]) -> DVector<f64>,
    hess: impl Fn(&[f64]) -> DMatrix<f64>,
    start: &[f64],
) -> Result<LaplaceFrame> {
    let mode = newton_minimize(&f, &grad, &hess, start)?;
    let h = hess(&mode);
    let spec = eigen::sym_eigen_unchecked(&h);
    let n = mode.len();
    let mut inv_sqrt = DVector::zeros(n);
    for i in 0..n {
        // Flat or concave directions fall back to unit scale.
        let lam = if spec.eigenvalues[i] > 1e-12 {
            spec.eigenvalues[i]
        } else {
            1.0
        };
        inv_sqrt[i] = 1.0 / lam.sqrt();
    }
    // Match the Gaussian reference to the secant growth of V along each
    // principal direction. Exact for quadratics; for super-quadratic
    // potentials a narrower reference converges far faster than the
    // curvature at the mode would suggest.
    let f0 = f(&mode);
    let mut probe = mode.clone();
    for i in 0..n {
        let dir = spec.eigenvectors.column(i);
        let mut rise = |t: f64| {
            for (k, p) in probe.iter_mut().enumerate() {
                *p = mode[k] + t * dir[k];
            }
            f(&probe) - f0
        };
        let guess = (2.0 * SECANT_LEVEL).sqrt() * inv_sqrt[i];
        let reach = |rise: &mut dyn FnMut(f64) -> f64, sign: f64| -> Option<f64> {
            let (mut lo, mut hi) = (0.0, guess);
            let mut tries = 0;
            while rise(sign * hi) < SECANT_LEVEL {
                lo = hi;
                hi *= 2.0;
                tries += 1;
                if tries > 40 {
                    return None;
                }
            }
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if rise(sign * mid) < SECANT_LEVEL {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Some(0.5 * (lo + hi))
        };
        let plus = reach(&mut rise, 1.0);
        let minus = reach(&mut rise, -1.0);
        if let (Some(a), Some(b)) = (plus, minus) {
            let s = 0.5 * (a + b) / (2.0 * SECANT_LEVEL).sqrt();
            if s.is_finite() && s > 0.0 {
                inv_sqrt[i] = s;
            }
        }
    }
    let log_det = inv_sqrt.iter().map(|s| s.ln()).sum::<f64>();
    let q = &spec.eigenvectors;
    let scale = q * DMatrix::from_diagonal(&inv_sqrt) * q.transpose();
    Ok(LaplaceFrame {
        mode,
        scale,
        log_det,
    })
}

/// `ln ∫ e^{−V}` over the whole space via Laplace-centred Gauss–Hermite
/// quadrature with max-shift of the log-integrand.
pub(crate) fn log_integral(
    f: impl Fn(&[f64]) -> f64,
    frame: &LaplaceFrame,
    quad: &QuadratureRule,
) -> Result<f64> {
    let n = frame.mode.len();
    let mut logs = Vec::with_capacity(quad.len());
    let mut x = vec![0.0; n];
    let mut bad = None;
    quad.for_each(|u, w| {
        frame.map(u, &mut x);
        let v = f(&x);
        if !v.is_finite() {
            bad = Some(x.clone());
        }
        let usq: f64 = u.iter().map(|a| a * a).sum();
        logs.push(w.ln() - v + 0.5 * usq);
    });
    if let Some(at) = bad {
        return Err(Error::NumericalDomain(format!(
            "non-finite potential at {at:?}"
        )));
    }
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = logs.iter().map(|l| (l - m).exp()).sum();
    let total = m + s.ln() + frame.log_det + HALF_LN_2PI * n as f64;
    if !total.is_finite() {
        return Err(Error::NumericalDomain("non-finite log-integral".into()));
    }
    Ok(total)
}

/// `ln ∫ e^{−V(x)} dx` by Gauss–Hermite quadrature re-centred at the mode of
/// `V` and scaled by its Hessian there.
pub fn normalize(potential: &Potential, quad: &QuadratureRule) -> Result<f64> {
    if quad.dimension() != potential.dimension() {
        return Err(Error::Dimension(
            "quadrature and potential dimensions differ".into(),
        ));
    }
    let frame = potential_frame(potential)?;
    let margin = check_potential_convexity(potential, &frame.mode)?;
    if margin < -1e-9 {
        log::warn!("1-log-concavity violated at the mode (margin {margin:.3e})");
    }
    require_mass(log_integral(|x| potential.eval(x), &frame, quad)?)
}

/// Rejects a whole-space mass below 1e-300; marginal slices may be smaller.
fn require_mass(log_total: f64) -> Result<f64> {
    if log_total < (1e-300f64).ln() {
        return Err(Error::Underflow(format!(
            "total mass e^{log_total} below 1e-300"
        )));
    }
    Ok(log_total)
}

fn potential_frame(potential: &Potential) -> Result<LaplaceFrame> {
    let start = vec![0.0; potential.dimension()];
    laplace_frame(
        |x| potential.eval(x),
        |x| potential.grad(x),
        |x| potential.hess(x),
        &start,
    )
}

fn check_potential_convexity(potential: &Potential, x: &[f64]) -> Result<f64> {
    let h = potential.hess(x);
    let scale = h.amax().max(1.0);
    let asym = eigen::asymmetry(&h);
    if asym > 1e-12 * scale {
        return Err(Error::InvalidPotential(format!(
            "Hessian asymmetry {asym:e} at {x:?}"
        )));
    }
    Ok(numerics::sym_eigenvalues(&h)[0] - 1.0)
}

/// Minimum of `λ₁(D²V(x)) − 1` over `nodes` (each of length `n`).
pub fn check_one_log_concavity(measure: &LogConcaveMeasure, nodes: &[Vec<f64>]) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::InvalidArgument("audit node set is empty".into()));
    }
    let mut margin = f64::INFINITY;
    for x in nodes {
        margin = margin.min(check_potential_convexity(&measure.potential, x)?);
    }
    Ok(margin)
}

/// The probability measure `e^{−V}/Z dx`.
#[derive(Debug, Clone)]
pub struct LogConcaveMeasure {
    potential: Potential,
    log_z: f64,
    convexity_margin: f64,
    frame: LaplaceFrame,
    settings: MeasureSettings,
}

impl LogConcaveMeasure {
    pub fn new(potential: Potential, settings: MeasureSettings) -> Result<Self> {
        let n = potential.dimension();
        let quad = QuadratureRule::gauss_hermite(settings.quadrature_order_for(n), n)?;
        let frame = potential_frame(&potential)?;
        let log_z = require_mass(log_integral(|x| potential.eval(x), &frame, &quad)?)?;
        let mut measure = Self {
            potential,
            log_z,
            convexity_margin: f64::NAN,
            frame,
            settings,
        };
        let nodes = measure.audit_nodes();
        measure.convexity_margin = check_one_log_concavity(&measure, &nodes)?;
        if measure.convexity_margin < -1e-9 {
            log::warn!(
                "measure {} violates D²V ≥ Id (margin {:.3e})",
                measure.potential.family().name(),
                measure.convexity_margin
            );
        }
        Ok(measure)
    }

    pub fn with_defaults(potential: Potential) -> Result<Self> {
        Self::new(potential, MeasureSettings::default())
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn dimension(&self) -> usize {
        self.potential.dimension()
    }

    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    pub fn convexity_margin(&self) -> f64 {
        self.convexity_margin
    }

    /// Whether `D²V ≥ Id` held at every audit node (up to 1e-9).
    pub fn passes_audit(&self) -> bool {
        self.convexity_margin >= -1e-9
    }

    pub fn settings(&self) -> &MeasureSettings {
        &self.settings
    }

    /// Minimizer of `V`.
    pub fn mode(&self) -> &[f64] {
        &self.frame.mode
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        -self.potential.eval(x) - self.log_z
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        self.log_density(x).exp()
    }

    /// Audit nodes: a tensor grid over the truncation window around the
    /// mode together with the Laplace-centred quadrature nodes.
    pub fn audit_nodes(&self) -> Vec<Vec<f64>> {
        let n = self.dimension();
        let per_axis = match n {
            1 => 257usize,
            2 => 33,
            3 => 9,
            _ => 5,
        };
        let mut nodes = Vec::new();
        let total = per_axis.pow(n as u32);
        for flat in 0..total {
            let mut rem = flat;
            let mut x = vec![0.0; n];
            for d in (0..n).rev() {
                let i = rem % per_axis;
                rem /= per_axis;
                let t = -1.0 + 2.0 * i as f64 / (per_axis - 1) as f64;
                x[d] = self.frame.mode[d] + self.settings.window * t;
            }
            nodes.push(x);
        }
        if let Ok(quad) = QuadratureRule::gauss_hermite(8.min(self.settings.quadrature_order), n) {
            let mut x = vec![0.0; n];
            quad.for_each(|u, _| {
                self.frame.map(u, &mut x);
                nodes.push(x.clone());
            });
        }
        nodes
    }

    /// Probability-normalized nodes and weights such that
    /// `Σ wᵢ f(xᵢ) ≈ ∫ f dμ`, built from a Gauss–Hermite rule in the
    /// Laplace frame.
    pub fn weighted_nodes(&self, quad: &QuadratureRule) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        if quad.dimension() != self.dimension() {
            return Err(Error::Dimension(
                "quadrature and measure dimensions differ".into(),
            ));
        }
        let n = self.dimension();
        let mut pts = Vec::with_capacity(quad.len());
        let mut logs = Vec::with_capacity(quad.len());
        let mut x = vec![0.0; n];
        quad.for_each(|u, w| {
            self.frame.map(u, &mut x);
            let usq: f64 = u.iter().map(|a| a * a).sum();
            logs.push(w.ln() - self.potential.eval(&x) + 0.5 * usq);
            pts.push(x.clone());
        });
        let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut ws: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
        let s: f64 = ws.iter().sum();
        for w in ws.iter_mut() {
            *w /= s;
        }
        Ok((pts, ws))
    }

    /// `∫ f dμ` using the default quadrature order.
    pub fn expectation(&self, f: impl Fn(&[f64]) -> f64) -> Result<f64> {
        let n = self.dimension();
        let quad = QuadratureRule::gauss_hermite(self.settings.quadrature_order_for(n), n)?;
        let (pts, ws) = self.weighted_nodes(&quad)?;
        Ok(pts.iter().zip(&ws).map(|(x, w)| w * f(x)).sum())
    }

    /// `∫ x dμ(x)`.
    pub fn barycenter(&self) -> Result<Vec<f64>> {
        let n = self.dimension();
        (0..n).map(|d| self.expectation(|x| x[d])).collect()
    }

    /// Image measure under the rotation `r`.
    pub fn rotated(&self, r: &DMatrix<f64>) -> Result<Self> {
        Self::new(self.potential.rotated(r), self.settings)
    }

    pub fn translated(&self, v: &[f64]) -> Result<Self> {
        Self::new(self.potential.translated(v), self.settings)
    }
}

/// The Gaussian `γ_{p,k}` with identity covariance and barycenter `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMeasure {
    pub barycenter: Vec<f64>,
}

impl GaussianMeasure {
    pub fn standard(k: usize) -> Self {
        Self {
            barycenter: vec![0.0; k],
        }
    }

    pub fn dimension(&self) -> usize {
        self.barycenter.len()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let sq: f64 = x
            .iter()
            .zip(&self.barycenter)
            .map(|(a, p)| (a - p) * (a - p))
            .sum();
        -0.5 * sq - HALF_LN_2PI * x.len() as f64
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        self.log_density(x).exp()
    }
}

use nalgebra::DMatrix;
use serde::Serialize;

use super::basis::{expand, HermiteExpansion};
use super::galerkin::{near_minimizers, poincare_galerkin, GalerkinSettings};
use crate::error::{Error, Result};
use crate::measures::LogConcaveMeasure;
use crate::numerics::{complete_orthonormal, polar_rows, sym_eigenvalues, QuadratureRule};
use crate::transport::{assemble_profile, TransportMap};

/// Gauss–Hermite order used to expand `u ∘ T`.
pub fn pullback_order(dimension: usize, degree: usize) -> usize {
    let base = match dimension {
        1 => 96,
        2 => 48,
        3 => 20,
        _ => 12,
    };
    base.max(degree + 2)
}

/// Hermite expansion of `v = u ∘ T` on the Gaussian side.
#[derive(Debug, Clone, Serialize)]
pub struct Pullback {
    pub expansion: HermiteExpansion,
    /// `∫ v dγ` by quadrature.
    pub mean: f64,
    /// `∫ v² dγ` by quadrature, untruncated.
    pub square: f64,
}

/// Push-forward consistency of a pullback.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PushforwardCheck {
    pub mean_gap: f64,
    pub square_gap: f64,
}

impl Pullback {
    /// Compares `∫ v dγ`, `∫ v² dγ` with `∫ u dμ`, `∫ u² dμ`.
    pub fn check(&self, u: &HermiteExpansion, mu: &LogConcaveMeasure) -> Result<PushforwardCheck> {
        let m = mu.expectation(|x| u.eval(x))?;
        let s = mu.expectation(|x| u.eval(x).powi(2))?;
        Ok(PushforwardCheck {
            mean_gap: (self.mean - m).abs(),
            square_gap: (self.square - s).abs(),
        })
    }
}

/// Expands `u ∘ T` in the `γₙ`-Hermite basis up to `degree`.
pub fn pullback(u: &HermiteExpansion, map: &TransportMap, degree: usize) -> Result<Pullback> {
    let n = map.dimension();
    if u.dimension() != n {
        return Err(Error::Dimension(format!(
            "function of dimension {} composed with a map of dimension {n}",
            u.dimension()
        )));
    }
    let quad = QuadratureRule::gauss_hermite(pullback_order(n, degree), n)?;
    let v = |x: &[f64]| u.eval(&map.eval(x));
    let expansion = expand(v, degree, &quad)?;
    let mean = quad.integrate(|x| v(x)) / quad.weight_sum();
    let square = quad.integrate(|x| v(x).powi(2)) / quad.weight_sum();
    Ok(Pullback {
        expansion,
        mean,
        square,
    })
}

/// `λ_max((Id − A)² − (Id − A²))`, which is `≤ 0` whenever `0 ≤ A ≤ Id`.
pub fn matrix_inequality_excess(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let sym = (a + a.transpose()) * 0.5;
    let lhs = (&id - &sym) * (&id - &sym);
    let rhs = &id - &sym * &sym;
    let d = lhs - rhs;
    sym_eigenvalues(&((&d + d.transpose()) * 0.5))
        .last()
        .copied()
        .unwrap_or(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertificateSettings {
    /// Constant in the `O(√ε)` bounds.
    pub c_cert: f64,
    /// Degree of the expansions of `vᵢ = uᵢ ∘ T`.
    pub pullback_degree: usize,
    /// Gauss–Hermite order per axis for the eigenvalue profile.
    pub profile_order: usize,
    /// Additive tolerance for every stage; `None` derives it from the map
    /// provenance.
    pub floor: Option<f64>,
    /// Largest `ε` for which the chain is attempted.
    pub max_epsilon: f64,
    pub galerkin: GalerkinSettings,
}

impl Default for CertificateSettings {
    fn default() -> Self {
        Self {
            c_cert: 10.0,
            pullback_degree: 12,
            profile_order: 24,
            floor: None,
            max_epsilon: 0.5,
            galerkin: GalerkinSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageCheck {
    pub stage: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl StageCheck {
    fn new(stage: &str, value: f64, limit: f64) -> Self {
        Self {
            stage: stage.to_string(),
            value,
            limit,
            passed: value <= limit,
        }
    }
}

/// Chebyshev view of the gradient defect: the γ-mass where
/// `|∇uᵢ∘T − ∇vᵢ| > τ` against its Markov bound `defectᵢ / τ²`.
#[derive(Debug, Clone, Serialize)]
pub struct LayerCake {
    pub threshold: f64,
    pub mass_above: Vec<f64>,
    pub chebyshev_bound: Vec<f64>,
}

/// Every intermediate quantity of the near-minimizer → eigenvalue chain.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub k: usize,
    pub degree: usize,
    pub provenance: String,
    pub epsilon: f64,
    pub dirichlet: Vec<f64>,
    pub pushforward: Vec<PushforwardCheck>,
    /// `∫ |∇uᵢ ∘ T − ∇vᵢ|² dγ`.
    pub gradient_defects: Vec<f64>,
    /// `∫ ∇vᵢ·∇vⱼ dγ`.
    pub gradient_gram: Vec<Vec<f64>>,
    pub gram_residual: f64,
    /// `Σ_{|J|≥2} (|J| − 1) (α_J^i)²`.
    pub high_frequency: Vec<f64>,
    /// `‖zᵢ‖²_{W^{1,2}(γ)}` of the part of `vᵢ` above degree one.
    pub z_norms: Vec<f64>,
    pub linear_parts: Vec<Vec<f64>>,
    pub linear_gram: Vec<Vec<f64>>,
    pub rotation: Vec<Vec<f64>>,
    /// `max |Vᵢ − (R)ᵢ|` for the aligned orthonormal rows.
    pub alignment: f64,
    pub singular_ratio: f64,
    /// `∫ λ_k(D²ψ) dγ` with ascending eigenvalues, i.e. `1 − m_k`.
    pub delta_chain: f64,
    /// The same functional at ascending index `n − k + 1`.
    pub delta_literal: f64,
    /// `δ_chain / √ε`, absent when `ε = 0`.
    pub ratio: Option<f64>,
    pub floor: f64,
    pub c_cert: f64,
    pub layer_cake: LayerCake,
    pub stages: Vec<StageCheck>,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        self.stages.iter().all(|s| s.passed)
    }

    pub fn first_failure(&self) -> Option<&StageCheck> {
        self.stages.iter().find(|s| !s.passed)
    }

    /// Turns the first failing stage into an error.
    pub fn into_result(self) -> Result<Self> {
        match self.first_failure() {
            Some(s) => Err(Error::CertificateFailure {
                stage: s.stage.clone(),
                value: s.value,
                bound: s.limit,
            }),
            None => Ok(self),
        }
    }
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Runs the chain and reports every stage without failing on bounds.
pub fn certificate_report(
    mu: &LogConcaveMeasure,
    map: &TransportMap,
    k: usize,
    degree: usize,
    settings: &CertificateSettings,
) -> Result<CertificateReport> {
    let n = mu.dimension();
    if map.dimension() != n {
        return Err(Error::Dimension("measure and map dimensions differ".into()));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "k must lie in 1..={n}, got {k}"
        )));
    }
    let spec = poincare_galerkin(mu, degree, &settings.galerkin)?;
    let nm = near_minimizers(&spec, k)?;
    let eps = nm.epsilon;
    if eps > settings.max_epsilon {
        return Err(Error::HypothesisFailure { epsilon: eps });
    }
    let provenance = map.provenance();
    let exact = provenance.map_tolerance() <= 1e-8;
    let floor = settings.floor.unwrap_or(if exact {
        1e-6
    } else {
        provenance.map_tolerance()
    });
    let hf_tol = if exact { 1e-6 } else { floor };

    let mut pulls = Vec::with_capacity(k);
    let mut pushforward = Vec::with_capacity(k);
    for u in &nm.functions {
        let p = pullback(u, map, settings.pullback_degree)?;
        pushforward.push(p.check(u, mu)?);
        pulls.push(p);
    }

    // gradients on the Gaussian side: ∇(u∘T) = D²φ ∇u(T)
    let quad = QuadratureRule::gauss_hermite(pullback_order(n, settings.pullback_degree), n)?;
    let threshold = if eps > 0.0 { eps.powf(0.25) } else { 0.0 };
    let mut defects = vec![0.0; k];
    let mut above = vec![0.0; k];
    let mut gram = DMatrix::<f64>::zeros(k, k);
    let mut mass = 0.0;
    quad.for_each(|x, w| {
        let (tx, h) = map.eval_with_hessian(x);
        let grads: Vec<nalgebra::DVector<f64>> = nm
            .functions
            .iter()
            .map(|u| nalgebra::DVector::from_vec(u.gradient(&tx)))
            .collect();
        let pulled: Vec<nalgebra::DVector<f64>> = grads.iter().map(|g| &h * g).collect();
        for i in 0..k {
            let r = (&grads[i] - &pulled[i]).norm_squared();
            defects[i] += w * r;
            if r.sqrt() > threshold {
                above[i] += w;
            }
            for j in 0..k {
                gram[(i, j)] += w * pulled[i].dot(&pulled[j]);
            }
        }
        mass += w;
    });
    defects.iter_mut().for_each(|d| *d /= mass);
    above.iter_mut().for_each(|a| *a /= mass);
    gram /= mass;
    let mut gram_residual = 0.0f64;
    for i in 0..k {
        for j in 0..k {
            if i != j {
                gram_residual = gram_residual.max(gram[(i, j)].abs());
            }
        }
    }

    let high_frequency: Vec<f64> = pulls.iter().map(|p| p.expansion.high_frequency()).collect();
    let z_norms: Vec<f64> = pulls
        .iter()
        .map(|p| p.expansion.sobolev_above_linear())
        .collect();
    let linear_parts: Vec<Vec<f64>> = pulls.iter().map(|p| p.expansion.linear_part()).collect();
    let v = DMatrix::from_fn(k, n, |i, j| linear_parts[i][j]);
    let linear_gram = &v * v.transpose();
    let (q, singular_ratio) = polar_rows(&v);
    let alignment = (0..k)
        .map(|i| (v.row(i) - q.row(i)).norm())
        .fold(0.0, f64::max);
    let rotation = complete_orthonormal(&q);
    let bessel = linear_parts
        .iter()
        .map(|l| l.iter().map(|a| a * a).sum::<f64>().sqrt())
        .fold(0.0, f64::max);

    let profile_quad = QuadratureRule::gauss_hermite(settings.profile_order, n)?;
    let profile = assemble_profile(map, &profile_quad)?;
    let delta_chain = profile.psi_functional(k);
    let delta_literal = profile.psi_functional(n - k + 1);
    let root = eps.sqrt();
    let c = settings.c_cert;

    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    let push_gap = pushforward
        .iter()
        .map(|p| p.mean_gap.max(p.square_gap))
        .fold(0.0, f64::max);
    let stages = vec![
        StageCheck::new(
            "pushforward",
            push_gap,
            provenance.push_tolerance().max(1e-6),
        ),
        StageCheck::new("gradient-defect", max(&defects), 2.0 * eps + floor),
        StageCheck::new("gram-residual", gram_residual, c * root + floor),
        StageCheck::new("high-frequency", max(&high_frequency), eps + hf_tol),
        StageCheck::new("sobolev-remainder", max(&z_norms), 3.0 * (eps + hf_tol)),
        StageCheck::new("bessel", bessel, 1.0 + hf_tol),
        StageCheck::new("alignment", alignment, c * root + floor),
        StageCheck::new("delta-chain", delta_chain, c * root + floor),
    ];
    Ok(CertificateReport {
        k,
        degree,
        provenance: provenance.label(),
        epsilon: eps,
        dirichlet: nm.dirichlet.clone(),
        pushforward,
        gradient_defects: defects.clone(),
        gradient_gram: to_rows(&gram),
        gram_residual,
        high_frequency,
        z_norms,
        linear_parts,
        linear_gram: to_rows(&linear_gram),
        rotation: to_rows(&rotation),
        alignment,
        singular_ratio,
        delta_chain,
        delta_literal,
        ratio: (eps > 0.0).then(|| delta_chain / root),
        floor,
        c_cert: c,
        layer_cake: LayerCake {
            threshold,
            mass_above: above,
            chebyshev_bound: defects
                .iter()
                .map(|d| {
                    if threshold > 0.0 {
                        d / (threshold * threshold)
                    } else {
                        f64::INFINITY
                    }
                })
                .collect(),
        },
        stages,
    })
}

/// Runs the chain and fails with [`Error::CertificateFailure`] naming the
/// first stage that exceeds its limit.
pub fn certify_eigenvalue_chain(
    mu: &LogConcaveMeasure,
    map: &TransportMap,
    k: usize,
    degree: usize,
    settings: &CertificateSettings,
) -> Result<CertificateReport> {
    certificate_report(mu, map, k, degree, settings)?.into_result()
}

//! Tensor Hermite basis of `L²(γₙ)`, Galerkin estimates of the Poincaré
//! constant of `μ`, and the chain that turns near-minimizers of the
//! Poincaré quotient into a bound on the eigenvalues of `D²ψ`.

mod basis;
mod certificate;
mod galerkin;

pub use basis::{
    expand, hermite_1d, hermite_eval, index_key, multi_indices, HermiteExpansion, MultiIndex,
    MAX_ABS_COORDINATE, MAX_TOTAL_DEGREE,
};
pub use certificate::{
    certificate_report, certify_eigenvalue_chain, matrix_inequality_excess, pullback,
    pullback_order, CertificateReport, CertificateSettings, LayerCake, Pullback, PushforwardCheck,
    StageCheck,
};
pub use galerkin::{
    max_degree, near_minimizers, poincare_galerkin, GalerkinSettings, NearMinimizers,
    SpectralResult,
};

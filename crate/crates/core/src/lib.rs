//! Numerical laboratory for Brenier maps from the standard Gaussian to
//! 1-log-concave measures.
//!
//! The crate computes transport maps (exact in 1D, entropic in 2D–4D),
//! their Hessian eigenvalue profiles, Wasserstein-1 distances, Hermite
//! expansions and Galerkin Poincaré constants, and uses them to check the
//! contraction, rigidity and stability properties of such maps.
//!
//! Module map:
//! - [`numerics`]: quadrature, eigensolvers, monotone interpolation.
//! - [`measures`]: potentials, normalization, CDFs, marginals, grids.
//! - [`transport`]: Brenier maps, eigenvalue profiles, contraction defect.
//! - [`wasserstein`]: exact 1D and discrete W1, map-based bounds.
//! - [`hermite`]: Hermite basis, Galerkin spectral gap, certificate chain.
//! - [`splitting`]: Gaussian-factor detection and split candidates.

pub mod error;
pub mod hermite;
pub mod measures;
pub mod numerics;
pub mod splitting;
pub mod transport;
pub mod wasserstein;

pub use error::{Error, Result};

/// Library version embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

//! Brenier maps `T = ∇φ` from the standard Gaussian, their Hessian
//! eigenvalue profiles and the contraction defect.

mod brenier1d;
mod map;
mod profile;
mod sinkhorn;

pub use brenier1d::{brenier_1d, exact_product_map, KNOT_COUNT, KNOT_SPAN};
pub use map::{Derivative, MapRepr, MapTable, Monotone1d, Provenance, TransportMap};
pub use profile::{
    assemble_profile, contraction_defect, eigen_profile, epsilon_hypothesis, richardson,
    DebiasedFunctionals, EigenvalueProfile, ProfileSummary, PLAUSIBLE_RANGE,
};
pub use sinkhorn::{
    entropic_grids, entropic_map, entropic_transport, EntropicMap, EntropicSettings, HessianMethod,
    SinkhornReport,
};

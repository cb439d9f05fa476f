//! Gaussian-factor detection and split candidates.
//!
//! A profile whose top `k` averaged eigenvalues are (close to) one signals
//! `k` Gaussian directions. [`align_rotation`] turns those directions into
//! the first `k` axes, [`build_candidate`] forms `ν = γ_{p,k} ⊗ μ₂` from the
//! rotated measure and its marginal, and [`stability_curve`] tracks
//! `(ε, W1(μ, ν))` along a parameterized family.

mod candidate;
mod curve;
mod detect;

pub use candidate::{
    build_candidate, CandidateSettings, GapMethod, SplitCandidate, ROTATION_TOLERANCE,
};
pub use curve::{
    stability_curve, CurvePoint, CurveSettings, MapMethod, PointFailure, StabilityCurve,
};
pub use detect::{align_rotation, detect_factors, Directions, MIN_SINGULAR_RATIO};

//! 1-log-concave probability measures `e^{−V} dx` given by potentials.
//!
//! Potentials may be supplied unnormalized; the log of the normalizing
//! constant is always computed internally and exposed as `log_z`.

mod cdf;
mod grid;
mod measure;
mod potential;

pub use cdf::{cdf_1d, Cdf1d};
pub use grid::{default_axes, marginal, marginal_on, Axis, GridDensity};
pub use measure::{
    check_one_log_concavity, normalize, GaussianMeasure, LogConcaveMeasure, MeasureSettings,
};
pub use potential::{Factor, Family, Potential, RidgeProfile};

pub(crate) use grid::for_each_index;

//! `W1` distances: exact in 1D, exact transportation LP on clouds, and the
//! upper bound given by a transport map.

mod cloud;
mod distance;
mod simplex;

pub use cloud::{DiscreteCloud, MAX_ATOMS};
pub use distance::{
    w1_discrete, w1_exact_1d, w1_exact_1d_report, w1_from_map, AtomicLaw, CouplingPlan, Exact1d,
    Law1d, PlanEntry,
};
pub use simplex::{transport_simplex, SimplexSolution};

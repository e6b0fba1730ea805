//! Quadrature, root finding, and the Monte Carlo oracle.

mod montecarlo;
mod quadrature;
mod roots;

pub use montecarlo::{mc_estimate, McConfig, McEstimate, ZSampler, MIN_REPS};
pub use quadrature::{
    integrate_lower_set, integrate_region, lower_set_difference, GaussLegendre, LowerSet,
    QuadratureConfig,
};
pub use roots::{bisect, illinois};

pub(crate) use quadrature::{
    lower_set_probability_fixed, LowerSetLayout, Z_SPAN,
};

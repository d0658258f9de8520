//! Injection models and second moments of voltage deviations.

mod analytic;
mod empirical;
mod model;
mod sampling;

pub use analytic::{
    analytic_moments, analytic_sigma_eps, analytic_sigma_eps_dc, analytic_sigma_theta,
    analytic_sigma_theta_eps, expected_sq_diff_dc, expected_sq_diff_lc, verify_moment_ordering,
    OrderingViolation,
};
pub use empirical::{empirical_moments, MomentAccumulator, MomentSet, Provenance, VoltageSamples};
pub use model::{CorrelationScope, InjectionModel, ModelSpec, MomentKind, PositivityViolation};
pub use sampling::{derive_seed, sample_injections, GaussianSampler, InjectionSampler};

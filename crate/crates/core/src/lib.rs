//! Data-driven Bell inequalities.
//!
//! Given coincidence counts from a bipartite Bell experiment, this crate
//! searches for the Bell functional maximizing the error-adjusted gap
//! between the observed value and the local-hidden-variable bound, decides
//! whether the data is nonlocal at all, and computes the detector
//! efficiencies needed to close the detection loophole.

pub mod error;
pub mod lhv;
pub mod loophole;
pub mod model;
pub mod optimize;
pub mod quantum;
pub mod stats;

pub use error::{Error, Result};
pub use lhv::{lhv_bound, lhv_subgradient, strategy_behavior, DeterministicStrategy, LhvResult};
pub use loophole::{
    canonical_lhv_bound, canonicalize, critical_efficiency, CanonicalFunctional, EfficiencyMode, EfficiencyResult,
};
pub use model::{Behavior, BellFunctional, Marginals, NsResidual, Scenario};
pub use quantum::{born_behavior, tilted_functional, tilted_realization, TiltedRealization};
pub use stats::{error_propagation, frequencies, kl_divergence, ns_project, poisson_sample, CountTable, ErrorReport};

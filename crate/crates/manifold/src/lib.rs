//! Exact projection and proximal maps on a sphere, the PGD and HQS
//! iterations of manifold-prior inverse problems built from them, and a
//! Lipschitz-growth experiment over paired tangent-perturbed datasets.
//!
//! The sphere stands in for a learned data manifold: its reach equals its
//! radius and every map the iterations need is closed-form, so contraction
//! bounds and fixed points can be verified instead of trained for.

pub mod growth;
pub mod inverse;
pub mod sphere;

pub use growth::{lipschitz_growth_experiment, GrowthAlg, GrowthConfig, GrowthResult};
pub use inverse::{
    hqs_objective, hqs_op, hqs_stationarity, hqs_y_block, pgd_objective, pgd_op,
    pgd_stationarity, HqsOp, InverseProblem, PgdOp,
};
pub use sphere::{prox_residual_lipschitz, sample_tube, SphereManifold};

//! Constructive regular operators for scalar targets with singular sets.
//!
//! Given a target `F` on a union of closed intervals that stays away from a
//! finite singular set `D`, this crate builds a contraction factor
//! `eps(x)` from the distance to `D` and wraps `F` into the implicit operator
//!
//! ```text
//! G(y, x) = F(x) + (1 - eps(x)) * (y - F(x))
//! ```
//!
//! whose unique fixed point in `y` is `F(x)`, with contraction modulus
//! `1 - eps(x)` strictly below 1 on the domain. The pipeline:
//!
//! 1. grid the domain, estimate `sup |F'|` and `sup |F|` over the points at
//!    distance `>= r` from `D` (the "safe" set at radius `r`),
//! 2. squash those suprema into a rate `h_hat(r) = 1 / (h1 + h2 + 1)`,
//! 3. integrate `h_hat` into a nondecreasing, 1-Lipschitz `eps_hat(r)`,
//! 4. set `eps(x) = u / (1 + u)` with `u = eps_hat(d(x, D))`.
//!
//! [`reciprocal_op`] and [`naive_op`] are tiny hand-written operators used as
//! measurement baselines next to the constructed one.

pub mod operator;
pub mod profile;
pub mod target;

pub use operator::{naive_op, reciprocal_op, NaiveOp, ReciprocalOp, RegularOperator1D};
pub use profile::{build_profile, EpsilonProfile};
pub use target::Target1D;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RegularError {
    /// The target returned a non-finite value at a domain grid point.
    #[error("target is non-finite at x = {x}")]
    NonFiniteTarget { x: f64 },
    /// No grid points landed in the domain, so no supremum is defined at any
    /// radius.
    #[error("domain grid is empty")]
    EmptyGrid,
    /// The query point lies outside the target domain (and, for `epsilon`,
    /// outside the singular set too).
    #[error("x = {x} lies outside the operator domain")]
    OutsideDomain { x: f64 },
}

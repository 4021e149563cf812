//! Shared numerical foundation for the fixed-point laboratory.
//!
//! Three modules:
//!
//! * [`numerics`]: row-major dense matrices, a splitmix64-backed generator,
//!   and the Adam optimizer. All reductions run left to right so that equal
//!   inputs give bit-identical outputs.
//! * [`fixpoint`]: Picard and Anderson fixed-point solvers over any operator
//!   `G(y, x)`, full iterate traces, and sampled contraction-modulus
//!   estimation.
//! * [`lipschitz`]: empirical Lipschitz, relative-error, and PSNR curves over
//!   paired original/perturbed datasets.

pub mod fixpoint;
pub mod lipschitz;
pub mod numerics;

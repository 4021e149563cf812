//! Linear programs as ground truth: random instance generation, conversion
//! of the general bounded form to standard form, a revised-simplex solver
//! with KKT and regularity certificates, block perturbations, and a
//! brute-force vertex oracle for cross-checking small instances.
//!
//! The general form is
//!
//! ```text
//! min c'y   s.t.  A_p y = b_p,  A_q y <= b_q,  l <= y <= u
//! ```
//!
//! and the standard form stacks `(y - l, b_q - A_q y, u - y)` into one
//! nonnegative variable vector (see [`to_standard_form`]).

pub mod certify;
pub mod instance;
pub mod oracle;
pub mod simplex;
pub mod standard;

pub use certify::{check_kkt, regularity_cert, KktReport, RegularityCert};
pub use instance::{
    generate_instance, generate_instance_with, load_instance, perturb_instance, save_instance,
    LpInstance, PerturbBlock, Relation,
};
pub use oracle::{brute_force_solve, BruteForceResult};
pub use simplex::{is_feasible, load_solution, save_solution, solve_simplex, LpSolution, LpStatus};
pub use standard::{decode_solution, to_standard_form, StandardLp, VarMap};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("basis matrix is numerically singular at iteration {iteration}")]
    SingularBasis { iteration: usize },
    #[error("simplex exceeded {0} iterations")]
    IterationLimit(usize),
    #[error("cannot perturb A: instance stores no nonzeros")]
    EmptyPattern,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

//! Optimality certificates. The checker rebuilds the standard system from
//! the instance itself rather than trusting whatever the solver held, so a
//! stale or tampered solution cannot slip through.

use crate::instance::LpInstance;
use crate::simplex::{LpSolution, LpStatus};
use crate::standard::to_standard_form;

/// Default margin for the regularity flags.
pub const REGULARITY_THRESHOLD: f64 = 1e-8;

/// Residuals of the first-order conditions at a claimed optimum, each an
/// infinity norm over its block.
#[derive(Debug, Clone, Copy)]
pub struct KktReport {
    /// `max_i |(A x - b)_i|`
    pub primal: f64,
    /// `max_j |(c - A'z - s)_j|`
    pub dual: f64,
    /// `max_j |x_j s_j|`
    pub complementarity: f64,
    /// worst negative part of `x`
    pub primal_sign: f64,
    /// worst negative part of `s`
    pub dual_sign: f64,
    pub max_residual: f64,
}

impl KktReport {
    pub fn pass(&self, tol: f64) -> bool {
        self.max_residual <= tol
    }
}

/// Measures how far `sol` is from satisfying the optimality system of
/// `inst`. Panics unless the solution claims optimality.
pub fn check_kkt(inst: &LpInstance, sol: &LpSolution) -> KktReport {
    assert_eq!(sol.status, LpStatus::Optimal, "KKT check needs a claimed optimum");
    let std = to_standard_form(inst);
    let rows = std.rows();
    let cols = std.cols();
    assert_eq!(sol.x_std.len(), cols, "solution shape does not match the instance");
    assert_eq!(sol.z.len(), rows);
    assert_eq!(sol.s.len(), cols);

    let mut primal = 0.0f64;
    for i in 0..rows {
        let mut ax = 0.0;
        for j in 0..cols {
            ax += std.a.get(i, j) * sol.x_std[j];
        }
        primal = primal.max((ax - std.b[i]).abs());
    }

    let mut dual = 0.0f64;
    let mut complementarity = 0.0f64;
    let mut primal_sign = 0.0f64;
    let mut dual_sign = 0.0f64;
    for j in 0..cols {
        let mut atz = 0.0;
        for i in 0..rows {
            atz += std.a.get(i, j) * sol.z[i];
        }
        dual = dual.max((std.c[j] - atz - sol.s[j]).abs());
        complementarity = complementarity.max((sol.x_std[j] * sol.s[j]).abs());
        primal_sign = primal_sign.max(-sol.x_std[j]);
        dual_sign = dual_sign.max(-sol.s[j]);
    }

    let max_residual = primal
        .max(dual)
        .max(complementarity)
        .max(primal_sign)
        .max(dual_sign);
    KktReport { primal, dual, complementarity, primal_sign, dual_sign, max_residual }
}

/// The two strictness flags that make an optimal basis well behaved: no
/// basic variable sitting at zero, no nonbasic reduced cost at zero.
#[derive(Debug, Clone, Copy)]
pub struct RegularityCert {
    pub nondegenerate: bool,
    pub strictly_complementary: bool,
    /// smallest basic primal value
    pub min_basic_primal: f64,
    /// smallest nonbasic dual slack
    pub min_nonbasic_dual: f64,
    pub threshold: f64,
}

impl RegularityCert {
    pub fn holds(&self) -> bool {
        self.nondegenerate && self.strictly_complementary
    }
}

/// Classifies an optimal basis. Values strictly above `threshold` count as
/// nonzero.
pub fn regularity_cert(sol: &LpSolution, threshold: f64) -> RegularityCert {
    assert_eq!(sol.status, LpStatus::Optimal, "certificate needs a claimed optimum");
    assert!(threshold > 0.0);
    let mut min_basic_primal = f64::INFINITY;
    for &j in &sol.basis {
        min_basic_primal = min_basic_primal.min(sol.x_std[j]);
    }
    let mut min_nonbasic_dual = f64::INFINITY;
    for j in 0..sol.s.len() {
        if !sol.basis.contains(&j) {
            min_nonbasic_dual = min_nonbasic_dual.min(sol.s[j]);
        }
    }
    RegularityCert {
        nondegenerate: min_basic_primal > threshold,
        strictly_complementary: min_nonbasic_dual > threshold,
        min_basic_primal,
        min_nonbasic_dual,
        threshold,
    }
}

//! Exhaustive vertex enumeration for tiny instances. Every candidate basis
//! is a square system of n active constraints: all equality rows plus a
//! subset of inequality rows and bound faces. With finite bounds on every
//! variable the feasible set is a polytope, so it is nonempty exactly when
//! some vertex survives the feasibility check, and the optimum (when one
//! exists) is attained at a vertex.
//!
//! Cost grows as choose(q + 2n, n - p) linear solves; the guard below keeps
//! that in the thousands.

use fixlab_core::numerics::{self, Matrix, Vector};

use crate::instance::{LpInstance, Relation};
use crate::simplex::LpStatus;

/// A vertex may violate a constraint by this much and still count.
pub const ORACLE_FEAS_TOL: f64 = 1e-9;

/// Largest variable count the enumeration will accept.
pub const ORACLE_MAX_N: usize = 8;

#[derive(Debug, Clone)]
pub struct BruteForceResult {
    pub status: LpStatus,
    /// Minimizing vertex; empty when infeasible.
    pub y: Vector,
    pub objective: f64,
}

/// Visits every k-subset of `0..n` in lexicographic order.
fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    if k == 0 {
        f(&[]);
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + (i - 1) {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Minimizes by checking every vertex candidate. Finite bounds rule out
/// unbounded rays, so the status is `Optimal` or `Infeasible`.
pub fn brute_force_solve(inst: &LpInstance) -> BruteForceResult {
    inst.validate();
    let n = inst.n;
    let p = inst.p();
    assert!(n <= ORACLE_MAX_N, "enumeration is limited to {ORACLE_MAX_N} variables");
    assert!(p <= n, "more equalities than variables is outside the oracle's scope");

    let mut dense: Vec<Vector> = vec![vec![0.0; n]; inst.m];
    for &(i, j, v) in &inst.a {
        dense[i][j] = v;
    }

    // active-when-tight faces: each is (normal, rhs)
    let mut mandatory: Vec<(&[f64], f64)> = Vec::new();
    let mut optional: Vec<(Vector, f64)> = Vec::new();
    for i in 0..inst.m {
        match inst.circ[i] {
            Relation::Eq => mandatory.push((&dense[i], inst.b[i])),
            Relation::Le => optional.push((dense[i].clone(), inst.b[i])),
        }
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        optional.push((e.clone(), inst.l[j]));
        optional.push((e, inst.u[j]));
    }

    let mut best: Option<(f64, Vector)> = None;
    for_each_combination(optional.len(), n - p, |chosen| {
        let mut rows = Matrix::zeros(n, n);
        let mut rhs = vec![0.0; n];
        for (r, &(normal, b)) in mandatory.iter().enumerate() {
            for j in 0..n {
                rows.set(r, j, normal[j]);
            }
            rhs[r] = b;
        }
        for (k, &c) in chosen.iter().enumerate() {
            let (normal, b) = &optional[c];
            for j in 0..n {
                rows.set(p + k, j, normal[j]);
            }
            rhs[p + k] = *b;
        }
        let Ok(y) = numerics::solve_linear(&rows, &rhs) else {
            return; // dependent active set, not a vertex
        };
        if inst.constraint_violation(&y) > ORACLE_FEAS_TOL {
            return;
        }
        let obj = inst.objective(&y);
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, y));
        }
    });

    match best {
        Some((objective, y)) => BruteForceResult { status: LpStatus::Optimal, y, objective },
        None => BruteForceResult {
            status: LpStatus::Infeasible,
            y: Vec::new(),
            objective: f64::NAN,
        },
    }
}

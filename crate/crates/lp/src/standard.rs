//! General form to standard form: substitute `(y - l, b_q - A_q y, u - y)`
//! and stack the block system, dropping linearly dependent equality rows
//! first so the row rank assumption holds downstream.

use fixlab_core::numerics::{Matrix, Vector};

use crate::instance::{LpInstance, Relation};

/// Pivot threshold for the rank-revealing pass over the equality rows.
const PIVOT_TOL: f64 = 1e-10;
/// A dependent equality row whose reduced right-hand side exceeds this is an
/// inconsistency: the instance is infeasible.
const CONSISTENCY_TOL: f64 = 1e-8;

/// How standard-form columns and rows map back to the original instance.
#[derive(Debug, Clone)]
pub struct VarMap {
    pub n: usize,
    pub q: usize,
    /// Original equality-row indices kept after redundancy removal, in order.
    pub kept_eq: Vec<usize>,
    /// Original inequality-row indices, in order.
    pub ineq_rows: Vec<usize>,
    /// Lower bounds; the primal decode is `y = y_hat + l`.
    pub l: Vector,
}

/// `min c'x  s.t. A x = b, x >= 0` over the stacked variable
/// `x = (y - l, slack, u - y)`.
#[derive(Debug, Clone)]
pub struct StandardLp {
    pub a: Matrix,
    pub b: Vector,
    pub c: Vector,
    pub var_map: VarMap,
    /// Constant restoring the general objective: `c'y = c'x + obj_offset`.
    pub obj_offset: f64,
    /// Set when a dependent equality row contradicts the kept rows; the
    /// instance is infeasible and the solver short-circuits.
    pub inconsistent: bool,
}

impl StandardLp {
    pub fn rows(&self) -> usize {
        self.a.rows
    }
    pub fn cols(&self) -> usize {
        self.a.cols
    }
}

/// Builds the standard form. Columns are `y_hat` (n), inequality slacks (q),
/// bound slacks (n); rows are kept equalities, inequalities, bounds.
pub fn to_standard_form(inst: &LpInstance) -> StandardLp {
    inst.validate();
    let n = inst.n;
    let eq_rows: Vec<usize> =
        (0..inst.m).filter(|&i| inst.circ[i] == Relation::Eq).collect();
    let ineq_rows: Vec<usize> =
        (0..inst.m).filter(|&i| inst.circ[i] == Relation::Le).collect();
    let q = ineq_rows.len();

    // dense copies of the equality rows for the rank-revealing pass
    let al = inst.apply_a(&inst.l);
    let mut kept_eq = Vec::new();
    let mut pivots: Vec<(usize, Vec<f64>)> = Vec::new(); // (pivot col, reduced row | rhs)
    let mut inconsistent = false;
    for &r in &eq_rows {
        let mut row = vec![0.0; n + 1];
        for &(i, j, v) in &inst.a {
            if i == r {
                row[j] = v;
            }
        }
        row[n] = inst.b[r] - al[r];
        for (pc, prow) in &pivots {
            let factor = row[*pc];
            if factor != 0.0 {
                for j in 0..=n {
                    row[j] -= factor * prow[j];
                }
            }
        }
        let (mut pc, mut best) = (0usize, 0.0f64);
        for (j, v) in row[..n].iter().enumerate() {
            if v.abs() > best {
                best = v.abs();
                pc = j;
            }
        }
        if best > PIVOT_TOL {
            let inv = 1.0 / row[pc];
            for v in row.iter_mut() {
                *v *= inv;
            }
            pivots.push((pc, row));
            kept_eq.push(r);
        } else if row[n].abs() > CONSISTENCY_TOL {
            inconsistent = true;
        }
    }

    let p = kept_eq.len();
    let rows = p + q + n;
    let cols = n + q + n;
    let mut a = Matrix::zeros(rows, cols);
    let mut b = vec![0.0; rows];

    let mut row_of: Vec<Option<usize>> = vec![None; inst.m];
    for (k, &r) in kept_eq.iter().enumerate() {
        row_of[r] = Some(k);
        b[k] = inst.b[r] - al[r];
    }
    for (k, &r) in ineq_rows.iter().enumerate() {
        row_of[r] = Some(p + k);
        b[p + k] = inst.b[r] - al[r];
        a.set(p + k, n + k, 1.0);
    }
    for &(i, j, v) in &inst.a {
        if let Some(si) = row_of[i] {
            a.set(si, j, v);
        }
    }
    for j in 0..n {
        a.set(p + q + j, j, 1.0);
        a.set(p + q + j, n + q + j, 1.0);
        b[p + q + j] = inst.u[j] - inst.l[j];
    }

    let mut c = vec![0.0; cols];
    c[..n].copy_from_slice(&inst.c);
    let obj_offset = inst.objective(&inst.l);

    StandardLp {
        a,
        b,
        c,
        var_map: VarMap { n, q, kept_eq, ineq_rows, l: inst.l.clone() },
        obj_offset,
        inconsistent,
    }
}

/// Recovers the general-form point from a standard-form one: `y = x[..n] + l`.
/// Slack blocks are discarded.
pub fn decode_solution(std: &StandardLp, x: &[f64]) -> Vector {
    assert_eq!(x.len(), std.cols());
    let vm = &std.var_map;
    (0..vm.n).map(|j| x[j] + vm.l[j]).collect()
}

/// Inverse of [`decode_solution`] for feasible points: stacks
/// `(y - l, b_q - A_q y, u - y)`.
pub fn encode_point(std: &StandardLp, inst: &LpInstance, y: &[f64]) -> Vector {
    let vm = &std.var_map;
    assert_eq!(y.len(), vm.n);
    let ay = inst.apply_a(y);
    let mut x = vec![0.0; std.cols()];
    for j in 0..vm.n {
        x[j] = y[j] - vm.l[j];
        x[vm.n + vm.q + j] = inst.u[j] - y[j];
    }
    for (k, &r) in vm.ineq_rows.iter().enumerate() {
        x[vm.n + k] = inst.b[r] - ay[r];
    }
    x
}

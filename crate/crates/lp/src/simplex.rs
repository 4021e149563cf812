//! Two-phase revised simplex with Bland's rule. The basis inverse is kept
//! explicitly and maintained by rank-1 eta updates, with a full
//! refactorization every few dozen pivots to keep drift in check.

use std::path::Path;

use fixlab_core::numerics::{self, Matrix, Vector};
use serde::{Deserialize, Serialize};

use crate::standard::{decode_solution, StandardLp};
use crate::LpError;

/// A reduced cost must fall below `-ENTERING_TOL` to enter the basis.
pub const ENTERING_TOL: f64 = 1e-9;
/// Direction entries at or below this cannot host a pivot.
const RATIO_TOL: f64 = 1e-9;
/// Residual artificial mass above this after phase 1 means infeasible.
const PHASE1_TOL: f64 = 1e-7;
/// Pivots between full refactorizations of the basis inverse.
const REFRESH_EVERY: usize = 64;
const MAX_ITERS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl LpStatus {
    pub fn label(self) -> &'static str {
        match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
        }
    }
}

/// Solver output. For non-optimal statuses the vectors are empty.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// General-form primal, `x[..n] + l`.
    pub y: Vector,
    /// Standard-form primal.
    pub x_std: Vector,
    /// Row duals of the standard system.
    pub z: Vector,
    /// Dual slacks `c - A'z` over standard columns.
    pub s: Vector,
    /// Basic column indices, one per row.
    pub basis: Vec<usize>,
    /// General-form objective `c'y`.
    pub objective: f64,
}

/// Working state: real columns live in `std.a`; column `n_real + i` is the
/// artificial for row `i`, a signed unit vector.
struct Tableau<'a> {
    a: &'a Matrix,
    b: &'a [f64],
    m: usize,
    n_real: usize,
    art_sign: Vec<f64>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    binv: Matrix,
    pivots_since_refresh: usize,
    iterations: usize,
}

enum StepOutcome {
    Optimal,
    Unbounded,
}

impl<'a> Tableau<'a> {
    /// Starts from an all-identity basis: bound and slack columns where the
    /// right-hand side allows it, signed artificials elsewhere.
    fn new(std: &'a StandardLp) -> Self {
        let m = std.rows();
        let n_real = std.cols();
        let vm = &std.var_map;
        let p = vm.kept_eq.len();
        let mut art_sign = vec![1.0; m];
        let mut basis = Vec::with_capacity(m);
        let mut in_basis = vec![false; n_real + m];
        let mut binv = Matrix::zeros(m, m);
        for i in 0..m {
            // slack column for inequality rows, bound slack for bound rows;
            // both are plain unit columns, usable whenever b[i] >= 0
            let unit_col = if i >= p && i < p + vm.q {
                Some(vm.n + (i - p))
            } else if i >= p + vm.q {
                Some(vm.n + vm.q + (i - p - vm.q))
            } else {
                None
            };
            match unit_col {
                Some(j) if std.b[i] >= 0.0 => {
                    basis.push(j);
                    binv.set(i, i, 1.0);
                }
                _ => {
                    let sign = if std.b[i] >= 0.0 { 1.0 } else { -1.0 };
                    art_sign[i] = sign;
                    basis.push(n_real + i);
                    binv.set(i, i, sign);
                }
            }
            in_basis[basis[i]] = true;
        }
        Tableau {
            a: &std.a,
            b: &std.b,
            m,
            n_real,
            art_sign,
            basis,
            in_basis,
            binv,
            pivots_since_refresh: 0,
            iterations: 0,
        }
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.n_real
    }

    /// `binv * A_j` for a real or artificial column.
    fn direction(&self, j: usize) -> Vector {
        let mut d = vec![0.0; self.m];
        if self.is_artificial(j) {
            let row = j - self.n_real;
            let s = self.art_sign[row];
            for i in 0..self.m {
                d[i] = s * self.binv.get(i, row);
            }
        } else {
            for i in 0..self.m {
                let mut acc = 0.0;
                for k in 0..self.m {
                    acc += self.binv.get(i, k) * self.a.get(k, j);
                }
                d[i] = acc;
            }
        }
        d
    }

    fn basic_values(&self) -> Vector {
        numerics::gemv(&self.binv, self.b)
    }

    /// Row duals `binv' * c_B` for the cost vector `(c_real, c_art)`.
    fn duals(&self, c_real: &[f64], c_art: f64) -> Vector {
        let mut z = vec![0.0; self.m];
        for i in 0..self.m {
            let cb = if self.is_artificial(self.basis[i]) {
                c_art
            } else {
                c_real[self.basis[i]]
            };
            if cb != 0.0 {
                for k in 0..self.m {
                    z[k] += cb * self.binv.get(i, k);
                }
            }
        }
        z
    }

    fn reduced_cost(&self, j: usize, c_real: &[f64], z: &[f64]) -> f64 {
        let mut s = c_real[j];
        for i in 0..self.m {
            s -= z[i] * self.a.get(i, j);
        }
        s
    }

    /// Replaces the basic variable at `row` with column `j` and updates the
    /// inverse by the standard eta transform.
    fn pivot(&mut self, row: usize, j: usize, d: &[f64]) -> Result<(), LpError> {
        let out = self.basis[row];
        self.in_basis[out] = false;
        self.in_basis[j] = true;
        self.basis[row] = j;
        let dr = d[row];
        for k in 0..self.m {
            let v = self.binv.get(row, k) / dr;
            self.binv.set(row, k, v);
        }
        for i in 0..self.m {
            if i != row && d[i] != 0.0 {
                let f = d[i];
                for k in 0..self.m {
                    let v = self.binv.get(i, k) - f * self.binv.get(row, k);
                    self.binv.set(i, k, v);
                }
            }
        }
        self.pivots_since_refresh += 1;
        if self.pivots_since_refresh >= REFRESH_EVERY {
            self.refactor()?;
        }
        Ok(())
    }

    /// Rebuilds `binv` from the basis columns.
    fn refactor(&mut self) -> Result<(), LpError> {
        let mut bmat = Matrix::zeros(self.m, self.m);
        for (i, &j) in self.basis.iter().enumerate() {
            if self.is_artificial(j) {
                let row = j - self.n_real;
                bmat.set(row, i, self.art_sign[row]);
            } else {
                for r in 0..self.m {
                    bmat.set(r, i, self.a.get(r, j));
                }
            }
        }
        self.binv = numerics::invert(&bmat)
            .map_err(|_| LpError::SingularBasis { iteration: self.iterations })?;
        self.pivots_since_refresh = 0;
        Ok(())
    }

    /// Runs Bland pivots until no real column prices out negative. Only real
    /// columns may enter; artificials may only leave.
    fn run(&mut self, c_real: &[f64], c_art: f64) -> Result<StepOutcome, LpError> {
        loop {
            self.iterations += 1;
            if self.iterations > MAX_ITERS {
                return Err(LpError::IterationLimit(MAX_ITERS));
            }
            let z = self.duals(c_real, c_art);
            let mut entering = None;
            for j in 0..self.n_real {
                if !self.in_basis[j] && self.reduced_cost(j, c_real, &z) < -ENTERING_TOL {
                    entering = Some(j);
                    break; // Bland: lowest eligible index
                }
            }
            let Some(j) = entering else {
                return Ok(StepOutcome::Optimal);
            };
            let d = self.direction(j);
            let xb = self.basic_values();
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                if d[i] > RATIO_TOL {
                    let ratio = xb[i].max(0.0) / d[i];
                    let better = match leave {
                        None => true,
                        // Bland again: break ratio ties on the smallest
                        // basic index
                        Some((li, lr)) => {
                            ratio < lr - 1e-12
                                || (ratio <= lr + 1e-12 && self.basis[i] < self.basis[li])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((row, _)) = leave else {
                return Ok(StepOutcome::Unbounded);
            };
            self.pivot(row, j, &d)?;
        }
    }

    /// After a zero-mass phase 1, swaps any basic artificial for a real
    /// column with a usable pivot in its row.
    fn evict_artificials(&mut self) -> Result<(), LpError> {
        for row in 0..self.m {
            if !self.is_artificial(self.basis[row]) {
                continue;
            }
            let mut swapped = false;
            for j in 0..self.n_real {
                if self.in_basis[j] {
                    continue;
                }
                let d = self.direction(j);
                if d[row].abs() > RATIO_TOL {
                    self.pivot(row, j, &d)?;
                    swapped = true;
                    break;
                }
            }
            if !swapped {
                // a full-rank system always offers a pivot; reaching this
                // means the inverse has degraded beyond use
                return Err(LpError::SingularBasis { iteration: self.iterations });
            }
        }
        Ok(())
    }

    fn phase1_value(&self) -> f64 {
        let xb = self.basic_values();
        let mut v = 0.0;
        for i in 0..self.m {
            if self.is_artificial(self.basis[i]) {
                v += xb[i].max(0.0);
            }
        }
        v
    }
}

fn run_phase1(std: &StandardLp) -> Result<(Tableau<'_>, bool), LpError> {
    let mut t = Tableau::new(std);
    let zeros = vec![0.0; std.cols()];
    match t.run(&zeros, 1.0)? {
        StepOutcome::Optimal => {}
        // the phase-1 objective is bounded below by zero, so an unbounded
        // ray is a numerical breakdown, not a real certificate
        StepOutcome::Unbounded => {
            return Err(LpError::SingularBasis { iteration: t.iterations })
        }
    }
    let feasible = t.phase1_value() <= PHASE1_TOL;
    Ok((t, feasible))
}

/// Phase 1 only: artificial mass at optimum decides feasibility.
pub fn is_feasible(std: &StandardLp) -> Result<bool, LpError> {
    if std.inconsistent {
        return Ok(false);
    }
    run_phase1(std).map(|(_, f)| f)
}

fn empty_solution(status: LpStatus) -> LpSolution {
    LpSolution {
        status,
        y: Vec::new(),
        x_std: Vec::new(),
        z: Vec::new(),
        s: Vec::new(),
        basis: Vec::new(),
        objective: f64::NAN,
    }
}

/// Full solve: phase 1 for feasibility, artificial eviction, phase 2 on the
/// real costs. Returns `Optimal` with primal, duals, dual slacks and basis,
/// or one of the two failure statuses.
pub fn solve_simplex(std: &StandardLp) -> Result<LpSolution, LpError> {
    if std.inconsistent {
        return Ok(empty_solution(LpStatus::Infeasible));
    }
    let (mut t, feasible) = run_phase1(std)?;
    if !feasible {
        return Ok(empty_solution(LpStatus::Infeasible));
    }
    t.evict_artificials()?;
    match t.run(&std.c, 0.0)? {
        StepOutcome::Unbounded => return Ok(empty_solution(LpStatus::Unbounded)),
        StepOutcome::Optimal => {}
    }

    let xb = t.basic_values();
    let mut x_std = vec![0.0; std.cols()];
    for (i, &j) in t.basis.iter().enumerate() {
        assert!(!t.is_artificial(j), "artificial column survived eviction");
        x_std[j] = xb[i].max(0.0);
    }
    let z = t.duals(&std.c, 0.0);
    let s: Vector = (0..std.cols()).map(|j| t.reduced_cost(j, &std.c, &z)).collect();
    let y = decode_solution(std, &x_std);
    let std_obj: f64 = std.c.iter().zip(&x_std).map(|(a, b)| a * b).sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        y,
        x_std,
        z,
        s,
        basis: t.basis.clone(),
        objective: std_obj + std.obj_offset,
    })
}

#[derive(Serialize, Deserialize)]
struct SolutionJson {
    status: String,
    y: Vec<f64>,
    x_std: Vec<f64>,
    z: Vec<f64>,
    s: Vec<f64>,
    basis: Vec<usize>,
    objective: f64,
    kkt_residual: f64,
}

/// Writes a solution (plus its KKT residual) as JSON.
pub fn save_solution(path: &Path, sol: &LpSolution, kkt_residual: f64) -> Result<(), LpError> {
    let dto = SolutionJson {
        status: sol.status.label().to_string(),
        y: sol.y.clone(),
        x_std: sol.x_std.clone(),
        z: sol.z.clone(),
        s: sol.s.clone(),
        basis: sol.basis.clone(),
        objective: sol.objective,
        kkt_residual,
    };
    std::fs::write(path, serde_json::to_string(&dto)?)?;
    Ok(())
}

/// Reads a solution back; returns it with the recorded KKT residual.
pub fn load_solution(path: &Path) -> Result<(LpSolution, f64), LpError> {
    let dto: SolutionJson = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let status = match dto.status.as_str() {
        "optimal" => LpStatus::Optimal,
        "infeasible" => LpStatus::Infeasible,
        "unbounded" => LpStatus::Unbounded,
        other => panic!("unknown status tag {other:?}"),
    };
    Ok((
        LpSolution {
            status,
            y: dto.y,
            x_std: dto.x_std,
            z: dto.z,
            s: dto.s,
            basis: dto.basis,
            objective: dto.objective,
        },
        dto.kkt_residual,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{LpInstance, Relation};
    use crate::standard::{to_standard_form, VarMap};

    /// min x1 s.t. x1 + x2 = 1, x >= 0, given directly in standard form.
    fn direct_standard(a_rows: &[Vec<f64>], b: &[f64], c: &[f64]) -> StandardLp {
        let a = Matrix::from_rows(a_rows);
        let n = a.cols;
        StandardLp {
            b: b.to_vec(),
            c: c.to_vec(),
            var_map: VarMap {
                n,
                q: 0,
                kept_eq: Vec::new(),
                ineq_rows: Vec::new(),
                l: vec![0.0; n],
            },
            a,
            obj_offset: 0.0,
            inconsistent: false,
        }
    }

    #[test]
    fn trivial_standard_lp_solves_by_inspection() {
        let std = direct_standard(&[vec![1.0, 1.0]], &[1.0], &[1.0, 0.0]);
        let sol = solve_simplex(&std).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_eq!(sol.x_std, vec![0.0, 1.0]);
        assert_eq!(sol.objective, 0.0);
        assert_eq!(sol.z, vec![0.0]);
        assert_eq!(sol.s, vec![1.0, 0.0]);
        assert_eq!(sol.basis, vec![1]);
    }

    #[test]
    fn unbounded_ray_is_detected() {
        // min -x1 s.t. x1 - x2 = 0, x >= 0: the ray (t, t) drives the
        // objective down forever
        let std = direct_standard(&[vec![1.0, -1.0]], &[0.0], &[-1.0, 0.0]);
        let sol = solve_simplex(&std).unwrap();
        assert_eq!(sol.status, LpStatus::Unbounded);
    }

    #[test]
    fn infeasible_equalities_are_reported() {
        // x1 + x2 = -1 with x >= 0 has no solution
        let std = direct_standard(&[vec![1.0, 1.0]], &[-1.0], &[0.0, 0.0]);
        let sol = solve_simplex(&std).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
        assert!(!is_feasible(&std).unwrap());
    }

    #[test]
    fn knapsack_corner_is_found_through_the_general_form() {
        // min -2y1 - y2 s.t. y1 + y2 <= 1, 0 <= y <= 10: optimum (1, 0)
        let inst = LpInstance {
            n: 2,
            m: 1,
            a: vec![(0, 0, 1.0), (0, 1, 1.0)],
            b: vec![1.0],
            c: vec![-2.0, -1.0],
            circ: vec![Relation::Le],
            l: vec![0.0, 0.0],
            u: vec![10.0, 10.0],
        };
        let sol = solve_simplex(&to_standard_form(&inst)).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.y[0] - 1.0).abs() < 1e-9);
        assert!(sol.y[1].abs() < 1e-9);
        assert!((sol.objective + 2.0).abs() < 1e-9);
    }

    #[test]
    fn nonbasic_reduced_costs_stay_above_the_floor() {
        let mut rng = fixlab_core::numerics::Rng::new(41);
        let mut solved = 0;
        while solved < 10 {
            let inst = crate::instance::generate_instance(&mut rng);
            let std = to_standard_form(&inst);
            let sol = solve_simplex(&std).unwrap();
            if sol.status != LpStatus::Optimal {
                continue;
            }
            solved += 1;
            for (j, &sj) in sol.s.iter().enumerate() {
                if !sol.basis.contains(&j) {
                    assert!(sj >= -ENTERING_TOL, "column {j}: reduced cost {sj}");
                }
            }
        }
    }

    #[test]
    fn solution_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let std = direct_standard(&[vec![1.0, 1.0]], &[1.0], &[1.0, 0.0]);
        let sol = solve_simplex(&std).unwrap();
        let path = dir.path().join("sol.json");
        save_solution(&path, &sol, 3.5e-12).unwrap();
        let (back, kkt) = load_solution(&path).unwrap();
        assert_eq!(kkt, 3.5e-12);
        assert_eq!(back.status, LpStatus::Optimal);
        assert_eq!(back.x_std, sol.x_std);
        assert_eq!(back.basis, sol.basis);
    }
}

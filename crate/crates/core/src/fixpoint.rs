//! Fixed-point solvers over implicit operators `G(y, x)`.
//!
//! [`picard_solve`] is the plain iteration `y_t = G(y_{t-1}, x)`;
//! [`anderson_solve`] mixes the last few residual pairs through a regularized
//! least-squares extrapolation and falls back to the Picard step whenever
//! that system is singular. Both record every iterate, so downstream
//! measurement code can read curves off a single trace.

use crate::numerics::{self, Matrix, Rng, Vector};
use thiserror::Error;

/// An implicit operator `(y, x) -> G(y, x)` with fixed state and input
/// dimensions. The output length must equal `state_dim` for all valid inputs.
pub trait ImplicitOp {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn apply(&self, y: &[f64], x: &[f64]) -> Vector;
}

/// Closure-backed operator for tests and small experiments.
pub struct FnOp<F: Fn(&[f64], &[f64]) -> Vector> {
    state_dim: usize,
    input_dim: usize,
    f: F,
}

pub fn fn_op<F: Fn(&[f64], &[f64]) -> Vector>(state_dim: usize, input_dim: usize, f: F) -> FnOp<F> {
    FnOp { state_dim, input_dim, f }
}

impl<F: Fn(&[f64], &[f64]) -> Vector> ImplicitOp for FnOp<F> {
    fn state_dim(&self) -> usize {
        self.state_dim
    }
    fn input_dim(&self) -> usize {
        self.input_dim
    }
    fn apply(&self, y: &[f64], x: &[f64]) -> Vector {
        (self.f)(y, x)
    }
}

/// Stopping rule and Anderson parameters.
#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub max_iter: usize,
    /// Residual threshold on the Euclidean norm of `y_t - y_{t-1}`.
    pub tol: f64,
    /// History depth m; the mixing solve sees at most m difference pairs.
    pub anderson_depth: usize,
    /// Damping in (0, 1]; 1 is the undamped update.
    pub anderson_mixing: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig { max_iter: 1000, tol: 1e-10, anderson_depth: 5, anderson_mixing: 1.0 }
    }
}

/// Full record of one solve: iterates `y_0..y_T`, per-step residuals
/// `||y_t - y_{t-1}||`, and whether the tolerance was met.
#[derive(Debug, Clone)]
pub struct IterationTrace {
    pub iterates: Vec<Vector>,
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl IterationTrace {
    pub fn final_iterate(&self) -> &Vector {
        self.iterates.last().expect("trace holds at least y_0")
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("non-finite iterate at iteration {iteration} (operator is likely non-contractive)")]
    NonFinite { iteration: usize },
}

fn check_finite(y: &[f64], iteration: usize) -> Result<(), SolveError> {
    if numerics::all_finite(y) {
        Ok(())
    } else {
        Err(SolveError::NonFinite { iteration })
    }
}

/// Plain Picard iteration `y_t = G(y_{t-1}, x)`; stops at `tol` or
/// `max_iter`, recording every iterate.
pub fn picard_solve(
    op: &dyn ImplicitOp,
    x: &[f64],
    y0: &[f64],
    cfg: &SolveConfig,
) -> Result<IterationTrace, SolveError> {
    assert!(cfg.max_iter >= 1);
    assert!(cfg.tol > 0.0);
    let mut iterates = vec![y0.to_vec()];
    let mut residuals = Vec::new();
    let mut converged = false;
    for t in 1..=cfg.max_iter {
        let y = op.apply(iterates.last().unwrap(), x);
        check_finite(&y, t)?;
        let r = numerics::dist(&y, iterates.last().unwrap());
        iterates.push(y);
        residuals.push(r);
        if r <= cfg.tol {
            converged = true;
            break;
        }
    }
    let iterations = residuals.len();
    Ok(IterationTrace { iterates, residuals, converged, iterations })
}

/// Exactly `t_max` applications of the operator, convergence ignored.
/// The returned list `y_0..y_T` prefix-matches a `picard_solve` trace
/// bit-for-bit (both run the same single-step code).
pub fn iterate_exactly(
    op: &dyn ImplicitOp,
    x: &[f64],
    y0: &[f64],
    t_max: usize,
) -> Result<Vec<Vector>, SolveError> {
    let mut iterates = vec![y0.to_vec()];
    for t in 1..=t_max {
        let y = op.apply(iterates.last().unwrap(), x);
        check_finite(&y, t)?;
        iterates.push(y);
    }
    Ok(iterates)
}

/// Anderson acceleration with depth `m = cfg.anderson_depth` and mixing
/// `beta = cfg.anderson_mixing`.
///
/// At step k the residuals `f_i = G(y_i, x) - y_i` of the last `m+1`
/// iterates feed a least-squares system over their consecutive differences.
/// The normal equations are equilibrated by their largest diagonal entry and
/// get a `1e-10` ridge before solving; both steps keep the solve regular at
/// any residual magnitude (an absolute ridge or an unequilibrated solve
/// would turn the accelerator back into Picard precisely on slowly
/// contracting operators, where residuals sit below the `1e-5` scale). If
/// the solve still fails (or returns non-finite weights), the step falls
/// back to plain damped Picard, `y_{k+1} = y_k + beta * f_k`.
pub fn anderson_solve(
    op: &dyn ImplicitOp,
    x: &[f64],
    y0: &[f64],
    cfg: &SolveConfig,
) -> Result<IterationTrace, SolveError> {
    assert!(cfg.max_iter >= 1);
    assert!(cfg.tol > 0.0);
    assert!(cfg.anderson_depth >= 1, "anderson_depth must be at least 1");
    assert!(
        cfg.anderson_mixing > 0.0 && cfg.anderson_mixing <= 1.0,
        "anderson_mixing must lie in (0, 1]"
    );
    const REG: f64 = 1e-10;
    let beta = cfg.anderson_mixing;
    let dim = y0.len();

    let mut ys: Vec<Vector> = vec![y0.to_vec()];
    let mut fs: Vec<Vector> = Vec::new();
    let mut iterates = vec![y0.to_vec()];
    let mut residuals = Vec::new();
    let mut converged = false;

    for t in 1..=cfg.max_iter {
        let yk = ys.last().unwrap().clone();
        let gk = op.apply(&yk, x);
        check_finite(&gk, t)?;
        let fk = numerics::sub(&gk, &yk);
        fs.push(fk.clone());

        let k = fs.len() - 1; // number of stored residuals minus one
        let mk = k.min(cfg.anderson_depth);
        let mut y_next: Vector;
        if mk == 0 {
            y_next = yk.clone();
            numerics::axpy(&mut y_next, beta, &fk);
        } else {
            // Columns j = 0..mk: f and y differences over the retained window.
            let base = fs.len() - 1 - mk;
            let mut df = Matrix::zeros(dim, mk);
            let mut dy = Matrix::zeros(dim, mk);
            for j in 0..mk {
                for i in 0..dim {
                    df.set(i, j, fs[base + j + 1][i] - fs[base + j][i]);
                    dy.set(i, j, ys[base + j + 1][i] - ys[base + j][i]);
                }
            }
            // Normal equations (df' df + ridge I) gamma = df' f_k, with the
            // ridge scaled to the largest diagonal entry so the solve stays
            // regular at any residual magnitude.
            let mut ata = Matrix::zeros(mk, mk);
            let mut atb = vec![0.0; mk];
            let mut max_diag = 0.0_f64;
            for a in 0..mk {
                for b in 0..mk {
                    let mut s = 0.0;
                    for i in 0..dim {
                        s += df.get(i, a) * df.get(i, b);
                    }
                    ata.set(a, b, s);
                    if a == b {
                        max_diag = max_diag.max(s);
                    }
                }
                let mut s = 0.0;
                for i in 0..dim {
                    s += df.get(i, a) * fk[i];
                }
                atb[a] = s;
            }
            // Equilibrate by the largest diagonal entry: gamma is invariant
            // under scaling both sides, and the linear solver's pivot
            // threshold is absolute, so an unscaled system with residuals
            // below ~1e-7 would read as singular and lose the acceleration.
            if max_diag > 0.0 {
                let inv = 1.0 / max_diag;
                for a in 0..mk {
                    for b in 0..mk {
                        ata.set(a, b, ata.get(a, b) * inv);
                    }
                    atb[a] *= inv;
                }
            }
            for a in 0..mk {
                ata.set(a, a, ata.get(a, a) + REG);
            }
            let gamma = match numerics::solve_linear(&ata, &atb) {
                Ok(g) if numerics::all_finite(&g) => Some(g),
                _ => None,
            };
            match gamma {
                Some(g) => {
                    y_next = yk.clone();
                    numerics::axpy(&mut y_next, beta, &fk);
                    for j in 0..mk {
                        for i in 0..dim {
                            y_next[i] -= (dy.get(i, j) + beta * df.get(i, j)) * g[j];
                        }
                    }
                }
                None => {
                    y_next = yk.clone();
                    numerics::axpy(&mut y_next, beta, &fk);
                }
            }
        }
        check_finite(&y_next, t)?;
        let r = numerics::dist(&y_next, &yk);
        ys.push(y_next.clone());
        iterates.push(y_next);
        residuals.push(r);
        if ys.len() > cfg.anderson_depth + 1 {
            ys.remove(0);
            fs.remove(0);
        }
        if r <= cfg.tol {
            converged = true;
            break;
        }
    }
    let iterations = residuals.len();
    Ok(IterationTrace { iterates, residuals, converged, iterations })
}

/// Default sampling box for contraction-modulus estimation: each state
/// coordinate is drawn uniformly from this interval.
pub const MODULUS_SAMPLE_BOX: (f64, f64) = (-5.0, 5.0);

/// Max over sampled pairs of `||G(y1,x) - G(y2,x)|| / ||y1 - y2||` with both
/// points drawn from `[lo, hi]^state_dim`. Zero-distance pairs are resampled,
/// never divided.
pub fn estimate_contraction_modulus_in_box(
    op: &dyn ImplicitOp,
    x: &[f64],
    n_pairs: usize,
    rng: &mut Rng,
    lo: f64,
    hi: f64,
) -> f64 {
    assert!(n_pairs >= 1);
    let dim = op.state_dim();
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < n_pairs {
        let y1 = rng.uniform_vec(dim, lo, hi);
        let y2 = rng.uniform_vec(dim, lo, hi);
        let d = numerics::dist(&y1, &y2);
        if d == 0.0 {
            continue;
        }
        let g1 = op.apply(&y1, x);
        let g2 = op.apply(&y2, x);
        let ratio = numerics::dist(&g1, &g2) / d;
        if ratio > worst {
            worst = ratio;
        }
        done += 1;
    }
    worst
}

/// [`estimate_contraction_modulus_in_box`] over the default
/// [`MODULUS_SAMPLE_BOX`].
pub fn estimate_contraction_modulus(
    op: &dyn ImplicitOp,
    x: &[f64],
    n_pairs: usize,
    rng: &mut Rng,
) -> f64 {
    estimate_contraction_modulus_in_box(op, x, n_pairs, rng, MODULUS_SAMPLE_BOX.0, MODULUS_SAMPLE_BOX.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn affine_half() -> impl ImplicitOp {
        fn_op(1, 1, |y, _x| vec![0.5 * y[0] + 1.0])
    }

    #[test]
    fn picard_scalar_affine_contraction() {
        let op = affine_half();
        let cfg = SolveConfig { tol: 1e-6, ..Default::default() };
        let trace = picard_solve(&op, &[0.0], &[0.0], &cfg).unwrap();
        assert!(trace.converged);
        assert!((trace.final_iterate()[0] - 2.0).abs() < 1e-5);
        // Residuals halve each step for this map.
        for w in trace.residuals.windows(2) {
            assert!((w[1] / w[0] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn picard_fixed_point_input_converges_immediately() {
        let op = affine_half();
        let cfg = SolveConfig::default();
        let trace = picard_solve(&op, &[0.0], &[2.0], &cfg).unwrap();
        assert!(trace.converged);
        assert_eq!(trace.iterations, 1);
        assert!(trace.residuals[0] <= 1e-15);
    }

    #[test]
    fn picard_reciprocal_iterates_match_closed_form() {
        // G(y, x) = y - 0.5 (x y - 1) at x = 1: y_t = 1 - 0.5^t.
        let op = fn_op(1, 1, |y, x| vec![y[0] - 0.5 * (x[0] * y[0] - 1.0)]);
        let ys = iterate_exactly(&op, &[1.0], &[0.0], 3).unwrap();
        assert_eq!(ys[1][0], 0.5);
        assert_eq!(ys[2][0], 0.75);
        assert_eq!(ys[3][0], 0.875);
    }

    #[test]
    fn iterate_exactly_zero_steps_returns_start() {
        let op = affine_half();
        let ys = iterate_exactly(&op, &[0.0], &[3.0], 0).unwrap();
        assert_eq!(ys, vec![vec![3.0]]);
    }

    #[test]
    fn iterate_exactly_prefix_matches_picard_bitwise() {
        let op = fn_op(2, 1, |y, x| vec![0.3 * y[0] + 0.1 * y[1] + x[0], -0.2 * y[0] + 0.4 * y[1] + 1.0]);
        let cfg = SolveConfig { tol: 1e-12, max_iter: 40, ..Default::default() };
        let trace = picard_solve(&op, &[0.7], &[0.1, -0.4], &cfg).unwrap();
        let t = trace.iterates.len() - 1;
        let ys = iterate_exactly(&op, &[0.7], &[0.1, -0.4], t).unwrap();
        for (a, b) in ys.iter().zip(&trace.iterates) {
            for (u, v) in a.iter().zip(b) {
                assert_eq!(u.to_bits(), v.to_bits());
            }
        }
    }

    #[test]
    fn picard_reports_non_finite_iterate() {
        let op = fn_op(1, 1, |y, _x| vec![2.0 * y[0] * y[0] + 1.0]);
        let err = picard_solve(&op, &[0.0], &[10.0], &SolveConfig { max_iter: 2000, ..Default::default() })
            .unwrap_err();
        match err {
            SolveError::NonFinite { iteration } => assert!(iteration > 0),
        }
    }

    #[test]
    fn anderson_secant_lands_on_affine_fixed_point() {
        // One Picard step then one secant step solves a scalar affine map;
        // the diagonal ridge shifts the answer by about 5e-11.
        let op = affine_half();
        let cfg = SolveConfig { anderson_depth: 1, tol: 1e-14, max_iter: 10, ..Default::default() };
        let trace = anderson_solve(&op, &[0.0], &[0.0], &cfg).unwrap();
        assert!((trace.iterates[1][0] - 1.0).abs() < 1e-15);
        assert!((trace.iterates[2][0] - 2.0).abs() < 1e-8, "y2 = {}", trace.iterates[2][0]);
    }

    #[test]
    fn anderson_fixed_point_input_converges_immediately() {
        let op = affine_half();
        let trace = anderson_solve(&op, &[0.0], &[2.0], &SolveConfig::default()).unwrap();
        assert!(trace.converged);
        assert_eq!(trace.iterations, 1);
    }

    #[test]
    fn modulus_of_reciprocal_op_is_half() {
        // G(y, x) = y - 0.5 (x y - 1) at x = 1 contracts by exactly 0.5.
        let op = fn_op(1, 1, |y, x| vec![y[0] - 0.5 * (x[0] * y[0] - 1.0)]);
        let mut rng = Rng::new(5);
        let m = estimate_contraction_modulus(&op, &[1.0], 200, &mut rng);
        assert!((m - 0.5).abs() < 1e-12);
    }

    #[test]
    fn modulus_of_identity_is_one() {
        let op = fn_op(3, 1, |y, _x| y.to_vec());
        let mut rng = Rng::new(6);
        let m = estimate_contraction_modulus(&op, &[0.0], 100, &mut rng);
        assert!((m - 1.0).abs() < 1e-12);
    }
}

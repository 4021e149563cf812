//! Implicit differentiation at a fixed point through the geometric series
//! for (I - J)^{-1}. Each extra term applies the state VJP once more, so the
//! truncation error shrinks by the contraction factor of the iteration per
//! term; unrolling to depth T from the zero state is equivalent up to the
//! forward convergence error.

use fixlab_core::numerics::{self, Matrix, Vector};
use fixlab_nn::{mlp_backward, mlp_forward};

use crate::graph::LpGraph;
use crate::model::{apply_backward, apply_traced, mse_grad, GnnGrads, GnnMode, GnnParams};
use crate::GnnError;

/// Forward iteration stops at this residual (infinity norm) and errors out
/// beyond the iteration cap.
pub const FIXPOINT_TOL: f64 = 1e-9;
pub const FIXPOINT_MAX_ITERS: usize = 1_000;

/// A parameterized map whose fixed point is differentiated. Inputs other
/// than the state are baked into the implementor.
pub trait FixOpDiff {
    fn state_dim(&self) -> usize;
    fn param_count(&self) -> usize;
    fn apply(&self, z: &[f64]) -> Vector;
    /// `v' dG/dz` at `z`.
    fn vjp_state(&self, z: &[f64], v: &[f64]) -> Vector;
    /// `v' dG/dtheta` at `z`, in the implementor's flat parameter layout.
    fn vjp_params(&self, z: &[f64], v: &[f64]) -> Vector;
}

/// Sum of the first `terms` series terms: `sum_k v' J_z^k J_theta` with
/// `v = dloss/dz*`. Zero terms means the state is treated as a constant.
pub fn neumann_series_gradient(
    op: &impl FixOpDiff,
    z_star: &[f64],
    dz: &[f64],
    terms: usize,
) -> Vector {
    assert_eq!(z_star.len(), op.state_dim());
    assert_eq!(dz.len(), op.state_dim());
    let mut g = vec![0.0; op.param_count()];
    let mut v = dz.to_vec();
    for _ in 0..terms {
        let gp = op.vjp_params(z_star, &v);
        for (acc, term) in g.iter_mut().zip(&gp) {
            *acc += term;
        }
        v = op.vjp_state(z_star, &v);
    }
    g
}

/// `G(z) = A z + W x` with `W` as the parameters. The closed-form implicit
/// gradient makes this the reference case for the series.
pub struct AffineToy {
    pub a: Matrix,
    pub w: Matrix,
    pub x: Vector,
}

impl AffineToy {
    pub fn new(a: Matrix, w: Matrix, x: Vector) -> Self {
        assert_eq!(a.rows, a.cols);
        assert_eq!(w.rows, a.rows);
        assert_eq!(w.cols, x.len());
        AffineToy { a, w, x }
    }

    /// Solves `(I - A) z = W x` directly.
    pub fn fixed_point(&self) -> Vector {
        let n = self.a.rows;
        let mut m = Matrix::identity(n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, m.get(i, j) - self.a.get(i, j));
            }
        }
        numerics::solve_linear(&m, &numerics::gemv(&self.w, &self.x))
            .expect("I - A must be invertible for a unique fixed point")
    }

    /// Exact `dloss/dW` for a loss with gradient `dz` at the fixed point:
    /// `(I - A')^{-1} dz` outer `x`.
    pub fn exact_gradient(&self, dz: &[f64]) -> Vector {
        let n = self.a.rows;
        let mut m = Matrix::identity(n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, m.get(i, j) - self.a.get(j, i));
            }
        }
        let u = numerics::solve_linear(&m, dz).expect("I - A' must be invertible");
        let mut g = Vec::with_capacity(n * self.x.len());
        for i in 0..n {
            for xj in &self.x {
                g.push(u[i] * xj);
            }
        }
        g
    }
}

impl FixOpDiff for AffineToy {
    fn state_dim(&self) -> usize {
        self.a.rows
    }

    fn param_count(&self) -> usize {
        self.w.rows * self.w.cols
    }

    fn apply(&self, z: &[f64]) -> Vector {
        let mut out = numerics::gemv(&self.a, z);
        let drive = numerics::gemv(&self.w, &self.x);
        for (o, d) in out.iter_mut().zip(&drive) {
            *o += d;
        }
        out
    }

    fn vjp_state(&self, _z: &[f64], v: &[f64]) -> Vector {
        let n = self.a.rows;
        let mut out = vec![0.0; n];
        for k in 0..n {
            for i in 0..n {
                out[k] += self.a.get(i, k) * v[i];
            }
        }
        out
    }

    fn vjp_params(&self, _z: &[f64], v: &[f64]) -> Vector {
        let mut g = Vec::with_capacity(self.param_count());
        for vi in v {
            for xj in &self.x {
                g.push(vi * xj);
            }
        }
        g
    }
}

/// The message-passing core as a fixed-point map over the scalar states.
/// VJPs re-run one traced application at the pinned state and walk its tape
/// backward; the flat layout matches `GnnParams::flat` (readout block
/// included, always zero here since one application never touches psi).
pub struct GnnFixOp<'a> {
    params: &'a GnnParams,
    graph: &'a LpGraph,
}

impl<'a> GnnFixOp<'a> {
    pub fn new(params: &'a GnnParams, graph: &'a LpGraph) -> Self {
        assert_eq!(params.mode, GnnMode::Implicit, "only the implicit model iterates");
        GnnFixOp { params, graph }
    }
}

impl FixOpDiff for GnnFixOp<'_> {
    fn state_dim(&self) -> usize {
        self.graph.n_var
    }

    fn param_count(&self) -> usize {
        self.params.param_count()
    }

    fn apply(&self, z: &[f64]) -> Vector {
        apply_traced(self.params, self.graph, Some(z)).0
    }

    fn vjp_state(&self, z: &[f64], v: &[f64]) -> Vector {
        let (_, tape) = apply_traced(self.params, self.graph, Some(z));
        let mut sink = GnnGrads::zeros_like(self.params);
        apply_backward(self.params, self.graph, tape, v, &mut sink)
    }

    fn vjp_params(&self, z: &[f64], v: &[f64]) -> Vector {
        let (_, tape) = apply_traced(self.params, self.graph, Some(z));
        let mut grads = GnnGrads::zeros_like(self.params);
        apply_backward(self.params, self.graph, tape, v, &mut grads);
        grads.flat()
    }
}

/// Gradient of the mean squared error at the model's fixed point,
/// approximated with `terms` series terms. The readout contribution is exact
/// regardless of `terms`. Errors out when the forward iteration has not
/// reached `FIXPOINT_TOL`.
pub fn neumann_gradient(
    params: &GnnParams,
    graph: &LpGraph,
    target: &[f64],
    terms: usize,
) -> Result<Vector, GnnError> {
    assert_eq!(target.len(), graph.n_var);
    let op = GnnFixOp::new(params, graph);
    let mut z = vec![0.0; graph.n_var];
    let mut residual = f64::INFINITY;
    let mut iters = 0;
    while iters < FIXPOINT_MAX_ITERS {
        let z_next = op.apply(&z);
        residual = z
            .iter()
            .zip(&z_next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        z = z_next;
        iters += 1;
        if residual <= FIXPOINT_TOL {
            break;
        }
    }
    if !(residual <= FIXPOINT_TOL) {
        return Err(GnnError::NoFixedPoint { residual, iters });
    }

    let mut y = vec![0.0; graph.n_var];
    let mut psi_tapes = Vec::with_capacity(graph.n_var);
    for j in 0..graph.n_var {
        let (out, t) = mlp_forward(&params.psi, &[z[j]]);
        y[j] = out[0];
        psi_tapes.push(t);
    }
    let dy = mse_grad(&y, target);
    let mut direct = GnnGrads::zeros_like(params);
    let mut dz = vec![0.0; graph.n_var];
    for (j, t) in psi_tapes.into_iter().enumerate() {
        let (gr, dx) = mlp_backward(&params.psi, t, &[dy[j]]);
        direct.psi.accumulate(&gr);
        dz[j] = dx[0];
    }
    let mut total = direct.flat();
    let series = neumann_series_gradient(&op, &z, &dz, terms);
    for (acc, term) in total.iter_mut().zip(&series) {
        *acc += term;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::encode_graph;
    use fixlab_core::numerics::Rng;
    use fixlab_lp::generate_instance_with;

    fn half_identity_toy() -> AffineToy {
        let n = 3;
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            a.set(i, i, 0.5);
        }
        let mut rng = Rng::new(17);
        let mut w = Matrix::zeros(n, 2);
        for i in 0..n {
            for j in 0..2 {
                w.set(i, j, rng.normal(0.0, 1.0));
            }
        }
        AffineToy::new(a, w, vec![0.8, -0.3])
    }

    #[test]
    fn series_error_halves_with_every_term_on_the_half_map()
    {
        let toy = half_identity_toy();
        let z_star = toy.fixed_point();
        // check the fixed point actually holds
        let gz = toy.apply(&z_star);
        for (a, b) in z_star.iter().zip(&gz) {
            assert!((a - b).abs() < 1e-12);
        }
        let dz = vec![1.0, -2.0, 0.5];
        let exact = toy.exact_gradient(&dz);
        let exact_norm = numerics::norm(&exact);
        let base = numerics::dist(&neumann_series_gradient(&toy, &z_star, &dz, 0), &exact)
            / exact_norm;
        assert!((base - 1.0).abs() < 1e-12, "zero terms must miss the whole gradient");
        for k in 0..20 {
            let g = neumann_series_gradient(&toy, &z_star, &dz, k);
            let rel = numerics::dist(&g, &exact) / exact_norm;
            let bound = 0.5f64.powi(k as i32) * base;
            assert!(rel <= bound * 1.01, "k={k}: rel {rel:.3e} above {bound:.3e}");
            assert!(rel >= bound * 0.99, "k={k}: rel {rel:.3e} suspiciously below {bound:.3e}");
        }
    }

    #[test]
    fn long_series_matches_the_closed_form_for_a_generic_contraction() {
        let mut rng = Rng::new(4);
        let n = 4;
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                // rows sum to at most 0.4 in absolute value
                a.set(i, j, rng.uniform_in(-0.1, 0.1));
            }
        }
        let mut w = Matrix::zeros(n, 3);
        for i in 0..n {
            for j in 0..3 {
                w.set(i, j, rng.normal(0.0, 1.0));
            }
        }
        let toy = AffineToy::new(a, w, vec![1.0, 0.5, -0.25]);
        let z_star = toy.fixed_point();
        let dz = vec![0.3, -0.7, 1.1, 0.2];
        let exact = toy.exact_gradient(&dz);
        let g = neumann_series_gradient(&toy, &z_star, &dz, 60);
        assert!(numerics::dist(&g, &exact) / numerics::norm(&exact) <= 1e-10);
    }

    #[test]
    fn zero_terms_keep_only_the_readout_gradient() {
        let mut rng = Rng::new(23);
        let inst = generate_instance_with(&mut rng, 6, 3, 9);
        let graph = encode_graph(&inst);
        let mut params = GnnParams::xavier(4, 3, GnnMode::Implicit, &mut rng);
        // shrink the weights so the state iteration contracts
        let damped: Vec<f64> = params.flat().iter().map(|v| v * 0.3).collect();
        params.set_flat(&damped);
        let target = vec![0.1; 6];
        let g0 = neumann_gradient(&params, &graph, &target, 0).unwrap();
        let psi_len = params.psi.param_count();
        let total = g0.len();
        let (body, psi_block) = g0.split_at(total - psi_len);
        assert!(body.iter().all(|&v| v == 0.0), "truncated gradient leaked past the readout");
        assert!(psi_block.iter().any(|&v| v != 0.0), "readout gradient missing");
    }

    #[test]
    fn extra_terms_stop_mattering_once_the_series_converges() {
        let mut rng = Rng::new(29);
        let inst = generate_instance_with(&mut rng, 5, 2, 7);
        let graph = encode_graph(&inst);
        let mut params = GnnParams::xavier(4, 3, GnnMode::Implicit, &mut rng);
        let damped: Vec<f64> = params.flat().iter().map(|v| v * 0.3).collect();
        params.set_flat(&damped);
        let target = vec![-0.2; 5];
        let g40 = neumann_gradient(&params, &graph, &target, 40).unwrap();
        let g80 = neumann_gradient(&params, &graph, &target, 80).unwrap();
        let scale = numerics::norm(&g40).max(1e-12);
        assert!(numerics::dist(&g40, &g80) / scale <= 1e-9);
    }
}

//! Linear inverse problems with a sphere prior and the two classical
//! iterations that solve them: proximal gradient descent on
//!
//! ```text
//! (1/2)||x - A y||^2 + (alpha/2) dist^2(y, M)
//! ```
//!
//! and half-quadratic splitting on the surrogate with an auxiliary block,
//!
//! ```text
//! (1/2)||x - A y||^2 + (alpha/2) dist^2(z, M) + (beta/2)||y - z||^2.
//! ```
//!
//! Both use the exact sphere prox, so their fixed points can be checked
//! against closed-form stationarity conditions instead of a learned model.

use crate::sphere::SphereManifold;
use fixlab_core::fixpoint::ImplicitOp;
use fixlab_core::numerics::{self, Matrix, Rng, Vector};

/// Pairs sampled when estimating the on-sphere bi-Lipschitz constants.
const BILIPSCHITZ_PAIRS: usize = 10_000;

/// Forward model `x = A y + noise` with penalty weights.
///
/// `sigma` is the prox weight of the gradient-descent route and is pinned to
/// `gamma * alpha` so that the PGD fixed point is a stationary point of the
/// un-split objective; the splitting route derives its own weight
/// `alpha / beta` instead. `sigma_max` comes from power iteration on `AᵀA`;
/// `mu` and `l` are sampled over on-sphere pairs and are diagnostics, not
/// guarantees.
#[derive(Debug, Clone)]
pub struct InverseProblem {
    pub a: Matrix,
    pub x: Vector,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub sigma_max: f64,
    pub mu: f64,
    pub l: f64,
    at: Matrix,
    /// Inverse of `AᵀA + beta I`, factored once for every splitting step.
    ridge_inv: Matrix,
}

impl InverseProblem {
    /// Panics on shape mismatches, nonpositive weights, or an unstable
    /// gradient step (`gamma * sigma_max^2` must stay below 2).
    pub fn new(
        a: Matrix,
        x: Vector,
        alpha: f64,
        beta: f64,
        gamma: f64,
        m: &SphereManifold,
        rng: &mut Rng,
    ) -> Self {
        assert_eq!(a.cols, m.dim(), "operator must act on the ambient space of the manifold");
        assert_eq!(a.rows, x.len(), "observation length must match the operator rows");
        assert!(alpha > 0.0 && beta > 0.0 && gamma > 0.0, "weights must be positive");
        let sigma_max = largest_singular_value(&a, rng);
        assert!(
            gamma * sigma_max * sigma_max < 2.0,
            "gradient step is unstable: gamma * sigma_max^2 = {} >= 2",
            gamma * sigma_max * sigma_max
        );
        let (mu, l) = sampled_bilipschitz(&a, m, rng);
        let at = a.transpose();
        let mut ridge = at.matmul(&a);
        for i in 0..ridge.rows {
            let v = ridge.get(i, i);
            ridge.set(i, i, v + beta);
        }
        let ridge_inv = numerics::invert(&ridge)
            .expect("AᵀA + beta I is positive definite for beta > 0");
        let sigma = gamma * alpha;
        InverseProblem { a, x, alpha, beta, gamma, sigma, sigma_max, mu, l, at, ridge_inv }
    }

    /// Admissible noise radius `(1/80) mu^5 tau / (sigma_max^2 L^2)` under
    /// the sampled constants. Zero when the sampled operator is degenerate.
    pub fn noise_bound(&self, m: &SphereManifold) -> f64 {
        let denom = self.sigma_max * self.sigma_max * self.l * self.l;
        if denom == 0.0 {
            return 0.0;
        }
        self.mu.powi(5) / denom * m.radius / 80.0
    }
}

/// Largest singular value by power iteration on `AᵀA`.
fn largest_singular_value(a: &Matrix, rng: &mut Rng) -> f64 {
    let at = a.transpose();
    let mut v = rng.normal_vec(a.cols, 0.0, 1.0);
    let vn = numerics::norm(&v);
    assert!(vn > 0.0);
    v = numerics::scale(&v, 1.0 / vn);
    let mut lambda = 0.0f64;
    for _ in 0..500 {
        let w = numerics::gemv(&at, &numerics::gemv(a, &v));
        let next = numerics::dot(&v, &w);
        let wn = numerics::norm(&w);
        if wn == 0.0 {
            // v landed in the kernel of AᵀA; the Rayleigh quotient is 0.
            return 0.0;
        }
        v = numerics::scale(&w, 1.0 / wn);
        if (next - lambda).abs() <= 1e-13 * next.max(1.0) {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda.max(0.0).sqrt()
}

/// Min and max of `||A(p - q)|| / ||p - q||` over sampled on-sphere pairs.
fn sampled_bilipschitz(a: &Matrix, m: &SphereManifold, rng: &mut Rng) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    let mut drawn = 0;
    while drawn < BILIPSCHITZ_PAIRS {
        let p = m.random_point(rng);
        let q = m.random_point(rng);
        let d = numerics::dist(&p, &q);
        if d <= 1e-12 {
            continue;
        }
        let ratio = numerics::norm(&numerics::gemv(a, &numerics::sub(&p, &q))) / d;
        lo = lo.min(ratio);
        hi = hi.max(ratio);
        drawn += 1;
    }
    (lo, hi)
}

pub(crate) fn pgd_step_with(
    prob: &InverseProblem,
    m: &SphereManifold,
    y: &[f64],
    x: &[f64],
) -> Vector {
    let residual = numerics::sub(&numerics::gemv(&prob.a, y), x);
    let mut inner = y.to_vec();
    numerics::axpy(&mut inner, -prob.gamma, &numerics::gemv(&prob.at, &residual));
    m.prox(&inner, prob.sigma)
}

pub(crate) fn hqs_y_block_with(prob: &InverseProblem, z: &[f64], x: &[f64]) -> Vector {
    let mut rhs = numerics::gemv(&prob.at, x);
    numerics::axpy(&mut rhs, prob.beta, z);
    numerics::gemv(&prob.ridge_inv, &rhs)
}

pub(crate) fn hqs_step_with(
    prob: &InverseProblem,
    m: &SphereManifold,
    z: &[f64],
    x: &[f64],
) -> Vector {
    m.prox(&hqs_y_block_with(prob, z, x), prob.alpha / prob.beta)
}

/// One proximal gradient step, `prox_sigma(y - gamma Aᵀ(A y - x))` with the
/// stored observation. Panics (via the prox) if the gradient step lands on
/// the focal point.
pub fn pgd_op(prob: &InverseProblem, m: &SphereManifold, y: &[f64]) -> Vector {
    pgd_step_with(prob, m, y, &prob.x)
}

/// One splitting step on the `z` block: the quadratic `y` block solves
/// `(AᵀA + beta I) y = Aᵀx + beta z` through the cached inverse, then the
/// prox with weight `alpha/beta` pulls toward the sphere.
pub fn hqs_op(prob: &InverseProblem, m: &SphereManifold, z: &[f64]) -> Vector {
    hqs_step_with(prob, m, z, &prob.x)
}

/// The quadratic block minimizer `(AᵀA + beta I)^{-1}(Aᵀx + beta z)` on its
/// own; the splitting fixed point is checked through this value.
pub fn hqs_y_block(prob: &InverseProblem, z: &[f64]) -> Vector {
    hqs_y_block_with(prob, z, &prob.x)
}

/// Un-split objective `(1/2)||x - A y||^2 + (alpha/2) dist^2(y, M)`.
pub fn pgd_objective(prob: &InverseProblem, m: &SphereManifold, y: &[f64]) -> f64 {
    let r = numerics::sub(&prob.x, &numerics::gemv(&prob.a, y));
    let d = m.dist(y);
    0.5 * numerics::dot(&r, &r) + 0.5 * prob.alpha * d * d
}

/// Split objective over both blocks.
pub fn hqs_objective(prob: &InverseProblem, m: &SphereManifold, y: &[f64], z: &[f64]) -> f64 {
    let r = numerics::sub(&prob.x, &numerics::gemv(&prob.a, y));
    let d = m.dist(z);
    0.5 * numerics::dot(&r, &r)
        + 0.5 * prob.alpha * d * d
        + 0.5 * prob.beta * numerics::dist(y, z).powi(2)
}

/// Gradient of the un-split objective, `Aᵀ(A y - x) + alpha (y - p(y))`;
/// zero at a stationary point.
pub fn pgd_stationarity(prob: &InverseProblem, m: &SphereManifold, y: &[f64]) -> Vector {
    let residual = numerics::sub(&numerics::gemv(&prob.a, y), &prob.x);
    let mut g = numerics::gemv(&prob.at, &residual);
    numerics::axpy(&mut g, prob.alpha, &numerics::sub(y, &m.project(y)));
    g
}

/// Block gradients of the split objective:
/// `(Aᵀ(A y - x) + beta (y - z), alpha (z - p(z)) + beta (z - y))`.
pub fn hqs_stationarity(
    prob: &InverseProblem,
    m: &SphereManifold,
    y: &[f64],
    z: &[f64],
) -> (Vector, Vector) {
    let residual = numerics::sub(&numerics::gemv(&prob.a, y), &prob.x);
    let mut gy = numerics::gemv(&prob.at, &residual);
    numerics::axpy(&mut gy, prob.beta, &numerics::sub(y, z));
    let mut gz = numerics::scale(&numerics::sub(z, &m.project(z)), prob.alpha);
    numerics::axpy(&mut gz, prob.beta, &numerics::sub(z, y));
    (gy, gz)
}

/// PGD as an implicit operator in the state `y`, with the observation as the
/// operator input (the stored `prob.x` is ignored so one problem can serve a
/// whole dataset).
pub struct PgdOp<'a> {
    pub prob: &'a InverseProblem,
    pub manifold: &'a SphereManifold,
}

impl ImplicitOp for PgdOp<'_> {
    fn state_dim(&self) -> usize {
        self.prob.a.cols
    }
    fn input_dim(&self) -> usize {
        self.prob.a.rows
    }
    fn apply(&self, y: &[f64], x: &[f64]) -> Vector {
        pgd_step_with(self.prob, self.manifold, y, x)
    }
}

/// The splitting iteration as an implicit operator in the `z` block.
pub struct HqsOp<'a> {
    pub prob: &'a InverseProblem,
    pub manifold: &'a SphereManifold,
}

impl ImplicitOp for HqsOp<'_> {
    fn state_dim(&self) -> usize {
        self.prob.a.cols
    }
    fn input_dim(&self) -> usize {
        self.prob.a.rows
    }
    fn apply(&self, z: &[f64], x: &[f64]) -> Vector {
        hqs_step_with(self.prob, self.manifold, z, x)
    }
}

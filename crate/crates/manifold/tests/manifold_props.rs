//! Module-level contracts: the prox as a global minimizer of its penalty,
//! monotone descent of the gradient route, block stationarity at the
//! splitting route's fixed points, residual contraction across weights and
//! spheres, and bit-exact reruns of the growth experiment.

use fixlab_core::fixpoint::{picard_solve, SolveConfig};
use fixlab_core::numerics::{norm, Matrix, Rng};
use fixlab_manifold::{
    hqs_stationarity, hqs_y_block, lipschitz_growth_experiment, pgd_objective, pgd_op,
    prox_residual_lipschitz, sample_tube, GrowthConfig, HqsOp, InverseProblem, SphereManifold,
};

/// Random full problem over a given operator; `gamma` is chosen after a
/// first construction reveals the largest singular value.
fn random_problem(
    a: Matrix,
    m: &SphereManifold,
    alpha: f64,
    beta: f64,
    step_fraction: f64,
    rng: &mut Rng,
) -> InverseProblem {
    let d = a.rows;
    let x: Vec<f64> = (0..d).map(|_| rng.uniform_in(-2.0, 2.0)).collect();
    let probe = InverseProblem::new(a.clone(), x.clone(), alpha, beta, 1e-6, m, rng);
    let gamma = step_fraction / (probe.sigma_max * probe.sigma_max);
    InverseProblem::new(a, x, alpha, beta, gamma, m, rng)
}

#[test]
fn prox_beats_a_thousand_candidates_per_point() {
    let m = SphereManifold::new(vec![0.5, -1.0, 2.0], 1.5);
    let mut rng = Rng::new(100);
    for _ in 0..1_000 {
        let z = sample_tube(&m, 0.375, &mut rng);
        let sigma = rng.uniform_in(0.05, 5.0);
        let best = m.prox(&z, sigma);
        let best_val = m.prox_objective(&best, &z, sigma);
        for k in 0..1_000 {
            // Half the candidates sweep a wide box, half crowd the claimed
            // minimizer where a misplaced prox would be cheapest to beat.
            let cand = if k % 2 == 0 {
                let off = rng.uniform_vec(3, -3.0, 3.0);
                (0..3).map(|i| z[i] + off[i]).collect::<Vec<f64>>()
            } else {
                let off = rng.uniform_vec(3, -1e-3, 1e-3);
                (0..3).map(|i| best[i] + off[i]).collect::<Vec<f64>>()
            };
            let val = m.prox_objective(&cand, &z, sigma);
            assert!(
                best_val <= val + 1e-12,
                "candidate beat the prox: {val} < {best_val} at sigma = {sigma}"
            );
        }
    }
}

#[test]
fn gradient_route_descends_monotonically() {
    let mut rng = Rng::new(200);
    for case in 0..20 {
        let n = 2 + case % 2;
        let center: Vec<f64> = (0..n).map(|_| rng.uniform_in(-1.5, 1.5)).collect();
        let m = SphereManifold::new(center, 1.0);
        let rows: Vec<Vec<f64>> =
            (0..n).map(|_| (0..n).map(|_| rng.uniform_in(-1.0, 1.0)).collect()).collect();
        let prob = random_problem(Matrix::from_rows(&rows), &m, 2.0, 1.0, 0.99, &mut rng);
        let mut y: Vec<f64> = (0..n).map(|_| rng.uniform_in(-2.0, 2.0)).collect();
        let mut obj = pgd_objective(&prob, &m, &y);
        for step in 0..60 {
            y = pgd_op(&prob, &m, &y);
            let next = pgd_objective(&prob, &m, &y);
            assert!(
                next <= obj + 1e-10,
                "case {case}, step {step}: objective rose from {obj} to {next}"
            );
            obj = next;
        }
    }
}

#[test]
fn splitting_route_fixed_points_are_block_stationary() {
    let mut rng = Rng::new(300);
    for case in 0..15 {
        let n = 2 + case % 2;
        let center: Vec<f64> = (0..n).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let m = SphereManifold::new(center, 1.0);
        let rows: Vec<Vec<f64>> =
            (0..n).map(|_| (0..n).map(|_| rng.uniform_in(-1.0, 1.0)).collect()).collect();
        let prob = random_problem(Matrix::from_rows(&rows), &m, 2.0, 1.0, 0.5, &mut rng);
        let op = HqsOp { prob: &prob, manifold: &m };
        let y0: Vec<f64> = (0..n).map(|_| rng.uniform_in(-0.5, 0.5)).collect();
        let cfg = SolveConfig { max_iter: 5_000, tol: 1e-13, ..Default::default() };
        let trace = picard_solve(&op, &prob.x, &y0, &cfg).unwrap();
        assert!(trace.converged, "case {case} did not reach tolerance");
        let z = trace.final_iterate();
        let y = hqs_y_block(&prob, z);
        let (gy, gz) = hqs_stationarity(&prob, &m, &y, z);
        assert!(
            norm(&gy) <= 1e-8 && norm(&gz) <= 1e-8,
            "case {case}: residuals {} and {}",
            norm(&gy),
            norm(&gz)
        );
    }
}

#[test]
fn residual_contraction_holds_across_weights_and_spheres() {
    let manifolds = [
        SphereManifold::new(vec![0.0, 0.0], 1.0),
        SphereManifold::new(vec![1.0, -2.0, 0.5], 2.0),
    ];
    for (mi, m) in manifolds.iter().enumerate() {
        for (si, sigma) in [0.1, 0.5, 1.0, 2.0, 10.0].into_iter().enumerate() {
            let mut rng = Rng::new(400 + (mi * 5 + si) as u64);
            let worst = prox_residual_lipschitz(m, sigma, m.radius / 4.0, 10_000, &mut rng);
            let bound = sigma / (1.0 + sigma) + 1e-9;
            assert!(
                worst <= bound,
                "manifold {mi}, sigma {sigma}: sampled {worst} above {bound}"
            );
        }
    }
}

#[test]
fn growth_experiment_reruns_bit_exactly() {
    let m = SphereManifold::new(vec![2.0, 1.0, -0.5], 1.0);
    let mut rng = Rng::new(500);
    let a = Matrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
    let prob = InverseProblem::new(a, vec![0.0; 2], 3.0, 1.0, 0.8, &m, &mut rng);
    let cfg = GrowthConfig { n_samples: 12, t_max: 10, seed: 7, ..Default::default() };
    let one = lipschitz_growth_experiment(&prob, &m, &cfg).unwrap();
    let two = lipschitz_growth_experiment(&prob, &m, &cfg).unwrap();
    assert_eq!(one.labels, two.labels);
    for (ra, rb) in one.rows.iter().zip(&two.rows) {
        assert_eq!(ra.e_mean.to_bits(), rb.e_mean.to_bits());
        assert_eq!(ra.e_std.to_bits(), rb.e_std.to_bits());
        for (u, v) in ra.l_t.iter().zip(&rb.l_t) {
            assert_eq!(u.to_bits(), v.to_bits());
        }
    }
}

//! Gradient consistency properties: directional derivatives against the
//! analytic gradient, and positive homogeneity over random scales.

use fixlab_core::numerics::Rng;
use fixlab_nn::{grad_check, mlp_backward, mlp_forward, Mlp2};
use proptest::prelude::*;

/// Scalar head: f(params) = <v, mlp(x)>, with the analytic gradient from one
/// backward pass.
fn probe_setup(seed: u64) -> (Mlp2, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut rng = Rng::new(seed);
    let mlp = Mlp2::xavier(5, 8, 3, &mut rng);
    let x = rng.uniform_vec(5, -1.0, 1.0);
    let v = rng.uniform_vec(3, -1.0, 1.0);
    let (_, tape) = mlp_forward(&mlp, &x);
    let (g, _) = mlp_backward(&mlp, tape, &v);
    let mut analytic = Vec::new();
    g.grads_to(&mut analytic);
    let mut params = Vec::new();
    mlp.params_to(&mut params);
    (mlp, x, v, params, analytic)
}

fn value_at(mlp: &Mlp2, x: &[f64], v: &[f64], p: &[f64]) -> f64 {
    let mut m = mlp.clone();
    m.params_from(p);
    let (y, _) = mlp_forward(&m, x);
    y.iter().zip(v).map(|(a, b)| a * b).sum()
}

#[test]
fn directional_derivatives_match_the_gradient_in_100_directions() {
    let (mlp, x, v, params, analytic) = probe_setup(29);
    let mut rng = Rng::new(57);
    let h = 1e-6;
    for k in 0..100 {
        let mut d = rng.normal_vec(params.len(), 0.0, 1.0);
        let norm = d.iter().map(|a| a * a).sum::<f64>().sqrt();
        for di in d.iter_mut() {
            *di /= norm;
        }
        let plus: Vec<f64> = params.iter().zip(&d).map(|(p, di)| p + h * di).collect();
        let minus: Vec<f64> = params.iter().zip(&d).map(|(p, di)| p - h * di).collect();
        let numeric = (value_at(&mlp, &x, &v, &plus) - value_at(&mlp, &x, &v, &minus)) / (2.0 * h);
        let exact: f64 = analytic.iter().zip(&d).map(|(g, di)| g * di).sum();
        let rel = (numeric - exact).abs() / (exact.abs() + 1e-8);
        assert!(rel <= 1e-5, "direction {k}: rel err {rel}");
    }
}

#[test]
fn full_parameter_gradient_survives_the_oracle() {
    let (mlp, x, v, params, analytic) = probe_setup(31);
    let worst = grad_check(|p| value_at(&mlp, &x, &v, p), &params, &analytic, 1e-5);
    assert!(worst <= 1e-5, "max rel err {worst}");
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn positive_homogeneity_holds_for_random_scales(
        seed in 0u64..1000,
        c in 0.0f64..4.0,
        x0 in -2.0f64..2.0,
        x1 in -2.0f64..2.0,
    ) {
        let mut rng = Rng::new(seed);
        let mlp = Mlp2::xavier(2, 5, 2, &mut rng);
        let (y, _) = mlp_forward(&mlp, &[x0, x1]);
        let (yc, _) = mlp_forward(&mlp, &[c * x0, c * x1]);
        for (a, b) in yc.iter().zip(&y) {
            let scale = 1.0 + a.abs().max((c * b).abs());
            prop_assert!((a - c * b).abs() <= 1e-12 * scale);
        }
    }
}

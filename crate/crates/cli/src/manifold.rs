//! Sphere-prior inverse problem driver: builds the forward operator, runs
//! the Lipschitz growth experiment, and samples the prox-residual
//! contraction bound on the experiment's own sphere.

use std::io::Write;

use fixlab_core::numerics::{sig9, Matrix, Rng};
use fixlab_manifold::{
    lipschitz_growth_experiment, prox_residual_lipschitz, GrowthAlg, GrowthConfig,
    InverseProblem, SphereManifold,
};
use serde::{Deserialize, Serialize};

use crate::artifacts::{csv_writer, io_fail, note, write_summary};
use crate::config::{write_resolved, ResolvedConfig};
use crate::RunError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ManifoldParams {
    /// Forward operator family: identity, gaussian, or rank-deficient
    /// (projection onto the first d coordinates).
    pub matrix: String,
    /// State dimension.
    pub n: usize,
    /// Observation dimension; used by the rank-deficient projection.
    pub d: usize,
    pub center: Vec<f64>,
    pub radius: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// "pgd" or "hqs".
    pub algorithm: String,
    pub n_samples: usize,
    pub t_max: usize,
    pub kernel_mix: Vec<f64>,
    pub perturb_size: f64,
    pub noise_scale: f64,
    pub band: f64,
    pub contraction_sigmas: Vec<f64>,
    pub contraction_pairs: usize,
}

impl Default for ManifoldParams {
    fn default() -> Self {
        ManifoldParams {
            matrix: "rank-deficient".into(),
            n: 3,
            d: 2,
            center: vec![2.0, 1.0, -0.5],
            radius: 1.0,
            alpha: 3.0,
            beta: 1.0,
            gamma: 0.8,
            algorithm: "pgd".into(),
            n_samples: 200,
            t_max: 150,
            kernel_mix: vec![0.6, 0.7, 0.8, 0.9, 1.0],
            perturb_size: 0.05,
            noise_scale: 0.5,
            band: 0.15,
            contraction_sigmas: vec![0.1, 0.5, 1.0, 2.0, 10.0],
            contraction_pairs: 10_000,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ManifoldSummary {
    pub algorithm: String,
    pub matrix: String,
    pub sigma: f64,
    pub sigma_max: f64,
    pub mu: f64,
    pub l: f64,
    pub noise_bound: f64,
    pub noise_used: f64,
    pub l1_max: f64,
    pub lt_max: f64,
    pub growth_ratio: f64,
    pub e_first: f64,
    pub e_last: f64,
    pub growth_pass: bool,
    pub error_decay_pass: bool,
    pub contraction_bound_pass: bool,
}

fn build_matrix(p: &ManifoldParams, rng: &mut Rng) -> Result<Matrix, RunError> {
    match p.matrix.as_str() {
        "identity" => Ok(Matrix::identity(p.n)),
        "gaussian" => {
            // entries at scale 1/sqrt(n) so default step sizes stay stable
            let mut a = Matrix::zeros(p.n, p.n);
            let s = 1.0 / (p.n as f64).sqrt();
            for i in 0..p.n {
                for j in 0..p.n {
                    a.set(i, j, rng.normal(0.0, s));
                }
            }
            Ok(a)
        }
        "rank-deficient" => {
            if p.d >= p.n {
                return Err(RunError::Validation(format!(
                    "rank-deficient operator needs d < n, got d = {}, n = {}",
                    p.d, p.n
                )));
            }
            let mut a = Matrix::zeros(p.d, p.n);
            for i in 0..p.d {
                a.set(i, i, 1.0);
            }
            Ok(a)
        }
        other => Err(RunError::Validation(format!("unknown matrix family {other:?}"))),
    }
}

pub fn run(cfg: &ResolvedConfig, verbose: bool) -> Result<(), RunError> {
    let p: ManifoldParams = cfg.params_as()?;
    if p.center.len() != p.n {
        return Err(RunError::Validation(format!(
            "center has {} coordinates but n = {}",
            p.center.len(),
            p.n
        )));
    }
    if p.n < 2 || p.d < 1 {
        return Err(RunError::Validation("need n >= 2 and d >= 1".into()));
    }
    if !(p.radius > 0.0 && p.alpha > 0.0 && p.beta > 0.0 && p.gamma > 0.0) {
        return Err(RunError::Validation("radius and weights must be positive".into()));
    }
    if p.contraction_sigmas.iter().any(|&s| s <= 0.0) || p.contraction_pairs < 1 {
        return Err(RunError::Validation("contraction sigmas and pairs must be positive".into()));
    }
    let alg = match p.algorithm.as_str() {
        "pgd" => GrowthAlg::Pgd,
        "hqs" => GrowthAlg::Hqs,
        other => return Err(RunError::Validation(format!("unknown algorithm {other:?}"))),
    };
    write_resolved(cfg, &p)?;

    let manifold = SphereManifold::new(p.center.clone(), p.radius);
    let a = build_matrix(&p, &mut Rng::new(cfg.seed.wrapping_add(1)))?;
    let d_obs = a.rows;

    // A throwaway problem at a microscopic step exposes sigma_max, so an
    // unstable configured step becomes a validation error, not a panic.
    let probe = InverseProblem::new(
        a.clone(),
        vec![0.0; d_obs],
        p.alpha,
        p.beta,
        1e-12,
        &manifold,
        &mut Rng::new(cfg.seed),
    );
    if p.gamma * probe.sigma_max * probe.sigma_max >= 2.0 {
        return Err(RunError::Validation(format!(
            "gamma = {} is unstable for this operator: gamma * sigma_max^2 = {}",
            p.gamma,
            p.gamma * probe.sigma_max * probe.sigma_max
        )));
    }
    let prob = InverseProblem::new(
        a,
        vec![0.0; d_obs],
        p.alpha,
        p.beta,
        p.gamma,
        &manifold,
        &mut Rng::new(cfg.seed),
    );

    let gcfg = GrowthConfig {
        n_samples: p.n_samples,
        t_max: p.t_max,
        alg,
        kernel_mix: p.kernel_mix.clone(),
        perturb_size: p.perturb_size,
        noise_scale: p.noise_scale,
        band: p.band,
        seed: cfg.seed,
    };
    let result = lipschitz_growth_experiment(&prob, &manifold, &gcfg)
        .map_err(|e| RunError::Numerical(format!("growth experiment failed: {e}")))?;

    let path = cfg.out.join("growth_curve.csv");
    let mut w = csv_writer(&path)?;
    fixlab_core::lipschitz::write_curves_csv(&mut w, &result.rows, &result.labels)
        .map_err(|e| io_fail(&path, e))?;
    w.flush().map_err(|e| io_fail(&path, e))?;

    // The residual-contraction certificate on this experiment's sphere.
    let path = cfg.out.join("contraction.csv");
    let mut w = csv_writer(&path)?;
    writeln!(w, "sigma,sampled_ratio,bound,pass").map_err(|e| io_fail(&path, e))?;
    let mut crng = Rng::new(cfg.seed.wrapping_add(2));
    let mut contraction_bound_pass = true;
    for &sigma in &p.contraction_sigmas {
        let ratio = prox_residual_lipschitz(
            &manifold,
            sigma,
            p.radius / 4.0,
            p.contraction_pairs,
            &mut crng,
        );
        let bound = sigma / (1.0 + sigma) + 1e-9;
        let ok = ratio <= bound;
        contraction_bound_pass &= ok;
        writeln!(w, "{},{},{},{}", sig9(sigma), sig9(ratio), sig9(bound), u8::from(ok))
            .map_err(|e| io_fail(&path, e))?;
    }
    w.flush().map_err(|e| io_fail(&path, e))?;

    let first = result.rows.first().expect("t_max >= 1 guarantees a row");
    let last = result.rows.last().expect("t_max >= 1 guarantees a row");
    let l1_max = first.l_t.iter().cloned().fold(0.0f64, f64::max);
    let lt_max = last.l_t.iter().cloned().fold(0.0f64, f64::max);
    let growth_ratio = if l1_max > 0.0 { lt_max / l1_max } else { f64::INFINITY };
    let summary = ManifoldSummary {
        algorithm: p.algorithm.clone(),
        matrix: p.matrix.clone(),
        sigma: prob.sigma,
        sigma_max: prob.sigma_max,
        mu: prob.mu,
        l: prob.l,
        noise_bound: result.noise_bound,
        noise_used: result.noise_used,
        l1_max,
        lt_max,
        growth_ratio,
        e_first: first.e_mean,
        e_last: last.e_mean,
        growth_pass: lt_max > l1_max && growth_ratio >= 3.0,
        error_decay_pass: last.e_mean <= 0.5 * first.e_mean,
        contraction_bound_pass,
    };
    note(
        verbose,
        &format!(
            "manifold: L {l1_max:.3} -> {lt_max:.3}, E {:.4} -> {:.4}, contraction {}",
            first.e_mean, last.e_mean, contraction_bound_pass
        ),
    );
    write_summary(
        &cfg.out,
        cfg.kind.label(),
        cfg.seed,
        &["growth_curve.csv", "contraction.csv"],
        summary,
    )
}

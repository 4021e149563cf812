//! The constructed damping operator end to end: profile and epsilon curves,
//! fixed points against the target, sampled contraction moduli, and the
//! Lipschitz growth of the iterate map toward the target's own constant.
//!
//! The operator is affine in y, so the t-step iterate from zero has the
//! exact closed form `y_t(x) = F(x)(1 - (1 - eps(x))^t)`. Growth is read
//! from that form at doubling checkpoints (stepping to the interesting t
//! near the singular boundary would take ~1e7 applications per grid point),
//! and the first checkpoints are cross-checked against literal stepping.

use std::io::Write;

use fixlab_core::fixpoint::{anderson_solve, estimate_contraction_modulus, SolveConfig};
use fixlab_core::numerics::{sig9, Rng};
use fixlab_regular::{RegularOperator1D, Target1D};
use serde::{Deserialize, Serialize};

use crate::artifacts::{csv_writer, io_fail, note, write_summary};
use crate::config::{write_resolved, ResolvedConfig};
use crate::RunError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegularParams {
    /// One of the shipped target names: reciprocal, tan, log, sqrt.
    pub target: String,
    /// Grid resolution of the damping profile build.
    pub resolution: usize,
    /// Optional cap on the profile radius; the domain diameter otherwise.
    pub r_max: Option<f64>,
    /// Fixed-point grid size across the domain.
    pub eval_points: usize,
    pub tol: f64,
    /// Growth checkpoints are t = 1, 2, 4, ..., 2^(growth_levels - 1).
    pub growth_levels: usize,
    /// Checkpoints up to 2^consistency_levels are also literally stepped.
    pub consistency_levels: usize,
}

impl Default for RegularParams {
    fn default() -> Self {
        RegularParams {
            target: "reciprocal".into(),
            resolution: 800,
            r_max: None,
            eval_points: 200,
            tol: 1e-10,
            growth_levels: 25,
            consistency_levels: 13,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RegularSummary {
    pub target: String,
    pub eval_points: usize,
    pub max_fixed_point_error: f64,
    pub max_modulus_error: f64,
    pub lip_epsilon: f64,
    pub lip_f: f64,
    pub lip_y_final: f64,
    pub growth_ratio: f64,
    /// Largest closed-form vs stepped gap over the cross-checked prefix.
    pub consistency_gap: f64,
    /// First checkpoint t at which every grid point's residual is under tol.
    pub converged_t: Option<usize>,
    pub fixed_point_pass: bool,
    pub modulus_pass: bool,
    pub epsilon_lipschitz_pass: bool,
    pub growth_monotone_pass: bool,
    pub growth_pass: bool,
}

/// Max difference quotient over consecutive grid points.
fn max_quotient(xs: &[f64], ys: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for k in 1..xs.len() {
        worst = worst.max((ys[k] - ys[k - 1]).abs() / (xs[k] - xs[k - 1]));
    }
    worst
}

pub fn run(cfg: &ResolvedConfig, verbose: bool) -> Result<(), RunError> {
    let p: RegularParams = cfg.params_as()?;
    if p.eval_points < 2 {
        return Err(RunError::Validation("eval_points must be at least 2".into()));
    }
    if p.tol <= 0.0 {
        return Err(RunError::Validation("tol must be positive".into()));
    }
    if p.growth_levels < 1 || p.growth_levels > 31 || p.consistency_levels > p.growth_levels {
        return Err(RunError::Validation(
            "need 1 <= growth_levels <= 31 and consistency_levels <= growth_levels".into(),
        ));
    }
    let target = Target1D::by_name(&p.target)
        .ok_or_else(|| RunError::Validation(format!("unknown target {:?}", p.target)))?;
    write_resolved(cfg, &p)?;

    let op = RegularOperator1D::build(target, p.resolution, p.r_max)
        .map_err(|e| RunError::Validation(format!("profile build failed: {e}")))?;

    let path = cfg.out.join("profile.csv");
    let mut w = csv_writer(&path)?;
    op.write_profile_csv(&mut w).map_err(|e| io_fail(&path, e))?;
    w.flush().map_err(|e| io_fail(&path, e))?;

    let path = cfg.out.join("epsilon.csv");
    let mut w = csv_writer(&path)?;
    op.write_epsilon_csv(&mut w).map_err(|e| io_fail(&path, e))?;
    w.flush().map_err(|e| io_fail(&path, e))?;

    // Fixed points and moduli across the evaluation grid. The accelerated
    // solver is exact on affine maps, so it certifies the fixed point even
    // where the contraction margin collapses near the singular set.
    let xs = op.target().sample_grid(p.eval_points);
    let solver = SolveConfig { max_iter: 10_000, tol: p.tol, ..Default::default() };
    let mut rng = Rng::new(cfg.seed);
    let mut max_fp_err = 0.0f64;
    let mut max_mod_err = 0.0f64;
    let path = cfg.out.join("fixed_points.csv");
    let mut w = csv_writer(&path)?;
    writeln!(w, "x,y_star,f_x,abs_err,modulus,modulus_predicted").map_err(|e| io_fail(&path, e))?;
    for &x in &xs {
        let trace = anderson_solve(&op, &[x], &[0.0], &solver)
            .map_err(|e| RunError::Numerical(format!("solve failed at x = {x}: {e}")))?;
        if !trace.converged {
            return Err(RunError::Numerical(format!("no convergence at x = {x}")));
        }
        let y_star = trace.final_iterate()[0];
        let fx = op.target().eval(x);
        let abs_err = (y_star - fx).abs();
        let modulus = estimate_contraction_modulus(&op, &[x], 50, &mut rng);
        let predicted = 1.0 - op.epsilon(x).map_err(|e| RunError::Validation(e.to_string()))?;
        max_fp_err = max_fp_err.max(abs_err);
        max_mod_err = max_mod_err.max((modulus - predicted).abs());
        writeln!(
            w,
            "{},{},{},{},{},{}",
            sig9(x),
            sig9(y_star),
            sig9(fx),
            sig9(abs_err),
            sig9(modulus),
            sig9(predicted)
        )
        .map_err(|e| io_fail(&path, e))?;
    }
    w.flush().map_err(|e| io_fail(&path, e))?;

    let dense = op.target().sample_grid(1_000);
    let eps_dense: Vec<f64> = dense
        .iter()
        .map(|&x| op.epsilon(x).expect("grid point left the domain"))
        .collect();
    let lip_epsilon = max_quotient(&dense, &eps_dense);

    // Iterate-Lipschitz growth along the fixed-point grid.
    let f: Vec<f64> = xs.iter().map(|&x| op.target().eval(x)).collect();
    let q: Vec<f64> = xs
        .iter()
        .map(|&x| 1.0 - op.epsilon(x).expect("grid point left the domain"))
        .collect();
    let lip_f = max_quotient(&xs, &f);

    let path = cfg.out.join("iterate_growth.csv");
    let mut w = csv_writer(&path)?;
    writeln!(w, "t,l_yt,residual_bound,all_converged").map_err(|e| io_fail(&path, e))?;
    let mut stepped: Vec<f64> = vec![0.0; xs.len()];
    let mut stepped_t = 0usize;
    let mut consistency_gap = 0.0f64;
    let mut lips = Vec::with_capacity(p.growth_levels);
    let mut converged_t = None;
    for level in 0..p.growth_levels {
        let t = 1usize << level;
        let y_t: Vec<f64> =
            (0..xs.len()).map(|k| f[k] * (1.0 - q[k].powi(t as i32))).collect();
        if level <= p.consistency_levels {
            for (yk, &x) in stepped.iter_mut().zip(&xs) {
                for _ in stepped_t..t {
                    *yk = op.apply_scalar(*yk, x).expect("grid point left the domain");
                }
            }
            stepped_t = t;
            for k in 0..xs.len() {
                consistency_gap = consistency_gap.max((stepped[k] - y_t[k]).abs());
            }
        }
        let l_yt = max_quotient(&xs, &y_t);
        lips.push(l_yt);
        let mut residual_bound = 0.0f64;
        for k in 0..xs.len() {
            residual_bound =
                residual_bound.max((1.0 - q[k]) * q[k].powi(t as i32 - 1) * f[k].abs());
        }
        let all_converged = residual_bound <= p.tol;
        if all_converged && converged_t.is_none() {
            converged_t = Some(t);
        }
        writeln!(
            w,
            "{},{},{},{}",
            t,
            sig9(l_yt),
            sig9(residual_bound),
            u8::from(all_converged)
        )
        .map_err(|e| io_fail(&path, e))?;
    }
    w.flush().map_err(|e| io_fail(&path, e))?;

    let lip_y_final = *lips.last().unwrap();
    let growth_monotone_pass = lips.windows(2).all(|w| w[1] >= 0.95 * w[0]);
    let growth_ratio = lip_y_final / lip_f;
    let summary = RegularSummary {
        target: p.target.clone(),
        eval_points: p.eval_points,
        max_fixed_point_error: max_fp_err,
        max_modulus_error: max_mod_err,
        lip_epsilon,
        lip_f,
        lip_y_final,
        growth_ratio,
        consistency_gap,
        converged_t,
        fixed_point_pass: max_fp_err <= 1e-6,
        modulus_pass: max_mod_err <= 1e-8,
        epsilon_lipschitz_pass: lip_epsilon <= 1.0 + 1e-6,
        growth_monotone_pass,
        growth_pass: growth_monotone_pass && growth_ratio >= 0.98,
    };
    note(
        verbose,
        &format!(
            "regular-op: fp err {max_fp_err:.2e}, growth {:.3} of target constant",
            summary.growth_ratio
        ),
    );
    write_summary(
        &cfg.out,
        cfg.kind.label(),
        cfg.seed,
        &["profile.csv", "epsilon.csv", "fixed_points.csv", "iterate_growth.csv"],
        summary,
    )
}

//! Solver bench: Picard against Anderson on a grid of inputs, counting
//! iterations to tolerance and the gap between the two answers.

use std::io::Write;

use fixlab_core::fixpoint::{anderson_solve, picard_solve, ImplicitOp, SolveConfig};
use fixlab_core::numerics::{dist, sig9};
use fixlab_regular::{ReciprocalOp, RegularOperator1D, Target1D};
use serde::{Deserialize, Serialize};

use crate::artifacts::{csv_writer, io_fail, note, write_summary};
use crate::config::{write_resolved, ResolvedConfig};
use crate::RunError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchParams {
    /// "constructive" or "reciprocal".
    pub operator: String,
    pub target: String,
    pub resolution: usize,
    pub eta: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub anderson_depth: usize,
    pub anderson_mixing: f64,
}

impl Default for BenchParams {
    fn default() -> Self {
        BenchParams {
            operator: "constructive".into(),
            target: "reciprocal".into(),
            resolution: 800,
            eta: 0.5,
            x_min: 0.1,
            x_max: 1.0,
            n_points: 50,
            tol: 1e-10,
            max_iter: 100_000,
            anderson_depth: 5,
            anderson_mixing: 1.0,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BenchSummary {
    pub operator: String,
    pub n_points: usize,
    pub tol: f64,
    pub picard_mean_iters: f64,
    pub picard_max_iters: usize,
    pub anderson_mean_iters: f64,
    pub anderson_max_iters: usize,
    pub all_converged: bool,
    /// Largest distance between the two solvers' answers.
    pub max_gap: f64,
    /// Mean Picard iterations over mean Anderson iterations.
    pub speedup: f64,
}

pub fn run(cfg: &ResolvedConfig, verbose: bool) -> Result<(), RunError> {
    let p: BenchParams = cfg.params_as()?;
    if !(p.x_min < p.x_max) || p.n_points < 1 {
        return Err(RunError::Validation("need x_min < x_max and n_points >= 1".into()));
    }
    if !(p.tol > 0.0) || p.max_iter < 1 {
        return Err(RunError::Validation("need tol > 0 and max_iter >= 1".into()));
    }
    let (op, target): (Box<dyn ImplicitOp>, Target1D) = match p.operator.as_str() {
        "constructive" => {
            let t = Target1D::by_name(&p.target)
                .ok_or_else(|| RunError::Validation(format!("unknown target {:?}", p.target)))?;
            let built = RegularOperator1D::build(t, p.resolution, None)
                .map_err(|e| RunError::Validation(format!("profile build failed: {e}")))?;
            let t = Target1D::by_name(&p.target).expect("name resolved above");
            (Box::new(built), t)
        }
        "reciprocal" => {
            if !(p.eta > 0.0 && p.eta < 1.0) {
                return Err(RunError::Validation(format!("eta must be in (0, 1), got {}", p.eta)));
            }
            (Box::new(ReciprocalOp::new(p.eta)), Target1D::reciprocal())
        }
        other => return Err(RunError::Validation(format!("unknown operator {other:?}"))),
    };
    write_resolved(cfg, &p)?;

    let solve_cfg = SolveConfig {
        max_iter: p.max_iter,
        tol: p.tol,
        anderson_depth: p.anderson_depth,
        anderson_mixing: p.anderson_mixing,
    };
    let path = cfg.out.join("bench.csv");
    let mut w = csv_writer(&path)?;
    writeln!(
        w,
        "x,picard_iters,picard_residual,picard_converged,\
         anderson_iters,anderson_residual,anderson_converged,solution_gap"
    )
    .map_err(|e| io_fail(&path, e))?;

    let mut pic_total = 0usize;
    let mut pic_max = 0usize;
    let mut and_total = 0usize;
    let mut and_max = 0usize;
    let mut all_converged = true;
    let mut max_gap = 0.0f64;
    for k in 0..p.n_points {
        let x = if p.n_points == 1 {
            p.x_min
        } else {
            p.x_min + (p.x_max - p.x_min) * k as f64 / (p.n_points - 1) as f64
        };
        if !target.contains(x) {
            return Err(RunError::Validation(format!("bench point x = {x} leaves the domain")));
        }
        let pic = picard_solve(op.as_ref(), &[x], &[0.0], &solve_cfg)
            .map_err(|e| RunError::Numerical(format!("picard at x = {x}: {e}")))?;
        let and = anderson_solve(op.as_ref(), &[x], &[0.0], &solve_cfg)
            .map_err(|e| RunError::Numerical(format!("anderson at x = {x}: {e}")))?;
        let gap = dist(pic.final_iterate(), and.final_iterate());
        pic_total += pic.iterations;
        pic_max = pic_max.max(pic.iterations);
        and_total += and.iterations;
        and_max = and_max.max(and.iterations);
        all_converged &= pic.converged && and.converged;
        max_gap = max_gap.max(gap);
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            sig9(x),
            pic.iterations,
            sig9(*pic.residuals.last().expect("max_iter >= 1")),
            u8::from(pic.converged),
            and.iterations,
            sig9(*and.residuals.last().expect("max_iter >= 1")),
            u8::from(and.converged),
            sig9(gap)
        )
        .map_err(|e| io_fail(&path, e))?;
    }
    w.flush().map_err(|e| io_fail(&path, e))?;

    let n = p.n_points as f64;
    let summary = BenchSummary {
        operator: p.operator.clone(),
        n_points: p.n_points,
        tol: p.tol,
        picard_mean_iters: pic_total as f64 / n,
        picard_max_iters: pic_max,
        anderson_mean_iters: and_total as f64 / n,
        anderson_max_iters: and_max,
        all_converged,
        max_gap,
        speedup: pic_total as f64 / (and_total as f64).max(1.0),
    };
    note(
        verbose,
        &format!(
            "solver-bench: picard mean {:.1}, anderson mean {:.1}, max gap {:.2e}",
            summary.picard_mean_iters, summary.anderson_mean_iters, summary.max_gap
        ),
    );
    write_summary(&cfg.out, cfg.kind.label(), cfg.seed, &["bench.csv"], summary)
}

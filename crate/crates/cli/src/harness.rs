//! Lipschitz-curve runner for the scalar operators: a grid of inputs with
//! shifted twins, exact t-step trajectories from zero, and the resulting
//! L_t / E_t curves against the target's own empirical constant.

use std::io::Write;

use fixlab_core::fixpoint::{iterate_exactly, ImplicitOp};
use fixlab_core::lipschitz::{curve_threaded, empirical_lipschitz, write_curves_csv, PairedDataset};
use fixlab_regular::{NaiveOp, ReciprocalOp, RegularOperator1D, Target1D};
use serde::{Deserialize, Serialize};

use crate::artifacts::{csv_writer, io_fail, note, write_summary};
use crate::config::{write_resolved, ResolvedConfig};
use crate::RunError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurveParams {
    /// "constructive" (the damping construction), "reciprocal" (the 1/x
    /// refinement step), or "averaging" (plain relaxation toward F).
    pub operator: String,
    /// Target name for the constructive and averaging operators.
    pub target: String,
    pub resolution: usize,
    /// Stepsize for the reciprocal and averaging operators.
    pub eta: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub n_samples: usize,
    /// Perturbation offsets; one curve mode per entry.
    pub offsets: Vec<f64>,
    pub t_max: usize,
}

impl Default for CurveParams {
    fn default() -> Self {
        CurveParams {
            operator: "constructive".into(),
            target: "reciprocal".into(),
            resolution: 800,
            eta: 0.5,
            x_min: 0.1,
            x_max: 0.98,
            n_samples: 100,
            offsets: vec![0.01, 0.001],
            t_max: 30,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CurveSummary {
    pub operator: String,
    pub n_samples: usize,
    pub t_max: usize,
    pub labels: Vec<String>,
    pub l_first: Vec<f64>,
    pub l_final: Vec<f64>,
    /// Empirical constant of the target map over the same pairs.
    pub lip_target: f64,
    /// Largest final-mode constant relative to the target's.
    pub growth_ratio: f64,
    pub monotone_pass: bool,
}

pub fn run(cfg: &ResolvedConfig, threads: usize, verbose: bool) -> Result<(), RunError> {
    let p: CurveParams = cfg.params_as()?;
    if !(p.x_min < p.x_max) || p.n_samples < 1 || p.t_max < 1 {
        return Err(RunError::Validation(
            "need x_min < x_max, n_samples >= 1, and t_max >= 1".into(),
        ));
    }
    if p.offsets.is_empty() || p.offsets.iter().any(|&d| d == 0.0) {
        return Err(RunError::Validation("offsets must be nonempty and nonzero".into()));
    }

    // The target map provides both the reference outputs y* and, for the
    // averaging operator, the function being relaxed toward.
    let (op, target): (Box<dyn ImplicitOp + Sync>, Target1D) = match p.operator.as_str() {
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
        "averaging" => {
            if !(p.eta > 0.0 && p.eta < 1.0) {
                return Err(RunError::Validation(format!("eta must be in (0, 1), got {}", p.eta)));
            }
            let t = Target1D::by_name(&p.target)
                .ok_or_else(|| RunError::Validation(format!("unknown target {:?}", p.target)))?;
            let inner = Target1D::by_name(&p.target).expect("name resolved above");
            let op = NaiveOp::new(1, 1, p.eta, move |x: &[f64]| vec![inner.eval(x[0])]);
            (Box::new(op), t)
        }
        other => return Err(RunError::Validation(format!("unknown operator {other:?}"))),
    };
    write_resolved(cfg, &p)?;

    let mut originals = Vec::with_capacity(p.n_samples);
    let mut perturbed = Vec::with_capacity(p.n_samples);
    let labels: Vec<String> = p.offsets.iter().map(|d| format!("shift{d}")).collect();
    for k in 0..p.n_samples {
        let x = if p.n_samples == 1 {
            p.x_min
        } else {
            p.x_min + (p.x_max - p.x_min) * k as f64 / (p.n_samples - 1) as f64
        };
        if !target.contains(x) {
            return Err(RunError::Validation(format!("sample x = {x} leaves the domain")));
        }
        originals.push((vec![x], vec![target.eval(x)]));
        let mut row = Vec::with_capacity(p.offsets.len());
        for &d in &p.offsets {
            let xs = x + d;
            if !target.contains(xs) {
                return Err(RunError::Validation(format!(
                    "shifted sample x = {xs} leaves the domain; tighten x_max or the offsets"
                )));
            }
            row.push((vec![xs], vec![target.eval(xs)]));
        }
        perturbed.push(row);
    }
    let ds = PairedDataset::new(originals, perturbed, labels);

    // Surface operator failures before the harness runs; its trajectory
    // closure has no error channel.
    for i in 0..ds.n_samples() {
        for j in 0..=ds.n_modes() {
            iterate_exactly(op.as_ref(), ds.pair(i, j).0, &[0.0], p.t_max)
                .map_err(|e| RunError::Numerical(format!("sample ({i}, {j}): {e}")))?;
        }
    }
    let traj = |x: &[f64]| {
        iterate_exactly(op.as_ref(), x, &[0.0], p.t_max).expect("trajectories were validated")
    };
    let rows = curve_threaded(traj, &ds, p.t_max, None, threads.max(1));

    let path = cfg.out.join("curve.csv");
    let mut w = csv_writer(&path)?;
    write_curves_csv(&mut w, &rows, ds.labels()).map_err(|e| io_fail(&path, e))?;
    w.flush().map_err(|e| io_fail(&path, e))?;

    let mut lip_target = 0.0f64;
    for j in 1..=ds.n_modes() {
        lip_target = lip_target.max(empirical_lipschitz(
            |x: &[f64]| vec![target.eval(x[0])],
            &ds,
            j,
        ));
    }
    let first = rows.first().expect("t_max >= 1 yields a row");
    let last = rows.last().expect("t_max >= 1 yields a row");
    let mut monotone_pass = true;
    for j in 0..ds.n_modes() {
        for w in rows.windows(2) {
            monotone_pass &= w[1].l_t[j] >= 0.95 * w[0].l_t[j];
        }
    }
    let l_final_max = last.l_t.iter().cloned().fold(0.0f64, f64::max);
    let summary = CurveSummary {
        operator: p.operator.clone(),
        n_samples: p.n_samples,
        t_max: p.t_max,
        labels: ds.labels().to_vec(),
        l_first: first.l_t.clone(),
        l_final: last.l_t.clone(),
        lip_target,
        growth_ratio: l_final_max / lip_target,
        monotone_pass,
    };
    note(
        verbose,
        &format!(
            "lipschitz-curve: final constant {:.4} vs target {:.4}",
            l_final_max, lip_target
        ),
    );
    write_summary(&cfg.out, cfg.kind.label(), cfg.seed, &["curve.csv"], summary)
}

//! The 1/x warm-up: iterate `y <- y - eta(xy - 1)` from zero across a grid
//! of inputs and compare the measured error against its geometric closed
//! form `|1 - eta x|^t / x`.

use std::io::Write;

use fixlab_core::numerics::sig9;
use fixlab_regular::reciprocal_op;
use serde::{Deserialize, Serialize};

use crate::artifacts::{csv_writer, io_fail, note, write_summary};
use crate::config::{write_resolved, ResolvedConfig};
use crate::RunError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReciprocalParams {
    pub eta: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub grid: usize,
    pub t_max: usize,
}

impl Default for ReciprocalParams {
    fn default() -> Self {
        ReciprocalParams { eta: 0.5, x_min: 0.05, x_max: 1.0, grid: 50, t_max: 30 }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReciprocalSummary {
    pub eta: f64,
    pub grid: usize,
    pub t_max: usize,
    /// Largest gap between the measured error and the closed form.
    pub max_discrepancy: f64,
    pub closed_form_pass: bool,
}

pub fn run(cfg: &ResolvedConfig, verbose: bool) -> Result<(), RunError> {
    let p: ReciprocalParams = cfg.params_as()?;
    if !(p.eta > 0.0 && p.eta < 1.0) {
        return Err(RunError::Validation(format!("eta must be in (0, 1), got {}", p.eta)));
    }
    if !(p.x_min > 0.0 && p.x_min < p.x_max) {
        return Err(RunError::Validation(format!(
            "need 0 < x_min < x_max, got [{}, {}]",
            p.x_min, p.x_max
        )));
    }
    if p.grid < 2 || p.t_max < 1 {
        return Err(RunError::Validation("need grid >= 2 and t_max >= 1".into()));
    }
    write_resolved(cfg, &p)?;

    let csv_path = cfg.out.join("reciprocal.csv");
    let mut w = csv_writer(&csv_path)?;
    writeln!(w, "x,t,y_t,abs_err,predicted_err").map_err(|e| io_fail(&csv_path, e))?;

    let mut max_discrepancy = 0.0f64;
    for k in 0..p.grid {
        let x = p.x_min + (p.x_max - p.x_min) * k as f64 / (p.grid - 1) as f64;
        let target = 1.0 / x;
        let rate = (1.0 - p.eta * x).abs();
        let mut y = 0.0;
        for t in 1..=p.t_max {
            y = reciprocal_op(y, x, p.eta);
            if !y.is_finite() {
                return Err(RunError::Numerical(format!(
                    "iterate diverged at x = {x}, t = {t}"
                )));
            }
            let abs_err = (y - target).abs();
            let predicted = rate.powi(t as i32) * target.abs();
            max_discrepancy = max_discrepancy.max((abs_err - predicted).abs());
            writeln!(
                w,
                "{},{},{},{},{}",
                sig9(x),
                t,
                sig9(y),
                sig9(abs_err),
                sig9(predicted)
            )
            .map_err(|e| io_fail(&csv_path, e))?;
        }
    }
    w.flush().map_err(|e| io_fail(&csv_path, e))?;

    let summary = ReciprocalSummary {
        eta: p.eta,
        grid: p.grid,
        t_max: p.t_max,
        max_discrepancy,
        closed_form_pass: max_discrepancy <= 1e-12,
    };
    note(verbose, &format!("reciprocal-demo: max closed-form gap {max_discrepancy:.3e}"));
    write_summary(&cfg.out, cfg.kind.label(), cfg.seed, &["reciprocal.csv"], summary)
}

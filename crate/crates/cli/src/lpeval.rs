//! Evaluates a trained checkpoint on the test split: per-block empirical
//! Lipschitz and relative-error curves over the unroll depth, using the
//! flat instance encoding as the input space.

use std::io::Write;
use std::path::PathBuf;

use fixlab_core::lipschitz::{
    curve_threaded, relative_error, write_curves_csv, PairedDataset, REL_ERR_EPS,
};
use fixlab_gnn::{encode_graph, evaluate, load_gnn, readout, GnnMode};
use serde::{Deserialize, Serialize};

use crate::artifacts::{csv_writer, io_fail, note, write_summary};
use crate::codec::{decode_instance, encode_instance};
use crate::config::{write_resolved, ResolvedConfig};
use crate::lpdata::{load_manifest, load_split};
use crate::RunError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LpEvalParams {
    pub dataset: Option<PathBuf>,
    /// Directory holding the checkpoint written by lp-train.
    pub checkpoint: Option<PathBuf>,
    pub name: String,
    pub inference_t: usize,
    /// Include PSNR columns with this peak value when set.
    pub psnr_max: Option<f64>,
}

impl Default for LpEvalParams {
    fn default() -> Self {
        LpEvalParams {
            dataset: None,
            checkpoint: None,
            name: "model".into(),
            inference_t: 8,
            psnr_max: None,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LpEvalSummary {
    pub n_test: usize,
    pub inference_t: usize,
    pub labels: Vec<String>,
    pub l_first: Vec<f64>,
    pub l_last: Vec<f64>,
    /// How many perturbation blocks at least doubled their constant.
    pub blocks_doubled: usize,
    pub e_first: f64,
    pub e_last: f64,
    pub error_decay_pass: bool,
    /// Mean relative error over unperturbed test instances at full depth.
    pub test_relerr_at_inference: f64,
}

pub fn run(cfg: &ResolvedConfig, threads: usize, verbose: bool) -> Result<(), RunError> {
    let p: LpEvalParams = cfg.params_as()?;
    let dataset = p
        .dataset
        .as_ref()
        .ok_or_else(|| RunError::Validation("lp-eval needs a \"dataset\" path".into()))?;
    let checkpoint = p
        .checkpoint
        .as_ref()
        .ok_or_else(|| RunError::Validation("lp-eval needs a \"checkpoint\" path".into()))?;
    if p.inference_t < 1 {
        return Err(RunError::Validation("inference_t must be at least 1".into()));
    }
    write_resolved(cfg, &p)?;

    let manifest = load_manifest(dataset)?;
    let (n, m, nnz) = (manifest.n, manifest.m, manifest.nnz);
    let params = load_gnn(checkpoint, &p.name)
        .map_err(|e| RunError::Validation(format!("loading checkpoint: {e}")))?;

    let (test_insts, test_sols) = load_split(&dataset.join("test"), manifest.n_test)?;
    let mut originals = Vec::with_capacity(manifest.n_test);
    for (inst, sol) in test_insts.iter().zip(&test_sols) {
        if inst.n != n || inst.m != m || inst.a.len() != nnz {
            return Err(RunError::Validation("test instance shape disagrees with manifest".into()));
        }
        originals.push((encode_instance(inst), sol.y.clone()));
    }
    let mut perturbed: Vec<Vec<(Vec<f64>, Vec<f64>)>> =
        (0..manifest.n_test).map(|_| Vec::with_capacity(manifest.blocks.len())).collect();
    for block in &manifest.blocks {
        let (insts, sols) = load_split(&dataset.join("perturbed").join(block), manifest.n_test)?;
        for (i, (inst, sol)) in insts.iter().zip(&sols).enumerate() {
            if inst.a.len() != nnz {
                return Err(RunError::Validation(format!(
                    "perturbed instance {i} of block {block} changed the sparsity pattern"
                )));
            }
            perturbed[i].push((encode_instance(inst), sol.y.clone()));
        }
    }
    let ds = PairedDataset::new(originals, perturbed, manifest.blocks.clone());
    note(verbose, &format!("lp-eval: {} samples x {} modes", ds.n_samples(), ds.n_modes()));

    // The curve harness has no error channel, so every (i, j) trajectory is
    // validated once up front; failures surface as numerical errors.
    for i in 0..ds.n_samples() {
        for j in 0..=ds.n_modes() {
            let g = encode_graph(&decode_instance(ds.pair(i, j).0, n, m, nnz));
            evaluate(&params, std::slice::from_ref(&g), p.inference_t).map_err(|e| {
                RunError::Numerical(format!("model failed on sample ({i}, {j}): {e}"))
            })?;
        }
    }

    let traj = |x: &[f64]| -> Vec<Vec<f64>> {
        let g = encode_graph(&decode_instance(x, n, m, nnz));
        let rows = evaluate(&params, std::slice::from_ref(&g), p.inference_t)
            .expect("trajectories were validated")
            .pop()
            .expect("one graph in, one row list out");
        let y0 = match params.mode {
            GnnMode::Implicit => readout(&params, &vec![0.0; g.n_var]),
            GnnMode::Explicit => rows[0].clone(),
        };
        let mut out = Vec::with_capacity(rows.len() + 1);
        out.push(y0);
        out.extend(rows);
        out
    };
    let rows = curve_threaded(traj, &ds, p.inference_t, p.psnr_max, threads.max(1));

    let path = cfg.out.join("eval_curve.csv");
    let mut w = csv_writer(&path)?;
    write_curves_csv(&mut w, &rows, ds.labels()).map_err(|e| io_fail(&path, e))?;
    w.flush().map_err(|e| io_fail(&path, e))?;

    let mut rel_sum = 0.0;
    for (inst, sol) in test_insts.iter().zip(&test_sols) {
        let g = encode_graph(inst);
        let preds = evaluate(&params, std::slice::from_ref(&g), p.inference_t)
            .expect("trajectories were validated");
        rel_sum += relative_error(preds[0].last().expect("inference_t >= 1"), &sol.y, REL_ERR_EPS);
    }
    let test_relerr_at_inference = rel_sum / test_insts.len() as f64;

    let first = rows.first().expect("inference_t >= 1 yields a row");
    let last = rows.last().expect("inference_t >= 1 yields a row");
    let blocks_doubled = first
        .l_t
        .iter()
        .zip(&last.l_t)
        .filter(|&(&l1, &lt)| lt >= 2.0 * l1)
        .count();
    let summary = LpEvalSummary {
        n_test: manifest.n_test,
        inference_t: p.inference_t,
        labels: ds.labels().to_vec(),
        l_first: first.l_t.clone(),
        l_last: last.l_t.clone(),
        blocks_doubled,
        e_first: first.e_mean,
        e_last: last.e_mean,
        error_decay_pass: last.e_mean <= first.e_mean,
        test_relerr_at_inference,
    };
    note(
        verbose,
        &format!(
            "lp-eval: {blocks_doubled}/{} blocks doubled, E {:.4} -> {:.4}",
            summary.labels.len(),
            summary.e_first,
            summary.e_last
        ),
    );
    write_summary(&cfg.out, cfg.kind.label(), cfg.seed, &["eval_curve.csv"], summary)
}

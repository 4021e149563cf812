//! Trains the LP network on a generated dataset and writes the loss log,
//! the checkpoint, and a summary with the error at the inference depth.

use fixlab_core::lipschitz::{relative_error, REL_ERR_EPS};
use fixlab_gnn::{encode_graph, evaluate, save_gnn, train, GnnMode, Stage, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::artifacts::{note, write_summary};
use crate::config::{write_resolved, ResolvedConfig};
use crate::lpdata::{load_manifest, load_split};
use crate::RunError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageParams {
    pub unroll: usize,
    pub lr: f64,
    pub epochs: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LpTrainParams {
    /// Directory produced by lp-generate.
    pub dataset: Option<std::path::PathBuf>,
    /// "implicit" or "explicit".
    pub mode: String,
    pub emb: usize,
    pub layers: usize,
    pub stages: Vec<StageParams>,
    /// 0 trains full batch.
    pub batch_size: usize,
    pub inference_t: usize,
    /// Optional cap on how many training instances are used.
    pub limit: Option<usize>,
}

impl Default for LpTrainParams {
    fn default() -> Self {
        LpTrainParams {
            dataset: None,
            mode: "implicit".into(),
            emb: 8,
            layers: 3,
            stages: vec![
                StageParams { unroll: 3, lr: 1e-2, epochs: 100 },
                StageParams { unroll: 6, lr: 1e-4, epochs: 100 },
            ],
            batch_size: 0,
            inference_t: 8,
            limit: None,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LpTrainSummary {
    pub mode: String,
    pub emb: usize,
    pub layers: usize,
    pub n_train_used: usize,
    pub epochs_total: usize,
    pub inference_t: usize,
    /// Loss the final epoch's gradients saw, at that stage's unroll depth.
    pub final_train_mse: f64,
    pub final_train_relerr: f64,
    /// Mean relative error over the train split at the inference depth.
    pub train_relerr_at_inference: f64,
}

pub fn run(cfg: &ResolvedConfig, verbose: bool) -> Result<(), RunError> {
    let p: LpTrainParams = cfg.params_as()?;
    let dataset = p
        .dataset
        .as_ref()
        .ok_or_else(|| RunError::Validation("lp-train needs a \"dataset\" path".into()))?;
    let mode = GnnMode::from_label(&p.mode)
        .ok_or_else(|| RunError::Validation(format!("unknown mode {:?}", p.mode)))?;
    if p.stages.is_empty() {
        return Err(RunError::Validation("need at least one training stage".into()));
    }
    if p.stages.iter().any(|s| s.unroll < 1 || s.lr < 0.0) {
        return Err(RunError::Validation("stages need unroll >= 1 and lr >= 0".into()));
    }
    if p.stages.iter().map(|s| s.epochs).sum::<usize>() == 0 {
        return Err(RunError::Validation("stages must train at least one epoch".into()));
    }
    if p.inference_t < 1 || p.emb < 1 || p.layers < 2 {
        return Err(RunError::Validation("need inference_t >= 1, emb >= 1, layers >= 2".into()));
    }
    write_resolved(cfg, &p)?;

    let manifest = load_manifest(dataset)?;
    let n_used = p.limit.unwrap_or(manifest.n_train).min(manifest.n_train);
    if n_used == 0 {
        return Err(RunError::Validation("limit leaves no training instances".into()));
    }
    let (insts, sols) = load_split(&dataset.join("train"), n_used)?;
    let graphs: Vec<_> = insts.iter().map(encode_graph).collect();
    let targets: Vec<_> = sols.iter().map(|s| s.y.clone()).collect();
    note(verbose, &format!("lp-train: {} instances loaded, mode {}", n_used, p.mode));

    let tcfg = TrainConfig {
        emb: p.emb,
        layers: p.layers,
        mode,
        stages: p
            .stages
            .iter()
            .map(|s| Stage { unroll: s.unroll, lr: s.lr, epochs: s.epochs })
            .collect(),
        batch_size: p.batch_size,
        seed: cfg.seed,
        inference_t: p.inference_t,
    };
    let (params, history) = train(&graphs, &targets, &tcfg)
        .map_err(|e| RunError::Numerical(format!("training failed: {e}")))?;

    fixlab_gnn::write_loss_csv(&cfg.out.join("loss.csv"), &history)
        .map_err(|e| RunError::Validation(format!("writing loss log: {e}")))?;
    save_gnn(&cfg.out, "model", &params)
        .map_err(|e| RunError::Validation(format!("writing checkpoint: {e}")))?;

    let preds = evaluate(&params, &graphs, p.inference_t)
        .map_err(|e| RunError::Numerical(format!("evaluation failed: {e}")))?;
    let mut rel_sum = 0.0;
    for (rows, target) in preds.iter().zip(&targets) {
        rel_sum += relative_error(rows.last().expect("inference_t >= 1"), target, REL_ERR_EPS);
    }
    let train_relerr_at_inference = rel_sum / graphs.len() as f64;

    let last = history.last().expect("stages train at least one epoch");
    let summary = LpTrainSummary {
        mode: p.mode.clone(),
        emb: p.emb,
        layers: p.layers,
        n_train_used: n_used,
        epochs_total: history.len(),
        inference_t: p.inference_t,
        final_train_mse: last.train_mse,
        final_train_relerr: last.train_relerr,
        train_relerr_at_inference,
    };
    note(
        verbose,
        &format!(
            "lp-train: final mse {:.4e}, relerr at depth {} = {:.4}",
            last.train_mse, p.inference_t, train_relerr_at_inference
        ),
    );
    write_summary(
        &cfg.out,
        cfg.kind.label(),
        cfg.seed,
        &["loss.csv", "model.json", "model.bin"],
        summary,
    )
}

//! Unrolled training with a staged curriculum: a short unroll at a high
//! learning rate first, then a longer unroll at a low one, warm-starting
//! from the first stage. Full batch by default so the gradient is a
//! fixed-order sum over instances; a positive `batch_size` turns on
//! minibatches drawn from a seeded shuffle.

use std::io::Write;
use std::path::Path;

use fixlab_core::lipschitz::{relative_error, REL_ERR_EPS};
use fixlab_core::numerics::{sig9, AdamState, Rng, Vector};

use crate::graph::LpGraph;
use crate::model::{
    mse_grad, mse_loss, readout, unrolled_backward, unrolled_forward, GnnGrads, GnnMode,
    GnnParams,
};
use crate::GnnError;

#[derive(Debug, Clone, Copy)]
pub struct Stage {
    pub unroll: usize,
    pub lr: f64,
    pub epochs: usize,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub emb: usize,
    pub layers: usize,
    pub mode: GnnMode,
    pub stages: Vec<Stage>,
    /// 0 means full batch.
    pub batch_size: usize,
    pub seed: u64,
    /// Unroll length used at evaluation time.
    pub inference_t: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            emb: 8,
            layers: 3,
            mode: GnnMode::Implicit,
            stages: vec![
                Stage { unroll: 3, lr: 1e-2, epochs: 100 },
                Stage { unroll: 6, lr: 1e-4, epochs: 100 },
            ],
            batch_size: 0,
            seed: 0,
            inference_t: 8,
        }
    }
}

/// One line of the training log.
#[derive(Debug, Clone, Copy)]
pub struct LossRow {
    pub epoch: usize,
    pub stage: usize,
    pub train_mse: f64,
    pub train_relerr: f64,
}

/// Trains a fresh network on (graph, target) pairs. The logged loss of each
/// epoch is the value the gradients saw, i.e. measured before that epoch's
/// updates land.
pub fn train(
    graphs: &[LpGraph],
    targets: &[Vector],
    cfg: &TrainConfig,
) -> Result<(GnnParams, Vec<LossRow>), GnnError> {
    assert!(!graphs.is_empty(), "training set is empty");
    assert_eq!(graphs.len(), targets.len());
    for (g, t) in graphs.iter().zip(targets) {
        assert_eq!(g.n_var, t.len(), "target length must match the variable count");
    }

    let n = graphs.len();
    let mut rng = Rng::new(cfg.seed);
    let mut params = GnnParams::xavier(cfg.emb, cfg.layers, cfg.mode, &mut rng);
    let mut flat = params.flat();
    let mut history = Vec::new();
    let mut epoch_global = 0usize;

    for (stage_idx, stage) in cfg.stages.iter().enumerate() {
        assert!(stage.unroll >= 1);
        assert!(stage.lr >= 0.0);
        // optimizer state restarts with each stage; the parameters carry over
        let mut adam = (stage.lr > 0.0).then(|| AdamState::new(flat.len(), stage.lr));
        let batch_len = if cfg.batch_size == 0 { n } else { cfg.batch_size.min(n) };
        let mut order: Vec<usize> = (0..n).collect();

        for _ in 0..stage.epochs {
            rng.shuffle(&mut order);
            let mut mse_sum = 0.0;
            let mut rel_sum = 0.0;
            for batch in order.chunks(batch_len) {
                let mut grads = GnnGrads::zeros_like(&params);
                for &idx in batch {
                    let (y, trace) = unrolled_forward(&params, &graphs[idx], stage.unroll)?;
                    mse_sum += mse_loss(&y, &targets[idx]);
                    rel_sum += relative_error(&y, &targets[idx], REL_ERR_EPS);
                    let mut dy = mse_grad(&y, &targets[idx]);
                    for d in dy.iter_mut() {
                        *d /= batch.len() as f64;
                    }
                    grads.accumulate(&unrolled_backward(&params, &graphs[idx], trace, &dy));
                }
                if let Some(opt) = adam.as_mut() {
                    opt.step(&mut flat, &grads.flat())
                        .map_err(|_| GnnError::Diverged { epoch: epoch_global })?;
                    params.set_flat(&flat);
                }
            }
            let train_mse = mse_sum / n as f64;
            if !train_mse.is_finite() {
                return Err(GnnError::Diverged { epoch: epoch_global });
            }
            history.push(LossRow {
                epoch: epoch_global,
                stage: stage_idx,
                train_mse,
                train_relerr: rel_sum / n as f64,
            });
            epoch_global += 1;
        }
    }
    Ok((params, history))
}

/// Prediction after every unroll depth 1..=t_max, per instance. The explicit
/// model has no iteration, so its rows repeat one prediction.
pub fn evaluate(
    params: &GnnParams,
    graphs: &[LpGraph],
    t_max: usize,
) -> Result<Vec<Vec<Vector>>, GnnError> {
    assert!(t_max >= 1);
    let mut out = Vec::with_capacity(graphs.len());
    for g in graphs {
        let rows = match params.mode {
            GnnMode::Implicit => {
                let mut rows = Vec::with_capacity(t_max);
                let mut z = vec![0.0; g.n_var];
                for t in 1..=t_max {
                    z = crate::model::apply_traced(params, g, Some(&z)).0;
                    if !fixlab_core::numerics::all_finite(&z) {
                        return Err(GnnError::NonFinite { t });
                    }
                    rows.push(readout(params, &z));
                }
                rows
            }
            GnnMode::Explicit => {
                let z = crate::model::apply_traced(params, g, None).0;
                if !fixlab_core::numerics::all_finite(&z) {
                    return Err(GnnError::NonFinite { t: 1 });
                }
                vec![readout(params, &z); t_max]
            }
        };
        out.push(rows);
    }
    Ok(out)
}

/// Writes the log as `epoch,stage,train_mse,train_relerr`.
pub fn write_loss_csv(path: &Path, rows: &[LossRow]) -> Result<(), GnnError> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "epoch,stage,train_mse,train_relerr")?;
    for r in rows {
        writeln!(f, "{},{},{},{}", r.epoch, r.stage, sig9(r.train_mse), sig9(r.train_relerr))?;
    }
    Ok(())
}

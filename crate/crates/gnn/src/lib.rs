//! A bipartite message-passing network over LP instances, usable two ways:
//! as a standard one-shot model, or with an iterated scalar state per
//! variable so the network becomes a fixed-point map. Training unrolls that
//! iteration and backpropagates through every step with hand-derived
//! reverse passes; a Neumann-series routine cross-checks the unrolled
//! gradients against implicit differentiation at the fixed point.

pub mod checkpoint;
pub mod graph;
pub mod implicit;
pub mod model;
pub mod train;

pub use checkpoint::{load_gnn, save_gnn};
pub use graph::{encode_graph, relation_code, relation_from_code, LpGraph};
pub use implicit::{
    neumann_gradient, neumann_series_gradient, AffineToy, FixOpDiff, GnnFixOp, FIXPOINT_MAX_ITERS,
    FIXPOINT_TOL,
};
pub use model::{
    gnn_apply, mse_grad, mse_loss, readout, unrolled_backward, unrolled_forward, ApplyTape,
    ForwardTrace, GnnGrads, GnnMode, GnnParams, RoundGrads, RoundParams,
};
pub use train::{evaluate, train, write_loss_csv, LossRow, Stage, TrainConfig};

#[derive(Debug, thiserror::Error)]
pub enum GnnError {
    #[error("state went non-finite at application {t}")]
    NonFinite { t: usize },
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("forward iteration stuck at residual {residual:.3e} after {iters} steps")]
    NoFixedPoint { residual: f64, iters: usize },
    #[error("checkpoint manifest rejected: {0}")]
    BadManifest(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

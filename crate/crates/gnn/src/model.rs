//! The message-passing core and its hand-derived reverse pass.
//!
//! One application embeds the raw node features, runs L-1 Jacobi rounds over
//! the bipartite graph (both sides read the previous round), and collapses
//! each variable embedding to a scalar state. Edge weights multiply the
//! transformed neighbor message; neighbors are summed in ascending index
//! order, and the backward pass revisits every node in a fixed order, so
//! gradients are bit-reproducible run to run.

use fixlab_core::numerics::{all_finite, Vector};
use fixlab_nn::{mlp_backward, mlp_forward, Mlp2, Mlp2Grads, Tape};

use crate::graph::LpGraph;
use crate::GnnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GnnMode {
    /// Variable embeddings receive a per-node scalar state as a fourth
    /// input feature; iterating the core drives that state to a fixed point.
    Implicit,
    /// No dynamic state; a single pass is the whole model.
    Explicit,
}

impl GnnMode {
    pub fn label(self) -> &'static str {
        match self {
            GnnMode::Implicit => "implicit",
            GnnMode::Explicit => "explicit",
        }
    }

    pub fn from_label(s: &str) -> Option<GnnMode> {
        match s {
            "implicit" => Some(GnnMode::Implicit),
            "explicit" => Some(GnnMode::Explicit),
            _ => None,
        }
    }

    /// Width of the variable-side input embedding.
    pub fn var_in(self) -> usize {
        match self {
            GnnMode::Implicit => 4,
            GnnMode::Explicit => 3,
        }
    }
}

/// One message round: theta2/theta4 transform the sending side, theta1 and
/// theta3 fold the weighted sums into the receiving embeddings.
#[derive(Debug, Clone)]
pub struct RoundParams {
    pub theta1: Mlp2,
    pub theta2: Mlp2,
    pub theta3: Mlp2,
    pub theta4: Mlp2,
}

#[derive(Debug, Clone)]
pub struct GnnParams {
    pub emb: usize,
    /// Layer count L; the network runs L-1 message rounds.
    pub layers: usize,
    pub mode: GnnMode,
    /// Constraint embedding, (b_i, relation code) in.
    pub phi1: Mlp2,
    /// Variable embedding, (c_j, l_j, u_j) plus the state when implicit.
    pub phi2: Mlp2,
    pub rounds: Vec<RoundParams>,
    /// Collapses the final variable embedding to the scalar state.
    pub theta5: Mlp2,
    /// Readout from scalar state to prediction, applied per coordinate.
    pub psi: Mlp2,
}

impl GnnParams {
    pub fn xavier(emb: usize, layers: usize, mode: GnnMode, rng: &mut fixlab_core::numerics::Rng) -> Self {
        assert!(emb >= 1);
        assert!(layers >= 2, "need at least one message round");
        GnnParams {
            emb,
            layers,
            mode,
            phi1: Mlp2::xavier(2, emb, emb, rng),
            phi2: Mlp2::xavier(mode.var_in(), emb, emb, rng),
            rounds: (0..layers - 1)
                .map(|_| RoundParams {
                    theta1: Mlp2::xavier(2 * emb, emb, emb, rng),
                    theta2: Mlp2::xavier(emb, emb, emb, rng),
                    theta3: Mlp2::xavier(2 * emb, emb, emb, rng),
                    theta4: Mlp2::xavier(emb, emb, emb, rng),
                })
                .collect(),
            theta5: Mlp2::xavier(emb, emb, 1, rng),
            psi: Mlp2::xavier(1, emb, 1, rng),
        }
    }

    pub fn zeros(emb: usize, layers: usize, mode: GnnMode) -> Self {
        assert!(emb >= 1);
        assert!(layers >= 2, "need at least one message round");
        GnnParams {
            emb,
            layers,
            mode,
            phi1: Mlp2::zeros(2, emb, emb),
            phi2: Mlp2::zeros(mode.var_in(), emb, emb),
            rounds: (0..layers - 1)
                .map(|_| RoundParams {
                    theta1: Mlp2::zeros(2 * emb, emb, emb),
                    theta2: Mlp2::zeros(emb, emb, emb),
                    theta3: Mlp2::zeros(2 * emb, emb, emb),
                    theta4: Mlp2::zeros(emb, emb, emb),
                })
                .collect(),
            theta5: Mlp2::zeros(emb, emb, 1),
            psi: Mlp2::zeros(1, emb, 1),
        }
    }

    fn blocks(&self) -> Vec<&Mlp2> {
        let mut out = vec![&self.phi1, &self.phi2];
        for r in &self.rounds {
            out.extend([&r.theta1, &r.theta2, &r.theta3, &r.theta4]);
        }
        out.extend([&self.theta5, &self.psi]);
        out
    }

    pub fn param_count(&self) -> usize {
        self.blocks().iter().map(|m| m.param_count()).sum()
    }

    /// Serializes every block in a fixed order (phi1, phi2, rounds in order
    /// with theta1..theta4, theta5, psi).
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for m in self.blocks() {
            m.params_to(&mut out);
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let mut at = 0;
        at += self.phi1.params_from(&flat[at..]);
        at += self.phi2.params_from(&flat[at..]);
        for r in &mut self.rounds {
            at += r.theta1.params_from(&flat[at..]);
            at += r.theta2.params_from(&flat[at..]);
            at += r.theta3.params_from(&flat[at..]);
            at += r.theta4.params_from(&flat[at..]);
        }
        at += self.theta5.params_from(&flat[at..]);
        at += self.psi.params_from(&flat[at..]);
        assert_eq!(at, flat.len(), "flat vector length does not match the architecture");
    }
}

#[derive(Debug)]
pub struct RoundGrads {
    pub theta1: Mlp2Grads,
    pub theta2: Mlp2Grads,
    pub theta3: Mlp2Grads,
    pub theta4: Mlp2Grads,
}

#[derive(Debug)]
pub struct GnnGrads {
    pub phi1: Mlp2Grads,
    pub phi2: Mlp2Grads,
    pub rounds: Vec<RoundGrads>,
    pub theta5: Mlp2Grads,
    pub psi: Mlp2Grads,
}

impl GnnGrads {
    pub fn zeros_like(p: &GnnParams) -> Self {
        GnnGrads {
            phi1: Mlp2Grads::zeros_like(&p.phi1),
            phi2: Mlp2Grads::zeros_like(&p.phi2),
            rounds: p
                .rounds
                .iter()
                .map(|r| RoundGrads {
                    theta1: Mlp2Grads::zeros_like(&r.theta1),
                    theta2: Mlp2Grads::zeros_like(&r.theta2),
                    theta3: Mlp2Grads::zeros_like(&r.theta3),
                    theta4: Mlp2Grads::zeros_like(&r.theta4),
                })
                .collect(),
            theta5: Mlp2Grads::zeros_like(&p.theta5),
            psi: Mlp2Grads::zeros_like(&p.psi),
        }
    }

    pub fn accumulate(&mut self, other: &GnnGrads) {
        self.phi1.accumulate(&other.phi1);
        self.phi2.accumulate(&other.phi2);
        assert_eq!(self.rounds.len(), other.rounds.len());
        for (a, b) in self.rounds.iter_mut().zip(&other.rounds) {
            a.theta1.accumulate(&b.theta1);
            a.theta2.accumulate(&b.theta2);
            a.theta3.accumulate(&b.theta3);
            a.theta4.accumulate(&b.theta4);
        }
        self.theta5.accumulate(&other.theta5);
        self.psi.accumulate(&other.psi);
    }

    pub fn scale(&mut self, c: f64) {
        self.phi1.scale(c);
        self.phi2.scale(c);
        for r in &mut self.rounds {
            r.theta1.scale(c);
            r.theta2.scale(c);
            r.theta3.scale(c);
            r.theta4.scale(c);
        }
        self.theta5.scale(c);
        self.psi.scale(c);
    }

    /// Same layout as `GnnParams::flat`.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.phi1.grads_to(&mut out);
        self.phi2.grads_to(&mut out);
        for r in &self.rounds {
            r.theta1.grads_to(&mut out);
            r.theta2.grads_to(&mut out);
            r.theta3.grads_to(&mut out);
            r.theta4.grads_to(&mut out);
        }
        self.theta5.grads_to(&mut out);
        self.psi.grads_to(&mut out);
        out
    }
}

/// Every MLP call of one application, recorded per node in index order.
pub struct ApplyTape {
    phi1: Vec<Tape>,
    phi2: Vec<Tape>,
    rounds: Vec<RoundTape>,
    theta5: Vec<Tape>,
}

struct RoundTape {
    t1: Vec<Tape>,
    t2: Vec<Tape>,
    t3: Vec<Tape>,
    t4: Vec<Tape>,
}

fn concat(a: &[f64], b: &[f64]) -> Vector {
    let mut out = Vec::with_capacity(a.len() + b.len());
    out.extend_from_slice(a);
    out.extend_from_slice(b);
    out
}

pub(crate) fn apply_traced(
    p: &GnnParams,
    g: &LpGraph,
    z_in: Option<&[f64]>,
) -> (Vector, ApplyTape) {
    match (p.mode, z_in) {
        (GnnMode::Implicit, Some(z)) => assert_eq!(z.len(), g.n_var, "state length mismatch"),
        (GnnMode::Explicit, None) => {}
        _ => panic!("state vector must be present exactly when the mode is implicit"),
    }

    let mut w: Vec<Vector> = Vec::with_capacity(g.n_con);
    let mut tapes_phi1 = Vec::with_capacity(g.n_con);
    for i in 0..g.n_con {
        let (out, t) = mlp_forward(&p.phi1, &g.con_feats[i]);
        w.push(out);
        tapes_phi1.push(t);
    }
    let mut v: Vec<Vector> = Vec::with_capacity(g.n_var);
    let mut tapes_phi2 = Vec::with_capacity(g.n_var);
    for j in 0..g.n_var {
        let f = &g.var_feats[j];
        let feats: Vector = match z_in {
            Some(z) => vec![f[0], f[1], f[2], z[j]],
            None => f.to_vec(),
        };
        let (out, t) = mlp_forward(&p.phi2, &feats);
        v.push(out);
        tapes_phi2.push(t);
    }

    let mut round_tapes = Vec::with_capacity(p.rounds.len());
    for rp in &p.rounds {
        let mut m2 = Vec::with_capacity(g.n_var);
        let mut t2 = Vec::with_capacity(g.n_var);
        for vj in &v {
            let (out, t) = mlp_forward(&rp.theta2, vj);
            m2.push(out);
            t2.push(t);
        }
        let mut m4 = Vec::with_capacity(g.n_con);
        let mut t4 = Vec::with_capacity(g.n_con);
        for wi in &w {
            let (out, t) = mlp_forward(&rp.theta4, wi);
            m4.push(out);
            t4.push(t);
        }

        let mut w_next = Vec::with_capacity(g.n_con);
        let mut t1 = Vec::with_capacity(g.n_con);
        for i in 0..g.n_con {
            let mut msg = vec![0.0; p.emb];
            for &(j, a) in &g.con_adj[i] {
                for k in 0..p.emb {
                    msg[k] += a * m2[j][k];
                }
            }
            let (out, t) = mlp_forward(&rp.theta1, &concat(&w[i], &msg));
            w_next.push(out);
            t1.push(t);
        }
        let mut v_next = Vec::with_capacity(g.n_var);
        let mut t3 = Vec::with_capacity(g.n_var);
        for j in 0..g.n_var {
            let mut msg = vec![0.0; p.emb];
            for &(i, a) in &g.var_adj[j] {
                for k in 0..p.emb {
                    msg[k] += a * m4[i][k];
                }
            }
            let (out, t) = mlp_forward(&rp.theta3, &concat(&v[j], &msg));
            v_next.push(out);
            t3.push(t);
        }
        w = w_next;
        v = v_next;
        round_tapes.push(RoundTape { t1, t2, t3, t4 });
    }

    let mut z_out = vec![0.0; g.n_var];
    let mut tapes_t5 = Vec::with_capacity(g.n_var);
    for j in 0..g.n_var {
        let (out, t) = mlp_forward(&p.theta5, &v[j]);
        z_out[j] = out[0];
        tapes_t5.push(t);
    }
    (z_out, ApplyTape { phi1: tapes_phi1, phi2: tapes_phi2, rounds: round_tapes, theta5: tapes_t5 })
}

/// One application of the iterated core (implicit mode only).
pub fn gnn_apply(p: &GnnParams, g: &LpGraph, z_in: &[f64]) -> Vector {
    assert_eq!(p.mode, GnnMode::Implicit, "the explicit model has no state to apply to");
    apply_traced(p, g, Some(z_in)).0
}

/// Reverse pass of one application. Consumes the tape, adds parameter
/// gradients into `grads`, and returns the gradient with respect to the
/// incoming state (empty in explicit mode).
pub(crate) fn apply_backward(
    p: &GnnParams,
    g: &LpGraph,
    tape: ApplyTape,
    dz_out: &[f64],
    grads: &mut GnnGrads,
) -> Vector {
    let emb = p.emb;
    let mut dv: Vec<Vector> = Vec::with_capacity(g.n_var);
    for (j, t) in tape.theta5.into_iter().enumerate() {
        let (gr, dx) = mlp_backward(&p.theta5, t, &[dz_out[j]]);
        grads.theta5.accumulate(&gr);
        dv.push(dx);
    }
    // nothing downstream reads the final constraint embeddings
    let mut dw: Vec<Vector> = vec![vec![0.0; emb]; g.n_con];

    let reversed = p
        .rounds
        .iter()
        .zip(tape.rounds)
        .zip(grads.rounds.iter_mut())
        .rev();
    for ((rp, rt), rg) in reversed {
        let mut dw_prev = Vec::with_capacity(g.n_con);
        let mut dmsg_w = Vec::with_capacity(g.n_con);
        for (i, t) in rt.t1.into_iter().enumerate() {
            let (gr, dx) = mlp_backward(&rp.theta1, t, &dw[i]);
            rg.theta1.accumulate(&gr);
            dw_prev.push(dx[..emb].to_vec());
            dmsg_w.push(dx[emb..].to_vec());
        }
        let mut dv_prev = Vec::with_capacity(g.n_var);
        let mut dmsg_v = Vec::with_capacity(g.n_var);
        for (j, t) in rt.t3.into_iter().enumerate() {
            let (gr, dx) = mlp_backward(&rp.theta3, t, &dv[j]);
            rg.theta3.accumulate(&gr);
            dv_prev.push(dx[..emb].to_vec());
            dmsg_v.push(dx[emb..].to_vec());
        }
        for (j, t) in rt.t2.into_iter().enumerate() {
            let mut dm2 = vec![0.0; emb];
            for &(i, a) in &g.var_adj[j] {
                for k in 0..emb {
                    dm2[k] += a * dmsg_w[i][k];
                }
            }
            let (gr, dx) = mlp_backward(&rp.theta2, t, &dm2);
            rg.theta2.accumulate(&gr);
            for k in 0..emb {
                dv_prev[j][k] += dx[k];
            }
        }
        for (i, t) in rt.t4.into_iter().enumerate() {
            let mut dm4 = vec![0.0; emb];
            for &(j, a) in &g.con_adj[i] {
                for k in 0..emb {
                    dm4[k] += a * dmsg_v[j][k];
                }
            }
            let (gr, dx) = mlp_backward(&rp.theta4, t, &dm4);
            rg.theta4.accumulate(&gr);
            for k in 0..emb {
                dw_prev[i][k] += dx[k];
            }
        }
        dw = dw_prev;
        dv = dv_prev;
    }

    for (i, t) in tape.phi1.into_iter().enumerate() {
        let (gr, _) = mlp_backward(&p.phi1, t, &dw[i]);
        grads.phi1.accumulate(&gr);
    }
    let mut dz_in = match p.mode {
        GnnMode::Implicit => vec![0.0; g.n_var],
        GnnMode::Explicit => Vec::new(),
    };
    for (j, t) in tape.phi2.into_iter().enumerate() {
        let (gr, dx) = mlp_backward(&p.phi2, t, &dv[j]);
        grads.phi2.accumulate(&gr);
        if p.mode == GnnMode::Implicit {
            dz_in[j] = dx[3];
        }
    }
    dz_in
}

/// Everything the reverse pass needs from one unrolled run.
pub struct ForwardTrace {
    applies: Vec<ApplyTape>,
    psi: Vec<Tape>,
    pub y: Vector,
    pub z_final: Vector,
}

/// Runs the model from the zero state: T applications of the core when
/// implicit, a single pass when explicit, then the per-coordinate readout.
pub fn unrolled_forward(
    p: &GnnParams,
    g: &LpGraph,
    t_steps: usize,
) -> Result<(Vector, ForwardTrace), GnnError> {
    assert!(t_steps >= 1, "need at least one application");
    let mut applies = Vec::new();
    let z_final = match p.mode {
        GnnMode::Implicit => {
            let mut z = vec![0.0; g.n_var];
            for t in 1..=t_steps {
                let (z_next, tape) = apply_traced(p, g, Some(&z));
                if !all_finite(&z_next) {
                    return Err(GnnError::NonFinite { t });
                }
                applies.push(tape);
                z = z_next;
            }
            z
        }
        GnnMode::Explicit => {
            let (z, tape) = apply_traced(p, g, None);
            if !all_finite(&z) {
                return Err(GnnError::NonFinite { t: 1 });
            }
            applies.push(tape);
            z
        }
    };
    let mut y = vec![0.0; g.n_var];
    let mut psi_tapes = Vec::with_capacity(g.n_var);
    for j in 0..g.n_var {
        let (out, t) = mlp_forward(&p.psi, &[z_final[j]]);
        y[j] = out[0];
        psi_tapes.push(t);
    }
    let trace = ForwardTrace { applies, psi: psi_tapes, y: y.clone(), z_final };
    Ok((y, trace))
}

/// Reverse accumulation through the readout and every recorded application,
/// newest first. Shared parameters collect their gradient across all steps.
pub fn unrolled_backward(
    p: &GnnParams,
    g: &LpGraph,
    trace: ForwardTrace,
    dy: &[f64],
) -> GnnGrads {
    assert_eq!(dy.len(), g.n_var);
    let mut grads = GnnGrads::zeros_like(p);
    let mut dz = vec![0.0; g.n_var];
    for (j, t) in trace.psi.into_iter().enumerate() {
        let (gr, dx) = mlp_backward(&p.psi, t, &[dy[j]]);
        grads.psi.accumulate(&gr);
        dz[j] = dx[0];
    }
    for tape in trace.applies.into_iter().rev() {
        dz = apply_backward(p, g, tape, &dz, &mut grads);
    }
    grads
}

/// Per-coordinate readout of a state vector, no tape kept.
pub fn readout(p: &GnnParams, z: &[f64]) -> Vector {
    z.iter().map(|&s| mlp_forward(&p.psi, &[s]).0[0]).collect()
}

/// Mean squared error over coordinates.
pub fn mse_loss(y: &[f64], target: &[f64]) -> f64 {
    assert_eq!(y.len(), target.len());
    let n = y.len() as f64;
    y.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n
}

pub fn mse_grad(y: &[f64], target: &[f64]) -> Vector {
    assert_eq!(y.len(), target.len());
    let n = y.len() as f64;
    y.iter().zip(target).map(|(a, b)| 2.0 * (a - b) / n).collect()
}

//! Flat-vector codec for LP instances. The Lipschitz harness measures
//! input distances between an instance and its perturbed copy, so the
//! "input" handed to the model must be a plain vector. The encoding is
//! lossless: numeric data first (the blocks perturbations touch), then the
//! structure (relations and the sparsity pattern), which a perturbation
//! never changes, so input distances reduce to the perturbed block's shift.
//!
//! Layout: `[a values | b | c | l | u | relation codes | rows | cols]`,
//! lengths `nnz, m, n, n, n, m, nnz, nnz`.

use fixlab_gnn::{relation_code, relation_from_code};
use fixlab_lp::LpInstance;

pub fn flat_len(n: usize, m: usize, nnz: usize) -> usize {
    3 * nnz + 2 * m + 3 * n
}

pub fn encode_instance(inst: &LpInstance) -> Vec<f64> {
    let mut v = Vec::with_capacity(flat_len(inst.n, inst.m, inst.a.len()));
    v.extend(inst.a.iter().map(|&(_, _, val)| val));
    v.extend_from_slice(&inst.b);
    v.extend_from_slice(&inst.c);
    v.extend_from_slice(&inst.l);
    v.extend_from_slice(&inst.u);
    v.extend(inst.circ.iter().map(|&r| relation_code(r)));
    v.extend(inst.a.iter().map(|&(i, _, _)| i as f64));
    v.extend(inst.a.iter().map(|&(_, j, _)| j as f64));
    v
}

/// Rebuilds an instance of known shape. Panics on malformed vectors; the
/// harness only feeds back vectors this module produced.
pub fn decode_instance(flat: &[f64], n: usize, m: usize, nnz: usize) -> LpInstance {
    assert_eq!(flat.len(), flat_len(n, m, nnz), "flat instance has the wrong length");
    let mut at = 0usize;
    let mut take = |len: usize| {
        let s = &flat[at..at + len];
        at += len;
        s
    };
    let vals = take(nnz).to_vec();
    let b = take(m).to_vec();
    let c = take(n).to_vec();
    let l = take(n).to_vec();
    let u = take(n).to_vec();
    let circ = take(m).iter().map(|&code| relation_from_code(code)).collect();
    let rows = take(nnz).to_vec();
    let cols = take(nnz).to_vec();
    let a = (0..nnz).map(|k| (rows[k] as usize, cols[k] as usize, vals[k])).collect();
    let inst = LpInstance { n, m, a, b, c, circ, l, u };
    inst.validate();
    inst
}

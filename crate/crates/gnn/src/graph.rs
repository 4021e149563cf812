//! Bipartite view of an LP instance: one node per constraint row, one per
//! variable column, an edge wherever the matrix stores a nonzero.

use fixlab_lp::{LpInstance, Relation};

/// Numeric tag for a relation; the only two values are 0 and 1.
pub fn relation_code(r: Relation) -> f64 {
    match r {
        Relation::Eq => 0.0,
        Relation::Le => 1.0,
    }
}

pub fn relation_from_code(code: f64) -> Relation {
    match code {
        0.0 => Relation::Eq,
        1.0 => Relation::Le,
        other => panic!("relation code must be 0 or 1, got {other}"),
    }
}

#[derive(Debug, Clone)]
pub struct LpGraph {
    pub n_var: usize,
    pub n_con: usize,
    /// Per variable: (c_j, l_j, u_j).
    pub var_feats: Vec<[f64; 3]>,
    /// Per constraint: (b_i, relation code).
    pub con_feats: Vec<[f64; 2]>,
    /// (constraint, variable, stored value), in the instance's storage order.
    pub edges: Vec<(usize, usize, f64)>,
    /// For each variable, incident (constraint, value) in ascending
    /// constraint order; summation order during message passing.
    pub var_adj: Vec<Vec<(usize, f64)>>,
    /// For each constraint, incident (variable, value) in ascending variable
    /// order.
    pub con_adj: Vec<Vec<(usize, f64)>>,
}

/// Lossless extraction: the edge set mirrors the stored nonzeros exactly.
pub fn encode_graph(inst: &LpInstance) -> LpGraph {
    inst.validate();
    let var_feats = (0..inst.n).map(|j| [inst.c[j], inst.l[j], inst.u[j]]).collect();
    let con_feats =
        (0..inst.m).map(|i| [inst.b[i], relation_code(inst.circ[i])]).collect();
    let mut var_adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); inst.n];
    let mut con_adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); inst.m];
    // the triplet list is sorted row-major, so both adjacency lists come out
    // ascending without an extra sort
    for &(i, j, v) in &inst.a {
        var_adj[j].push((i, v));
        con_adj[i].push((j, v));
    }
    LpGraph {
        n_var: inst.n,
        n_con: inst.m,
        var_feats,
        con_feats,
        edges: inst.a.clone(),
        var_adj,
        con_adj,
    }
}

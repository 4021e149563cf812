//! General-form LP instances: random generation, block perturbation, and the
//! JSON file format.

use std::collections::HashSet;
use std::path::Path;

use fixlab_core::numerics::{Rng, Vector};
use serde::{Deserialize, Serialize};

use crate::LpError;

/// Row relation of the general form: `=` or `<=`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Eq,
    Le,
}

/// A general-form LP `min c'y  s.t. A y (=|<=) b, l <= y <= u`, with `A`
/// stored as a sorted coordinate list of nonzeros.
#[derive(Debug, Clone, PartialEq)]
pub struct LpInstance {
    pub n: usize,
    pub m: usize,
    /// `(row, col, value)` triples, sorted row-major, values all nonzero.
    pub a: Vec<(usize, usize, f64)>,
    pub b: Vector,
    pub c: Vector,
    pub circ: Vec<Relation>,
    pub l: Vector,
    pub u: Vector,
}

impl LpInstance {
    /// Panics unless shapes line up, bounds are ordered finite, and the
    /// coordinate list is sorted with nonzero in-range entries.
    pub fn validate(&self) {
        assert!(self.n >= 1 && self.m >= 1);
        assert_eq!(self.b.len(), self.m);
        assert_eq!(self.c.len(), self.n);
        assert_eq!(self.circ.len(), self.m);
        assert_eq!(self.l.len(), self.n);
        assert_eq!(self.u.len(), self.n);
        for j in 0..self.n {
            assert!(self.l[j].is_finite() && self.u[j].is_finite());
            assert!(self.l[j] <= self.u[j], "bounds crossed at column {j}");
        }
        for w in self.a.windows(2) {
            assert!((w[0].0, w[0].1) < (w[1].0, w[1].1), "coordinate list not sorted");
        }
        for &(i, j, v) in &self.a {
            assert!(i < self.m && j < self.n, "entry ({i},{j}) out of range");
            assert!(v != 0.0 && v.is_finite(), "stored entry ({i},{j}) must be nonzero finite");
        }
    }

    /// Dense `A y` (length m); rows absent from the pattern contribute 0.
    pub fn apply_a(&self, y: &[f64]) -> Vector {
        assert_eq!(y.len(), self.n);
        let mut out = vec![0.0; self.m];
        for &(i, j, v) in &self.a {
            out[i] += v * y[j];
        }
        out
    }

    /// Number of equality rows.
    pub fn p(&self) -> usize {
        self.circ.iter().filter(|r| **r == Relation::Eq).count()
    }

    pub fn objective(&self, y: &[f64]) -> f64 {
        assert_eq!(y.len(), self.n);
        let mut s = 0.0;
        for j in 0..self.n {
            s += self.c[j] * y[j];
        }
        s
    }

    /// Max violation of all general-form constraints at `y` (0 when
    /// feasible).
    pub fn constraint_violation(&self, y: &[f64]) -> f64 {
        let ay = self.apply_a(y);
        let mut worst = 0.0f64;
        for i in 0..self.m {
            let r = ay[i] - self.b[i];
            worst = worst.max(match self.circ[i] {
                Relation::Eq => r.abs(),
                Relation::Le => r.max(0.0),
            });
        }
        for j in 0..self.n {
            worst = worst.max(self.l[j] - y[j]).max(y[j] - self.u[j]);
        }
        worst
    }
}

/// Default generated shape: 50 variables, 10 rows, 100 stored nonzeros.
pub const GEN_N: usize = 50;
pub const GEN_M: usize = 10;
pub const GEN_NNZ: usize = 100;

/// Probability that a generated row is an inequality.
pub const GEN_PR_LE: f64 = 0.7;

/// Random instance at the default shape. The draw order is part of the
/// reproducibility contract: pattern (rejection-sampled distinct cells, then
/// sorted), values, b, c, bounds per column, then relations.
pub fn generate_instance(rng: &mut Rng) -> LpInstance {
    generate_instance_with(rng, GEN_N, GEN_M, GEN_NNZ)
}

/// Random instance with explicit shape. Entries of `A` are standard normal
/// at `nnz` distinct cells; `b` and raw `c` are uniform on `[-1, 1]`; `c` is
/// then scaled by 0.01; bounds are two normals with mean 0 and standard
/// deviation 10, swapped into order; each row is `<=` with probability 0.7.
pub fn generate_instance_with(rng: &mut Rng, n: usize, m: usize, nnz: usize) -> LpInstance {
    assert!(n >= 1 && m >= 1);
    assert!(nnz >= 1 && nnz <= n * m, "cannot place {nnz} distinct nonzeros in {m}x{n}");

    let mut taken = HashSet::with_capacity(nnz);
    let mut cells = Vec::with_capacity(nnz);
    while cells.len() < nnz {
        let i = rng.below(m);
        let j = rng.below(n);
        if taken.insert((i, j)) {
            cells.push((i, j));
        }
    }
    cells.sort_unstable();
    let mut a = Vec::with_capacity(nnz);
    for (i, j) in cells {
        let mut v = rng.normal(0.0, 1.0);
        while v == 0.0 {
            v = rng.normal(0.0, 1.0);
        }
        a.push((i, j, v));
    }

    let b = rng.uniform_vec(m, -1.0, 1.0);
    let mut c = rng.uniform_vec(n, -1.0, 1.0);
    for v in c.iter_mut() {
        *v *= 0.01;
    }

    let mut l = vec![0.0; n];
    let mut u = vec![0.0; n];
    for j in 0..n {
        let x1 = rng.normal(0.0, 10.0);
        let x2 = rng.normal(0.0, 10.0);
        l[j] = x1.min(x2);
        u[j] = x1.max(x2);
    }

    let circ = (0..m)
        .map(|_| if rng.uniform() < GEN_PR_LE { Relation::Le } else { Relation::Eq })
        .collect();

    let inst = LpInstance { n, m, a, b, c, circ, l, u };
    inst.validate();
    inst
}

/// Which data block a perturbation touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbBlock {
    A,
    B,
    C,
    L,
    U,
}

impl PerturbBlock {
    pub const ALL: [PerturbBlock; 5] =
        [PerturbBlock::A, PerturbBlock::B, PerturbBlock::C, PerturbBlock::L, PerturbBlock::U];

    pub fn label(self) -> &'static str {
        match self {
            PerturbBlock::A => "A",
            PerturbBlock::B => "b",
            PerturbBlock::C => "c",
            PerturbBlock::L => "l",
            PerturbBlock::U => "u",
        }
    }
}

/// Copies `inst` with one block moved by a random direction of Euclidean
/// norm exactly `magnitude`. `A` perturbations touch only the stored
/// nonzeros, so the sparsity pattern is preserved; bound perturbations are
/// redrawn until `l <= u` still holds.
pub fn perturb_instance(
    inst: &LpInstance,
    block: PerturbBlock,
    magnitude: f64,
    rng: &mut Rng,
) -> Result<LpInstance, LpError> {
    assert!(magnitude > 0.0, "magnitude must be positive");
    if block == PerturbBlock::A && inst.a.is_empty() {
        return Err(LpError::EmptyPattern);
    }
    let dim = match block {
        PerturbBlock::A => inst.a.len(),
        PerturbBlock::B => inst.m,
        _ => inst.n,
    };
    // a fresh direction per attempt; bounds can reject and retry
    for _ in 0..1000 {
        let mut delta = rng.normal_vec(dim, 0.0, 1.0);
        let norm = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        for d in delta.iter_mut() {
            *d *= magnitude / norm;
        }
        let mut out = inst.clone();
        match block {
            PerturbBlock::A => {
                let mut ok = true;
                for (k, entry) in out.a.iter_mut().enumerate() {
                    entry.2 += delta[k];
                    if entry.2 == 0.0 {
                        ok = false;
                    }
                }
                if !ok {
                    continue;
                }
            }
            PerturbBlock::B => {
                for (v, d) in out.b.iter_mut().zip(&delta) {
                    *v += d;
                }
            }
            PerturbBlock::C => {
                for (v, d) in out.c.iter_mut().zip(&delta) {
                    *v += d;
                }
            }
            PerturbBlock::L => {
                for (v, d) in out.l.iter_mut().zip(&delta) {
                    *v += d;
                }
                if out.l.iter().zip(&out.u).any(|(l, u)| l > u) {
                    continue;
                }
            }
            PerturbBlock::U => {
                for (v, d) in out.u.iter_mut().zip(&delta) {
                    *v += d;
                }
                if out.l.iter().zip(&out.u).any(|(l, u)| l > u) {
                    continue;
                }
            }
        }
        out.validate();
        return Ok(out);
    }
    panic!("perturbation kept violating the bound order after 1000 draws");
}

#[derive(Serialize, Deserialize)]
struct InstanceJson {
    n: usize,
    m: usize,
    #[serde(rename = "A")]
    a: Vec<(usize, usize, f64)>,
    b: Vec<f64>,
    c: Vec<f64>,
    circ: Vec<String>,
    l: Vec<f64>,
    u: Vec<f64>,
    seed: u64,
}

/// Writes the instance (plus the seed that made it) as JSON.
pub fn save_instance(path: &Path, inst: &LpInstance, seed: u64) -> Result<(), LpError> {
    let dto = InstanceJson {
        n: inst.n,
        m: inst.m,
        a: inst.a.clone(),
        b: inst.b.clone(),
        c: inst.c.clone(),
        circ: inst
            .circ
            .iter()
            .map(|r| match r {
                Relation::Eq => "eq".to_string(),
                Relation::Le => "le".to_string(),
            })
            .collect(),
        l: inst.l.clone(),
        u: inst.u.clone(),
        seed,
    };
    std::fs::write(path, serde_json::to_string(&dto)?)?;
    Ok(())
}

/// Reads an instance back; returns it with the recorded seed.
pub fn load_instance(path: &Path) -> Result<(LpInstance, u64), LpError> {
    let dto: InstanceJson = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let circ = dto
        .circ
        .iter()
        .map(|s| match s.as_str() {
            "eq" => Relation::Eq,
            "le" => Relation::Le,
            other => panic!("unknown relation tag {other:?}"),
        })
        .collect();
    let inst = LpInstance {
        n: dto.n,
        m: dto.m,
        a: dto.a,
        b: dto.b,
        c: dto.c,
        circ,
        l: dto.l,
        u: dto.u,
    };
    inst.validate();
    Ok((inst, dto.seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_shape_matches_the_defaults() {
        let mut rng = Rng::new(1);
        let inst = generate_instance(&mut rng);
        assert_eq!(inst.n, 50);
        assert_eq!(inst.m, 10);
        assert_eq!(inst.a.len(), 100);
        let cells: HashSet<(usize, usize)> = inst.a.iter().map(|&(i, j, _)| (i, j)).collect();
        assert_eq!(cells.len(), 100, "duplicate cells");
    }

    #[test]
    fn costs_are_scaled_into_a_cent() {
        let mut rng = Rng::new(2);
        let inst = generate_instance(&mut rng);
        assert!(inst.c.iter().all(|v| v.abs() <= 0.01));
    }

    #[test]
    fn bounds_are_ordered_and_relations_lean_le() {
        let mut rng = Rng::new(3);
        let mut le = 0usize;
        let mut rows = 0usize;
        for _ in 0..200 {
            let inst = generate_instance(&mut rng);
            assert!(inst.l.iter().zip(&inst.u).all(|(l, u)| l <= u));
            le += inst.circ.iter().filter(|r| **r == Relation::Le).count();
            rows += inst.m;
        }
        let frac = le as f64 / rows as f64;
        assert!((frac - 0.7).abs() < 0.05, "Le fraction {frac}");
    }

    #[test]
    fn generation_is_reproducible_per_seed() {
        let a = generate_instance(&mut Rng::new(77));
        let b = generate_instance(&mut Rng::new(77));
        assert_eq!(a, b);
    }

    #[test]
    fn perturbation_norm_is_exact_and_pattern_is_preserved() {
        let mut rng = Rng::new(5);
        let inst = generate_instance(&mut rng);
        for block in PerturbBlock::ALL {
            let out = perturb_instance(&inst, block, 1e-4, &mut rng).unwrap();
            let delta: Vec<f64> = match block {
                PerturbBlock::A => {
                    inst.a.iter().zip(&out.a).map(|(x, y)| y.2 - x.2).collect()
                }
                PerturbBlock::B => inst.b.iter().zip(&out.b).map(|(x, y)| y - x).collect(),
                PerturbBlock::C => inst.c.iter().zip(&out.c).map(|(x, y)| y - x).collect(),
                PerturbBlock::L => inst.l.iter().zip(&out.l).map(|(x, y)| y - x).collect(),
                PerturbBlock::U => inst.u.iter().zip(&out.u).map(|(x, y)| y - x).collect(),
            };
            let norm = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
            assert!((norm - 1e-4).abs() <= 1e-12, "{block:?}: norm {norm}");
            let cells_a: Vec<(usize, usize)> = inst.a.iter().map(|&(i, j, _)| (i, j)).collect();
            let cells_b: Vec<(usize, usize)> = out.a.iter().map(|&(i, j, _)| (i, j)).collect();
            assert_eq!(cells_a, cells_b);
        }
    }

    #[test]
    fn untouched_blocks_stay_bitwise_identical() {
        let mut rng = Rng::new(6);
        let inst = generate_instance(&mut rng);
        let out = perturb_instance(&inst, PerturbBlock::C, 1e-4, &mut rng).unwrap();
        assert_eq!(inst.a, out.a);
        assert_eq!(inst.b, out.b);
        assert_eq!(inst.l, out.l);
        assert_eq!(inst.u, out.u);
        assert_ne!(inst.c, out.c);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = Rng::new(9);
        let inst = generate_instance(&mut rng);
        let path = dir.path().join("inst_000009.json");
        save_instance(&path, &inst, 9).unwrap();
        let (back, seed) = load_instance(&path).unwrap();
        assert_eq!(seed, 9);
        assert_eq!(inst, back);
    }

    #[test]
    fn constraint_violation_is_zero_inside_the_box() {
        let inst = LpInstance {
            n: 2,
            m: 1,
            a: vec![(0, 0, 1.0), (0, 1, 1.0)],
            b: vec![5.0],
            c: vec![0.0, 0.0],
            circ: vec![Relation::Le],
            l: vec![0.0, 0.0],
            u: vec![1.0, 1.0],
        };
        assert_eq!(inst.constraint_violation(&[0.5, 0.5]), 0.0);
        assert!((inst.constraint_violation(&[2.0, 0.0]) - 1.0).abs() < 1e-15);
    }
}

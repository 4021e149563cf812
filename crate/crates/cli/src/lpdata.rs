//! Dataset builder for the LP case study: feasible instances solved by the
//! simplex oracle, split into train and test, plus per-block perturbed
//! copies of every test instance. Everything on disk is a function of the
//! seed, so rerunning a config reproduces the directory byte for byte.

use std::path::Path;

use fixlab_core::numerics::Rng;
use fixlab_lp::{
    check_kkt, generate_instance_with, perturb_instance, save_instance, save_solution,
    solve_simplex, to_standard_form, LpInstance, LpSolution, LpStatus, PerturbBlock,
};
use serde::{Deserialize, Serialize};

use crate::artifacts::{ensure_dir, note, write_json, write_summary};
use crate::config::{write_resolved, ResolvedConfig};
use crate::RunError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LpGenerateParams {
    pub n_train: usize,
    pub n_test: usize,
    /// Instance shape: variables, rows, stored nonzeros.
    pub n: usize,
    pub m: usize,
    pub nnz: usize,
    pub perturb_magnitude: f64,
    /// Solutions sharper than this KKT residual are accepted.
    pub kkt_tol: f64,
}

impl Default for LpGenerateParams {
    fn default() -> Self {
        LpGenerateParams {
            n_train: 500,
            n_test: 200,
            n: 50,
            m: 10,
            nnz: 100,
            perturb_magnitude: 1e-4,
            kkt_tol: 1e-7,
        }
    }
}

/// Written to `manifest.json`; training and evaluation read shapes and
/// counts from here instead of trusting directory contents.
#[derive(Debug, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub n: usize,
    pub m: usize,
    pub nnz: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub perturb_magnitude: f64,
    pub blocks: Vec<String>,
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LpGenerateSummary {
    pub n_train: usize,
    pub n_test: usize,
    /// Accepted instances over generation attempts.
    pub feasible_fraction: f64,
    pub attempts: usize,
    /// Draws discarded for solver trouble rather than infeasibility.
    pub skipped_solver_errors: usize,
    pub kkt_worst: f64,
}

struct Budget {
    attempts: usize,
    skipped: usize,
    kkt_worst: f64,
}

/// Draws instances until one is solvable to optimality with a clean KKT
/// certificate. Infeasible and unbounded draws are expected; solver errors
/// are counted separately.
fn next_solved(
    rng: &mut Rng,
    p: &LpGenerateParams,
    budget: &mut Budget,
) -> Result<(LpInstance, LpSolution, f64), RunError> {
    for _ in 0..100_000 {
        budget.attempts += 1;
        let inst = generate_instance_with(rng, p.n, p.m, p.nnz);
        let std = to_standard_form(&inst);
        let sol = match solve_simplex(&std) {
            Ok(sol) => sol,
            Err(_) => {
                budget.skipped += 1;
                continue;
            }
        };
        if sol.status != LpStatus::Optimal {
            continue;
        }
        let kkt = check_kkt(&inst, &sol);
        if !kkt.pass(p.kkt_tol) {
            budget.skipped += 1;
            continue;
        }
        budget.kkt_worst = budget.kkt_worst.max(kkt.max_residual);
        return Ok((inst, sol, kkt.max_residual));
    }
    Err(RunError::Numerical("no solvable instance within 100000 draws".into()))
}

fn save_pair(
    dir: &Path,
    idx: usize,
    inst: &LpInstance,
    sol: &LpSolution,
    kkt: f64,
    provenance: u64,
) -> Result<(), RunError> {
    save_instance(&dir.join(format!("inst_{idx:04}.json")), inst, provenance)
        .map_err(|e| RunError::Validation(format!("saving instance {idx}: {e}")))?;
    save_solution(&dir.join(format!("sol_{idx:04}.json")), sol, kkt)
        .map_err(|e| RunError::Validation(format!("saving solution {idx}: {e}")))
}

pub fn run(cfg: &ResolvedConfig, verbose: bool) -> Result<(), RunError> {
    let p: LpGenerateParams = cfg.params_as()?;
    if p.n_train < 1 || p.n_test < 1 {
        return Err(RunError::Validation("need n_train >= 1 and n_test >= 1".into()));
    }
    if p.n < 1 || p.m < 1 || p.nnz < 1 || p.nnz > p.n * p.m {
        return Err(RunError::Validation(format!(
            "bad shape: {} nonzeros do not fit {}x{}",
            p.nnz, p.m, p.n
        )));
    }
    if !(p.perturb_magnitude > 0.0 && p.kkt_tol > 0.0) {
        return Err(RunError::Validation("perturb_magnitude and kkt_tol must be positive".into()));
    }
    write_resolved(cfg, &p)?;

    let train_dir = cfg.out.join("train");
    let test_dir = cfg.out.join("test");
    ensure_dir(&train_dir)?;
    ensure_dir(&test_dir)?;

    let mut rng = Rng::new(cfg.seed);
    let mut budget = Budget { attempts: 0, skipped: 0, kkt_worst: 0.0 };

    for idx in 0..p.n_train {
        let (inst, sol, kkt) = next_solved(&mut rng, &p, &mut budget)?;
        save_pair(&train_dir, idx, &inst, &sol, kkt, budget.attempts as u64)?;
    }
    note(verbose, &format!("lp-generate: train split done after {} draws", budget.attempts));
    for idx in 0..p.n_test {
        let (inst, sol, kkt) = next_solved(&mut rng, &p, &mut budget)?;
        save_pair(&test_dir, idx, &inst, &sol, kkt, budget.attempts as u64)?;
    }
    let generated = p.n_train + p.n_test;
    let feasible_fraction = generated as f64 / budget.attempts as f64;

    // Perturbed copies of the test split, one block at a time. A perturbed
    // instance must itself be solvable (its solution is the reference for
    // the error curves); a draw that breaks that is redrawn.
    let mut test_insts = Vec::with_capacity(p.n_test);
    for idx in 0..p.n_test {
        let path = test_dir.join(format!("inst_{idx:04}.json"));
        let (inst, _) = fixlab_lp::load_instance(&path)
            .map_err(|e| RunError::Validation(format!("reading back {}: {e}", path.display())))?;
        test_insts.push(inst);
    }
    for block in PerturbBlock::ALL {
        let dir = cfg.out.join("perturbed").join(block.label());
        ensure_dir(&dir)?;
        for (idx, inst) in test_insts.iter().enumerate() {
            let mut saved = false;
            for _ in 0..200 {
                let cand = perturb_instance(inst, block, p.perturb_magnitude, &mut rng)
                    .map_err(|e| RunError::Numerical(format!("perturbing {idx}: {e}")))?;
                let std = to_standard_form(&cand);
                let sol = match solve_simplex(&std) {
                    Ok(s) => s,
                    Err(_) => continue,
                };
                if sol.status != LpStatus::Optimal {
                    continue;
                }
                let kkt = check_kkt(&cand, &sol);
                if !kkt.pass(p.kkt_tol) {
                    continue;
                }
                budget.kkt_worst = budget.kkt_worst.max(kkt.max_residual);
                save_pair(&dir, idx, &cand, &sol, kkt.max_residual, idx as u64)?;
                saved = true;
                break;
            }
            if !saved {
                return Err(RunError::Numerical(format!(
                    "no solvable {} perturbation of test instance {idx} in 200 draws",
                    block.label()
                )));
            }
        }
        note(verbose, &format!("lp-generate: perturbed block {} done", block.label()));
    }

    let manifest = DatasetManifest {
        n: p.n,
        m: p.m,
        nnz: p.nnz,
        n_train: p.n_train,
        n_test: p.n_test,
        perturb_magnitude: p.perturb_magnitude,
        blocks: PerturbBlock::ALL.iter().map(|b| b.label().to_string()).collect(),
        seed: cfg.seed,
    };
    write_json(&cfg.out.join("manifest.json"), &manifest)?;

    let summary = LpGenerateSummary {
        n_train: p.n_train,
        n_test: p.n_test,
        feasible_fraction,
        attempts: budget.attempts,
        skipped_solver_errors: budget.skipped,
        kkt_worst: budget.kkt_worst,
    };
    write_summary(
        &cfg.out,
        cfg.kind.label(),
        cfg.seed,
        &["manifest.json", "train", "test", "perturbed"],
        summary,
    )
}

/// Loads `count` instance/solution pairs `inst_%04d.json` + `sol_%04d.json`
/// from a split directory. Shared by the training and evaluation commands.
pub fn load_split(
    dir: &Path,
    count: usize,
) -> Result<(Vec<LpInstance>, Vec<LpSolution>), RunError> {
    let mut insts = Vec::with_capacity(count);
    let mut sols = Vec::with_capacity(count);
    for idx in 0..count {
        let ipath = dir.join(format!("inst_{idx:04}.json"));
        let (inst, _) = fixlab_lp::load_instance(&ipath)
            .map_err(|e| RunError::Validation(format!("{}: {e}", ipath.display())))?;
        let spath = dir.join(format!("sol_{idx:04}.json"));
        let (sol, _) = fixlab_lp::load_solution(&spath)
            .map_err(|e| RunError::Validation(format!("{}: {e}", spath.display())))?;
        insts.push(inst);
        sols.push(sol);
    }
    Ok((insts, sols))
}

/// Reads and sanity-checks a dataset manifest.
pub fn load_manifest(dataset: &Path) -> Result<DatasetManifest, RunError> {
    let path = dataset.join("manifest.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| RunError::Validation(format!("cannot read {}: {e}", path.display())))?;
    let m: DatasetManifest = serde_json::from_str(&text)
        .map_err(|e| RunError::Validation(format!("bad manifest {}: {e}", path.display())))?;
    if m.n_train == 0 || m.n_test == 0 || m.n == 0 {
        return Err(RunError::Validation(format!("degenerate manifest {}", path.display())));
    }
    Ok(m)
}

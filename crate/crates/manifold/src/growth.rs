//! Lipschitz-growth measurement for the exact-prox iterations: build a
//! paired dataset of observations whose ground truths differ along sphere
//! tangents, run the chosen iteration to a fixed depth from `y_0 = 0`, and
//! read `L_t`/`E_t` curves off the trajectories.
//!
//! When the forward operator has a kernel, tangent perturbations aligned
//! with it barely move the observation while moving the ground truth, so the
//! converged map is steep there and `L_t` must climb with `t`. Ground truths
//! are drawn from a band around the kernel equator (the sphere points whose
//! kernel coordinate is small): there the tangent plane still contains the
//! kernel direction, while the chord ambiguity the observation cannot
//! resolve stays short, keeping the recovery error well behaved.

use crate::inverse::{HqsOp, InverseProblem, PgdOp};
use crate::sphere::SphereManifold;
use fixlab_core::fixpoint::{iterate_exactly, SolveError};
use fixlab_core::lipschitz::{curve, CurveRow, PairedDataset};
use fixlab_core::numerics::{self, Rng, Vector};

/// Which iteration drives the trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrowthAlg {
    Pgd,
    Hqs,
}

impl GrowthAlg {
    pub fn label(&self) -> &'static str {
        match self {
            GrowthAlg::Pgd => "pgd",
            GrowthAlg::Hqs => "hqs",
        }
    }
}

/// Dataset and measurement shape for one growth run.
#[derive(Debug, Clone)]
pub struct GrowthConfig {
    pub n_samples: usize,
    pub t_max: usize,
    pub alg: GrowthAlg,
    /// Kernel alignment of each perturbation mode, in `[0, 1]`; one mode per
    /// entry. Alignments only matter when the operator has a kernel,
    /// otherwise every mode falls back to a random tangent.
    pub kernel_mix: Vec<f64>,
    /// Tangent step applied to the ground truth before reprojection.
    pub perturb_size: f64,
    /// Observation noise as a fraction of the sampled admissible radius.
    pub noise_scale: f64,
    /// Half-width of the kernel-coordinate band for ground-truth sampling;
    /// 1 covers the whole sphere.
    pub band: f64,
    pub seed: u64,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        GrowthConfig {
            n_samples: 200,
            t_max: 150,
            alg: GrowthAlg::Pgd,
            kernel_mix: vec![0.6, 0.7, 0.8, 0.9, 1.0],
            perturb_size: 0.05,
            noise_scale: 0.5,
            band: 0.15,
            seed: 0,
        }
    }
}

/// Curves plus the noise actually injected.
#[derive(Debug, Clone)]
pub struct GrowthResult {
    pub rows: Vec<CurveRow>,
    pub labels: Vec<String>,
    pub noise_bound: f64,
    pub noise_used: f64,
}

fn random_unit(n: usize, rng: &mut Rng) -> Vector {
    loop {
        let v = rng.normal_vec(n, 0.0, 1.0);
        let vn = numerics::norm(&v);
        if vn > 1e-9 {
            return numerics::scale(&v, 1.0 / vn);
        }
    }
}

/// One unit vector in the kernel of `a`, or `None` when the rows span the
/// whole ambient space.
fn kernel_direction(a: &numerics::Matrix, rng: &mut Rng) -> Option<Vector> {
    let mut basis: Vec<Vector> = Vec::new();
    for i in 0..a.rows {
        let mut r = a.row(i).to_vec();
        for q in &basis {
            let c = -numerics::dot(&r, q);
            numerics::axpy(&mut r, c, q);
        }
        let rn = numerics::norm(&r);
        if rn > 1e-10 {
            basis.push(numerics::scale(&r, 1.0 / rn));
        }
    }
    if basis.len() >= a.cols {
        return None;
    }
    for _ in 0..16 {
        let mut v = rng.normal_vec(a.cols, 0.0, 1.0);
        for q in &basis {
            let c = -numerics::dot(&v, q);
            numerics::axpy(&mut v, c, q);
        }
        let vn = numerics::norm(&v);
        if vn > 1e-6 {
            return Some(numerics::scale(&v, 1.0 / vn));
        }
    }
    None
}

/// Ground-truth direction: kernel coordinate uniform in the band, the rest
/// a random direction orthogonal to the kernel.
fn band_direction(n: usize, kernel: &[f64], band: f64, rng: &mut Rng) -> Vector {
    let xi = rng.uniform_in(-band, band);
    let w = loop {
        let v = rng.normal_vec(n, 0.0, 1.0);
        let mut t = v;
        let c = -numerics::dot(&t, kernel);
        numerics::axpy(&mut t, c, kernel);
        let tn = numerics::norm(&t);
        if tn > 1e-9 {
            break numerics::scale(&t, 1.0 / tn);
        }
    };
    let mut u = numerics::scale(&w, (1.0 - xi * xi).sqrt());
    numerics::axpy(&mut u, xi, kernel);
    u
}

/// Unit tangent at `point` with component `mix` along the (projected)
/// kernel direction and the rest along a random tangent orthogonal to it.
fn mixed_tangent(
    m: &SphereManifold,
    point: &[f64],
    kernel: Option<&Vector>,
    mix: f64,
    rng: &mut Rng,
) -> Vector {
    let (k, mix) = match kernel {
        Some(k) if mix > 0.0 => (k, mix),
        _ => return m.random_tangent(point, rng),
    };
    let radial = numerics::sub(point, &m.center);
    let u = numerics::scale(&radial, 1.0 / numerics::norm(&radial));
    // Kernel direction flattened onto the tangent plane.
    let mut kt = k.clone();
    let c = -numerics::dot(k, &u);
    numerics::axpy(&mut kt, c, &u);
    let ktn = numerics::norm(&kt);
    if ktn <= 1e-9 {
        // Kernel is radial here; no tangent component to align with.
        return m.random_tangent(point, rng);
    }
    let kt = numerics::scale(&kt, 1.0 / ktn);
    if mix >= 1.0 {
        return kt;
    }
    let rest = loop {
        let t = m.random_tangent(point, rng);
        let mut r = t;
        let c = -numerics::dot(&r, &kt);
        numerics::axpy(&mut r, c, &kt);
        let rn = numerics::norm(&r);
        if rn > 1e-9 {
            break numerics::scale(&r, 1.0 / rn);
        }
    };
    let mut dir = numerics::scale(&kt, mix);
    numerics::axpy(&mut dir, (1.0 - mix * mix).sqrt(), &rest);
    dir
}

/// Build the paired dataset and measure `L_t` and `E_t` for
/// `t = 1..=t_max`, iterating from the zero state. The stored `prob.x` is a
/// template only; every sample generates its own observation
/// `x = A y* + noise`.
pub fn lipschitz_growth_experiment(
    prob: &InverseProblem,
    m: &SphereManifold,
    cfg: &GrowthConfig,
) -> Result<GrowthResult, SolveError> {
    assert!(cfg.n_samples >= 1);
    assert!(cfg.t_max >= 1);
    assert!(!cfg.kernel_mix.is_empty(), "at least one perturbation mode is required");
    assert!(cfg.kernel_mix.iter().all(|v| (0.0..=1.0).contains(v)), "mixes live in [0, 1]");
    assert!(cfg.band > 0.0 && cfg.band <= 1.0, "band is a fraction of the kernel coordinate");
    assert!(cfg.perturb_size >= 0.0 && cfg.noise_scale >= 0.0);

    let mut rng = Rng::new(cfg.seed);
    let kernel = kernel_direction(&prob.a, &mut rng);
    let noise_bound = prob.noise_bound(m);
    let noise_used = cfg.noise_scale * noise_bound;
    let n = m.dim();
    let d = prob.a.rows;

    let observe = |y_star: &[f64], rng: &mut Rng| -> Vector {
        let mut x = numerics::gemv(&prob.a, y_star);
        if noise_used > 0.0 {
            numerics::axpy(&mut x, noise_used, &random_unit(d, rng));
        }
        x
    };

    let mut originals = Vec::with_capacity(cfg.n_samples);
    let mut perturbed = Vec::with_capacity(cfg.n_samples);
    for _ in 0..cfg.n_samples {
        let u = match &kernel {
            Some(k) => band_direction(n, k, cfg.band, &mut rng),
            None => random_unit(n, &mut rng),
        };
        let y_star = numerics::add(&m.center, &numerics::scale(&u, m.radius));
        let x = observe(&y_star, &mut rng);
        let mut row = Vec::with_capacity(cfg.kernel_mix.len());
        for &mix in &cfg.kernel_mix {
            let dir = mixed_tangent(m, &y_star, kernel.as_ref(), mix, &mut rng);
            let mut moved = y_star.clone();
            numerics::axpy(&mut moved, cfg.perturb_size, &dir);
            let y_perturbed = m.project(&moved);
            let x_perturbed = observe(&y_perturbed, &mut rng);
            row.push((x_perturbed, y_perturbed));
        }
        originals.push((x, y_star));
        perturbed.push(row);
    }

    let labels: Vec<String> = cfg
        .kernel_mix
        .iter()
        .enumerate()
        .map(|(j, &mix)| {
            if kernel.is_some() && mix > 0.0 {
                format!("ker{:03}", (mix * 100.0).round() as u32)
            } else {
                format!("tan{}", j + 1)
            }
        })
        .collect();
    let ds = PairedDataset::new(originals, perturbed, labels.clone());

    let zeros = vec![0.0; n];
    let run = |x: &[f64]| -> Result<Vec<Vector>, SolveError> {
        match cfg.alg {
            GrowthAlg::Pgd => {
                iterate_exactly(&PgdOp { prob, manifold: m }, x, &zeros, cfg.t_max)
            }
            GrowthAlg::Hqs => {
                iterate_exactly(&HqsOp { prob, manifold: m }, x, &zeros, cfg.t_max)
            }
        }
    };
    // Surface numerical failures before the measurement pass, which can
    // only unwind by panicking.
    for i in 0..ds.n_samples() {
        for j in 0..=ds.n_modes() {
            run(ds.pair(i, j).0)?;
        }
    }
    let rows = curve(|x| run(x).expect("trajectories were validated"), &ds, cfg.t_max, None);
    Ok(GrowthResult { rows, labels, noise_bound, noise_used })
}

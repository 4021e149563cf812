//! Empirical Lipschitz, relative-error, and PSNR curves over paired
//! original/perturbed datasets.
//!
//! The dataset is indexed `(i, j)` where `j = 0` aliases the unperturbed
//! sample and `j >= 1` are named perturbation modes. The Lipschitz statistic
//! `L_t(j)` is a sampled max of difference quotients of the t-step map, taken
//! over `i` for fixed mode `j`; the relative error `E_t` averages over all
//! `(i, j)` pairs including `j = 0`. Neither is more than its sample: columns
//! are labeled empirical and nothing here extrapolates.

use crate::numerics::{self, sig9};
use std::io::{self, Write};

/// Denominator guard in the relative error, `||y - y*|| / (||y*|| + eps)`.
pub const REL_ERR_EPS: f64 = 1e-8;

/// Originals `(x_i, y*_i)` plus, per perturbation mode `j`, the perturbed
/// pairs `(x_{i,j}, y*_{i,j})`.
#[derive(Debug, Clone)]
pub struct PairedDataset {
    originals: Vec<(Vec<f64>, Vec<f64>)>,
    /// `perturbed[i][j - 1]` holds mode `j` for sample `i`.
    perturbed: Vec<Vec<(Vec<f64>, Vec<f64>)>>,
    j_labels: Vec<String>,
}

impl PairedDataset {
    /// Panics if shapes disagree or any perturbed input equals its original
    /// (the Lipschitz denominator would vanish).
    pub fn new(
        originals: Vec<(Vec<f64>, Vec<f64>)>,
        perturbed: Vec<Vec<(Vec<f64>, Vec<f64>)>>,
        j_labels: Vec<String>,
    ) -> Self {
        assert_eq!(originals.len(), perturbed.len(), "per-sample perturbation rows required");
        for (i, row) in perturbed.iter().enumerate() {
            assert_eq!(row.len(), j_labels.len(), "sample {i} has a mode count mismatch");
            for (j, (x, _)) in row.iter().enumerate() {
                assert!(
                    numerics::dist(x, &originals[i].0) > 0.0,
                    "perturbed input ({i}, {}) equals its original",
                    j + 1
                );
            }
        }
        PairedDataset { originals, perturbed, j_labels }
    }

    pub fn n_samples(&self) -> usize {
        self.originals.len()
    }

    pub fn n_modes(&self) -> usize {
        self.j_labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.j_labels
    }

    /// `(x, y*)` at `(i, j)`; `j = 0` is the original sample.
    pub fn pair(&self, i: usize, j: usize) -> (&[f64], &[f64]) {
        if j == 0 {
            (&self.originals[i].0, &self.originals[i].1)
        } else {
            let p = &self.perturbed[i][j - 1];
            (&p.0, &p.1)
        }
    }
}

/// `||y - y*|| / (||y*|| + eps)`.
pub fn relative_error(y: &[f64], y_star: &[f64], eps: f64) -> f64 {
    assert!(eps > 0.0);
    numerics::dist(y, y_star) / (numerics::norm(y_star) + eps)
}

/// `10 log10(n MAX^2 / ||y - y*||^2)` in dB; `+inf` when `y = y*`.
pub fn psnr(y: &[f64], y_star: &[f64], max_val: f64) -> f64 {
    assert!(max_val > 0.0);
    let n = y.len() as f64;
    let mut err = 0.0;
    for i in 0..y.len() {
        let d = y[i] - y_star[i];
        err += d * d;
    }
    if err == 0.0 {
        return f64::INFINITY;
    }
    10.0 * (n * max_val * max_val / err).log10()
}

/// Max over `i` of `||y(x_i) - y(x_{i,j})|| / ||x_i - x_{i,j}||` for one
/// perturbation mode. Panics if the mode index is out of range; zero
/// denominators are impossible by the dataset invariant.
pub fn empirical_lipschitz<F: FnMut(&[f64]) -> Vec<f64>>(
    mut y_of: F,
    ds: &PairedDataset,
    mode_j: usize,
) -> f64 {
    assert!(mode_j >= 1 && mode_j <= ds.n_modes(), "mode {mode_j} out of range");
    let mut worst = 0.0f64;
    for i in 0..ds.n_samples() {
        let (x0, _) = ds.pair(i, 0);
        let (xj, _) = ds.pair(i, mode_j);
        let denom = numerics::dist(x0, xj);
        assert!(denom > 0.0, "zero input distance at sample {i}");
        let ratio = numerics::dist(&y_of(x0), &y_of(xj)) / denom;
        if ratio > worst {
            worst = ratio;
        }
    }
    worst
}

/// One row of an iteration-indexed curve: `L_t` per mode, `E_t` mean and
/// (population) standard deviation, and optional PSNR statistics.
#[derive(Debug, Clone)]
pub struct CurveRow {
    pub t: usize,
    pub l_t: Vec<f64>,
    pub e_mean: f64,
    pub e_std: f64,
    pub p_mean: Option<f64>,
    pub p_std: Option<f64>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mut s = 0.0;
    for v in values {
        s += v;
    }
    let mean = s / n;
    let mut q = 0.0;
    for v in values {
        let d = v - mean;
        q += d * d;
    }
    (mean, (q / n).sqrt())
}

/// Curves for `t = 1..=t_max` from one trajectory per dataset point.
///
/// `traj(x)` must return the iterates `y_0..y_{t_max}` (length `t_max + 1`);
/// every row is read off that prefix, so the model is evaluated once per
/// `(i, j)`. When `psnr_max` is set, PSNR statistics are included with the
/// given peak value.
pub fn curve<F>(traj: F, ds: &PairedDataset, t_max: usize, psnr_max: Option<f64>) -> Vec<CurveRow>
where
    F: Fn(&[f64]) -> Vec<Vec<f64>> + Sync,
{
    curve_threaded(traj, ds, t_max, psnr_max, 1)
}

/// [`curve`] with trajectories computed on `threads` worker threads.
/// Aggregation stays single-threaded in fixed `(i, j)` order, so the result
/// does not depend on the thread count.
pub fn curve_threaded<F>(
    traj: F,
    ds: &PairedDataset,
    t_max: usize,
    psnr_max: Option<f64>,
    threads: usize,
) -> Vec<CurveRow>
where
    F: Fn(&[f64]) -> Vec<Vec<f64>> + Sync,
{
    assert!(t_max >= 1);
    let n = ds.n_samples();
    let modes = ds.n_modes();
    let width = modes + 1;

    // One trajectory per (i, j), j = 0 first.
    let mut trajs: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n * width);
    if threads <= 1 {
        for i in 0..n {
            for j in 0..width {
                trajs.push(run_one(&traj, ds, i, j, t_max));
            }
        }
    } else {
        let mut slots: Vec<Option<Vec<Vec<f64>>>> = (0..n * width).map(|_| None).collect();
        let chunk = slots.len().div_ceil(threads);
        std::thread::scope(|scope| {
            for (c, slot_chunk) in slots.chunks_mut(chunk).enumerate() {
                let traj = &traj;
                scope.spawn(move || {
                    for (off, slot) in slot_chunk.iter_mut().enumerate() {
                        let idx = c * chunk + off;
                        *slot = Some(run_one(traj, ds, idx / width, idx % width, t_max));
                    }
                });
            }
        });
        trajs = slots.into_iter().map(|s| s.unwrap()).collect();
    }

    let mut x_dist = vec![vec![0.0; modes]; n];
    for i in 0..n {
        for j in 1..=modes {
            let d = numerics::dist(ds.pair(i, 0).0, ds.pair(i, j).0);
            assert!(d > 0.0, "zero input distance at sample {i}, mode {j}");
            x_dist[i][j - 1] = d;
        }
    }

    let mut rows = Vec::with_capacity(t_max);
    for t in 1..=t_max {
        let mut l_t = vec![0.0f64; modes];
        for j in 1..=modes {
            let mut worst = 0.0f64;
            for i in 0..n {
                let y0 = &trajs[i * width][t];
                let yj = &trajs[i * width + j][t];
                let ratio = numerics::dist(y0, yj) / x_dist[i][j - 1];
                if ratio > worst {
                    worst = ratio;
                }
            }
            l_t[j - 1] = worst;
        }
        let mut errs = Vec::with_capacity(n * width);
        let mut psnrs = Vec::with_capacity(if psnr_max.is_some() { n * width } else { 0 });
        for i in 0..n {
            for j in 0..width {
                let (_, y_star) = ds.pair(i, j);
                let y = &trajs[i * width + j][t];
                errs.push(relative_error(y, y_star, REL_ERR_EPS));
                if let Some(mx) = psnr_max {
                    psnrs.push(psnr(y, y_star, mx));
                }
            }
        }
        let (e_mean, e_std) = mean_std(&errs);
        let (p_mean, p_std) = if psnr_max.is_some() {
            let (m, s) = mean_std(&psnrs);
            (Some(m), Some(s))
        } else {
            (None, None)
        };
        rows.push(CurveRow { t, l_t, e_mean, e_std, p_mean, p_std });
    }
    rows
}

fn run_one<F>(traj: &F, ds: &PairedDataset, i: usize, j: usize, t_max: usize) -> Vec<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<Vec<f64>>,
{
    let (x, _) = ds.pair(i, j);
    let ys = traj(x);
    assert!(ys.len() >= t_max + 1, "trajectory for ({i}, {j}) is shorter than t_max + 1");
    ys
}

/// CSV with header `t,L_t_<mode>...,E_mean,E_std[,P_mean,P_std]`; floats are
/// printed with 9 significant digits.
pub fn write_curves_csv<W: Write>(w: &mut W, rows: &[CurveRow], labels: &[String]) -> io::Result<()> {
    let with_psnr = rows.first().map(|r| r.p_mean.is_some()).unwrap_or(false);
    let mut header = String::from("t");
    for lab in labels {
        header.push_str(",L_t_");
        header.push_str(lab);
    }
    header.push_str(",E_mean,E_std");
    if with_psnr {
        header.push_str(",P_mean,P_std");
    }
    writeln!(w, "{header}")?;
    for row in rows {
        let mut line = row.t.to_string();
        for v in &row.l_t {
            line.push(',');
            line.push_str(&sig9(*v));
        }
        line.push(',');
        line.push_str(&sig9(row.e_mean));
        line.push(',');
        line.push_str(&sig9(row.e_std));
        if with_psnr {
            line.push(',');
            line.push_str(&sig9(row.p_mean.unwrap()));
            line.push(',');
            line.push_str(&sig9(row.p_std.unwrap()));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_dataset() -> PairedDataset {
        PairedDataset::new(
            vec![(vec![0.0], vec![0.0])],
            vec![vec![(vec![1.0], vec![3.0])]],
            vec!["shift".to_string()],
        )
    }

    #[test]
    fn lipschitz_of_identity_is_one() {
        let ds = PairedDataset::new(
            vec![(vec![0.0, 0.0], vec![0.0, 0.0]), (vec![1.0, 2.0], vec![1.0, 2.0])],
            vec![
                vec![(vec![0.5, 0.0], vec![0.5, 0.0])],
                vec![(vec![1.0, 2.5], vec![1.0, 2.5])],
            ],
            vec!["m".to_string()],
        );
        let l = empirical_lipschitz(|x| x.to_vec(), &ds, 1);
        assert!((l - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lipschitz_of_constant_is_zero() {
        let ds = tiny_dataset();
        let l = empirical_lipschitz(|_| vec![7.0], &ds, 1);
        assert_eq!(l, 0.0);
    }

    #[test]
    fn lipschitz_single_pair_ratio() {
        let ds = tiny_dataset();
        // Outputs 0 and 3 over input distance 1.
        let l = empirical_lipschitz(|x| vec![3.0 * x[0]], &ds, 1);
        assert!((l - 3.0).abs() < 1e-15);
    }

    #[test]
    fn relative_error_basics() {
        assert_eq!(relative_error(&[1.0, 2.0], &[1.0, 2.0], REL_ERR_EPS), 0.0);
        let e = relative_error(&[0.0], &[1.0], REL_ERR_EPS);
        assert!((e - 1.0).abs() < 1e-7);
        // Degenerate reference: ||y|| / eps, large but finite.
        let e = relative_error(&[1.0], &[0.0], REL_ERR_EPS);
        assert!(e.is_finite() && e > 1e7);
    }

    #[test]
    fn psnr_reference_points() {
        // ||y - y*||^2 = n MAX^2 gives exactly 0 dB.
        let p = psnr(&[2.0, 2.0], &[0.0, 0.0], 2.0);
        assert!(p.abs() < 1e-12);
        // Halving the error norm adds 20 log10(2) dB.
        let p1 = psnr(&[1.0], &[0.0], 1.0);
        let p2 = psnr(&[0.5], &[0.0], 1.0);
        assert!((p2 - p1 - 20.0 * 2.0f64.log10()).abs() < 1e-9);
        assert_eq!(psnr(&[1.0], &[1.0], 1.0), f64::INFINITY);
    }

    #[test]
    fn psnr_strictly_decreasing_in_error() {
        let mut prev = f64::INFINITY;
        for k in 1..20 {
            let y = vec![k as f64 * 0.1];
            let p = psnr(&y, &[0.0], 1.0);
            assert!(p < prev);
            prev = p;
        }
    }

    #[test]
    fn curve_constant_model() {
        let ds = tiny_dataset();
        let rows = curve(|_x| vec![vec![9.0]; 4], &ds, 3, None);
        for row in &rows {
            assert_eq!(row.l_t, vec![0.0]);
            assert!((row.e_mean - rows[0].e_mean).abs() < 1e-15);
        }
    }

    #[test]
    fn curve_threaded_matches_sequential() {
        let ds = PairedDataset::new(
            vec![(vec![1.0], vec![1.0]), (vec![2.0], vec![4.0]), (vec![3.0], vec![9.0])],
            vec![
                vec![(vec![1.1], vec![1.21]), (vec![0.9], vec![0.81])],
                vec![(vec![2.1], vec![4.41]), (vec![1.9], vec![3.61])],
                vec![(vec![3.1], vec![9.61]), (vec![2.9], vec![8.41])],
            ],
            vec!["up".to_string(), "down".to_string()],
        );
        let traj = |x: &[f64]| {
            let mut ys = vec![vec![0.0]];
            for t in 1..=5usize {
                let prev = ys[t - 1][0];
                ys.push(vec![0.5 * prev + 0.5 * x[0] * x[0]]);
            }
            ys
        };
        let a = curve_threaded(traj, &ds, 5, Some(10.0), 1);
        let b = curve_threaded(traj, &ds, 5, Some(10.0), 3);
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(ra.e_mean.to_bits(), rb.e_mean.to_bits());
            assert_eq!(ra.p_mean.unwrap().to_bits(), rb.p_mean.unwrap().to_bits());
            for (u, v) in ra.l_t.iter().zip(&rb.l_t) {
                assert_eq!(u.to_bits(), v.to_bits());
            }
        }
    }

    #[test]
    fn csv_header_and_digits() {
        let rows = vec![CurveRow {
            t: 1,
            l_t: vec![1.5],
            e_mean: 0.25,
            e_std: 0.0,
            p_mean: None,
            p_std: None,
        }];
        let mut buf = Vec::new();
        write_curves_csv(&mut buf, &rows, &["m".to_string()]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "t,L_t_m,E_mean,E_std\n1,1.50000000e0,2.50000000e-1,0.00000000e0\n");
    }

    #[test]
    #[should_panic(expected = "equals its original")]
    fn dataset_rejects_zero_perturbation() {
        PairedDataset::new(
            vec![(vec![1.0], vec![1.0])],
            vec![vec![(vec![1.0], vec![2.0])]],
            vec!["m".to_string()],
        );
    }
}

//! Two-layer ReLU perceptrons with hand-derived forward/backward passes.
//!
//! The network is `y = W2 * relu(W1 * x + b1) + b2`. [`mlp_forward`] records
//! the activations on a [`Tape`]; [`mlp_backward`] consumes that tape by
//! value, so a tape can never back two passes. The ReLU subgradient at 0 is
//! fixed to 0, which keeps gradients bit-reproducible.
//!
//! [`grad_check`] is the finite-difference oracle every gradient in the
//! workspace is verified against.

use std::io::{self, Read, Write};
use std::path::Path;

use fixlab_core::numerics::{gemv, Matrix, Rng, Vector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad manifest: {0}")]
    BadManifest(String),
}

/// Two affine layers around one ReLU. `w1` is `hidden x in`, `w2` is
/// `out x hidden`, both row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp2 {
    pub w1: Matrix,
    pub b1: Vector,
    pub w2: Matrix,
    pub b2: Vector,
}

#[derive(Serialize, Deserialize)]
struct MlpManifest {
    in_dim: usize,
    hidden: usize,
    out_dim: usize,
}

impl Mlp2 {
    pub fn zeros(in_dim: usize, hidden: usize, out_dim: usize) -> Self {
        assert!(in_dim >= 1 && hidden >= 1 && out_dim >= 1);
        Mlp2 {
            w1: Matrix::zeros(hidden, in_dim),
            b1: vec![0.0; hidden],
            w2: Matrix::zeros(out_dim, hidden),
            b2: vec![0.0; out_dim],
        }
    }

    /// Uniform init in `[-s, s]` with `s = sqrt(6 / (fan_in + fan_out))`
    /// per layer; biases start at zero.
    pub fn xavier(in_dim: usize, hidden: usize, out_dim: usize, rng: &mut Rng) -> Self {
        let mut mlp = Mlp2::zeros(in_dim, hidden, out_dim);
        let s1 = (6.0 / (in_dim + hidden) as f64).sqrt();
        for v in mlp.w1.data.iter_mut() {
            *v = rng.uniform_in(-s1, s1);
        }
        let s2 = (6.0 / (hidden + out_dim) as f64).sqrt();
        for v in mlp.w2.data.iter_mut() {
            *v = rng.uniform_in(-s2, s2);
        }
        mlp
    }

    /// `(in, hidden, out)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.w1.cols, self.w1.rows, self.w2.rows)
    }

    pub fn param_count(&self) -> usize {
        self.w1.data.len() + self.b1.len() + self.w2.data.len() + self.b2.len()
    }

    /// Appends all parameters in the fixed order w1, b1, w2, b2 (matrices
    /// row-major). Every flat view in the workspace uses this order.
    pub fn params_to(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.w1.data);
        out.extend_from_slice(&self.b1);
        out.extend_from_slice(&self.w2.data);
        out.extend_from_slice(&self.b2);
    }

    /// Reads parameters back from a flat slice in the [`Self::params_to`]
    /// order; returns how many entries were consumed.
    pub fn params_from(&mut self, flat: &[f64]) -> usize {
        assert!(flat.len() >= self.param_count(), "flat parameter slice too short");
        let mut at = 0;
        for dst in [&mut self.w1.data, &mut self.b1, &mut self.w2.data, &mut self.b2] {
            let n = dst.len();
            dst.copy_from_slice(&flat[at..at + n]);
            at += n;
        }
        at
    }

    /// Writes `<name>.json` (shape manifest) and `<name>.bin` (flat
    /// little-endian f64 parameters) under `dir`.
    pub fn save(&self, dir: &Path, name: &str) -> Result<(), NnError> {
        let (in_dim, hidden, out_dim) = self.dims();
        let manifest = MlpManifest { in_dim, hidden, out_dim };
        let json = serde_json::to_string_pretty(&manifest)
            .map_err(|e| NnError::BadManifest(e.to_string()))?;
        std::fs::write(dir.join(format!("{name}.json")), json)?;
        let mut flat = Vec::with_capacity(self.param_count());
        self.params_to(&mut flat);
        let mut f = std::fs::File::create(dir.join(format!("{name}.bin")))?;
        write_f64s(&mut f, &flat)?;
        Ok(())
    }

    /// Inverse of [`Self::save`]; the round trip is bit-exact.
    pub fn load(dir: &Path, name: &str) -> Result<Mlp2, NnError> {
        let json = std::fs::read_to_string(dir.join(format!("{name}.json")))?;
        let m: MlpManifest =
            serde_json::from_str(&json).map_err(|e| NnError::BadManifest(e.to_string()))?;
        let mut mlp = Mlp2::zeros(m.in_dim, m.hidden, m.out_dim);
        let mut f = std::fs::File::open(dir.join(format!("{name}.bin")))?;
        let flat = read_f64s(&mut f, mlp.param_count())?;
        mlp.params_from(&flat);
        Ok(mlp)
    }
}

/// Activations of one forward pass: the input, the hidden pre-activation,
/// and the post-ReLU values. Consumed by value in [`mlp_backward`].
#[derive(Debug)]
pub struct Tape {
    x: Vector,
    pre: Vector,
    post: Vector,
}

/// `y = w2 * relu(w1 * x + b1) + b2` plus the tape for the backward pass.
pub fn mlp_forward(mlp: &Mlp2, x: &[f64]) -> (Vector, Tape) {
    assert_eq!(x.len(), mlp.w1.cols, "input length does not match layer 1");
    let mut pre = gemv(&mlp.w1, x);
    for (p, b) in pre.iter_mut().zip(&mlp.b1) {
        *p += b;
    }
    let post: Vector = pre.iter().map(|&z| if z > 0.0 { z } else { 0.0 }).collect();
    let mut y = gemv(&mlp.w2, &post);
    for (v, b) in y.iter_mut().zip(&mlp.b2) {
        *v += b;
    }
    (y, Tape { x: x.to_vec(), pre, post })
}

/// Parameter gradients in the same shapes as [`Mlp2`].
#[derive(Debug, Clone)]
pub struct Mlp2Grads {
    pub w1: Matrix,
    pub b1: Vector,
    pub w2: Matrix,
    pub b2: Vector,
}

impl Mlp2Grads {
    pub fn zeros_like(mlp: &Mlp2) -> Self {
        let (i, h, o) = mlp.dims();
        Mlp2Grads {
            w1: Matrix::zeros(h, i),
            b1: vec![0.0; h],
            w2: Matrix::zeros(o, h),
            b2: vec![0.0; o],
        }
    }

    /// `self += other`, entrywise in the fixed parameter order.
    pub fn accumulate(&mut self, other: &Mlp2Grads) {
        for (a, b) in self.w1.data.iter_mut().zip(&other.w1.data) {
            *a += b;
        }
        for (a, b) in self.b1.iter_mut().zip(&other.b1) {
            *a += b;
        }
        for (a, b) in self.w2.data.iter_mut().zip(&other.w2.data) {
            *a += b;
        }
        for (a, b) in self.b2.iter_mut().zip(&other.b2) {
            *a += b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        for v in self
            .w1
            .data
            .iter_mut()
            .chain(self.b1.iter_mut())
            .chain(self.w2.data.iter_mut())
            .chain(self.b2.iter_mut())
        {
            *v *= c;
        }
    }

    /// Appends in the [`Mlp2::params_to`] order.
    pub fn grads_to(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.w1.data);
        out.extend_from_slice(&self.b1);
        out.extend_from_slice(&self.w2.data);
        out.extend_from_slice(&self.b2);
    }
}

/// Reverse pass for one sample. Takes the tape by value: reusing a tape is
/// rejected at compile time. Returns `(dparams, dx)` for upstream
/// sensitivity `dy`.
pub fn mlp_backward(mlp: &Mlp2, tape: Tape, dy: &[f64]) -> (Mlp2Grads, Vector) {
    let (in_dim, hidden, out_dim) = mlp.dims();
    assert_eq!(dy.len(), out_dim, "dy length does not match the output");
    assert_eq!(tape.x.len(), in_dim, "tape does not match this network");
    assert_eq!(tape.pre.len(), hidden, "tape does not match this network");

    let mut g = Mlp2Grads::zeros_like(mlp);
    g.b2.copy_from_slice(dy);
    for o in 0..out_dim {
        for j in 0..hidden {
            g.w2.set(o, j, dy[o] * tape.post[j]);
        }
    }
    // dz = (w2' dy) masked by the ReLU slope; slope at exactly 0 is 0
    let mut dz = vec![0.0; hidden];
    for j in 0..hidden {
        if tape.pre[j] > 0.0 {
            let mut s = 0.0;
            for o in 0..out_dim {
                s += mlp.w2.get(o, j) * dy[o];
            }
            dz[j] = s;
        }
    }
    g.b1.copy_from_slice(&dz);
    for j in 0..hidden {
        for i in 0..in_dim {
            g.w1.set(j, i, dz[j] * tape.x[i]);
        }
    }
    let mut dx = vec![0.0; in_dim];
    for i in 0..in_dim {
        let mut s = 0.0;
        for j in 0..hidden {
            s += mlp.w1.get(j, i) * dz[j];
        }
        dx[i] = s;
    }
    (g, dx)
}

/// Central-difference check of an analytic gradient: returns
/// `max_i |numeric_i - analytic_i| / (|analytic_i| + 1e-8)`.
pub fn grad_check<F: Fn(&[f64]) -> f64>(f: F, params: &[f64], analytic: &[f64], h: f64) -> f64 {
    assert!(h > 0.0, "step must be positive");
    assert_eq!(params.len(), analytic.len());
    let mut worst = 0.0f64;
    let mut p = params.to_vec();
    for i in 0..p.len() {
        let keep = p[i];
        p[i] = keep + h;
        let up = f(&p);
        p[i] = keep - h;
        let dn = f(&p);
        p[i] = keep;
        let numeric = (up - dn) / (2.0 * h);
        let rel = (numeric - analytic[i]).abs() / (analytic[i].abs() + 1e-8);
        worst = worst.max(rel);
    }
    worst
}

/// Little-endian f64 stream writer used by all parameter checkpoints.
pub fn write_f64s<W: Write>(w: &mut W, xs: &[f64]) -> io::Result<()> {
    for &v in xs {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads exactly `n` little-endian f64 values.
pub fn read_f64s<R: Read>(r: &mut R, n: usize) -> io::Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    let mut buf = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut buf)?;
        out.push(f64::from_le_bytes(buf));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_network_maps_everything_to_zero() {
        let mlp = Mlp2::zeros(3, 5, 2);
        let (y, _) = mlp_forward(&mlp, &[1.0, -2.0, 0.5]);
        assert_eq!(y, vec![0.0, 0.0]);
    }

    #[test]
    fn identity_layers_pass_nonnegative_inputs_through() {
        let mut mlp = Mlp2::zeros(3, 3, 3);
        mlp.w1 = Matrix::identity(3);
        mlp.w2 = Matrix::identity(3);
        let x = vec![0.0, 1.5, 2.25];
        let (y, _) = mlp_forward(&mlp, &x);
        assert_eq!(y, x);
    }

    #[test]
    fn dead_relu_leaves_only_the_output_bias() {
        let mut mlp = Mlp2::zeros(1, 1, 1);
        mlp.w1.set(0, 0, 1.0);
        mlp.w2.set(0, 0, 2.0);
        mlp.b2[0] = 3.0;
        let (y, _) = mlp_forward(&mlp, &[-1.0]);
        assert_eq!(y, vec![3.0]);
    }

    #[test]
    fn zero_upstream_gradient_zeroes_everything() {
        let mut rng = Rng::new(3);
        let mlp = Mlp2::xavier(3, 4, 2, &mut rng);
        let (_, tape) = mlp_forward(&mlp, &[0.3, -0.2, 0.9]);
        let (g, dx) = mlp_backward(&mlp, tape, &[0.0, 0.0]);
        assert!(dx.iter().all(|&v| v == 0.0));
        let mut flat = Vec::new();
        g.grads_to(&mut flat);
        assert!(flat.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn input_gradient_is_the_chained_transpose_in_the_linear_regime() {
        // biases push every pre-activation positive, so the ReLU is identity
        let mut mlp = Mlp2::zeros(2, 3, 2);
        mlp.w1 = Matrix::from_rows(&[vec![0.5, -0.25], vec![0.1, 0.2], vec![-0.3, 0.4]]);
        mlp.b1 = vec![10.0, 10.0, 10.0];
        mlp.w2 = Matrix::from_rows(&[vec![1.0, -1.0, 2.0], vec![0.5, 0.25, -0.75]]);
        let x = [0.2, -0.1];
        let dy = [1.5, -2.0];
        let (_, tape) = mlp_forward(&mlp, &x);
        let (_, dx) = mlp_backward(&mlp, tape, &dy);
        let expect = gemv(&mlp.w1.transpose(), &gemv(&mlp.w2.transpose(), &dy));
        assert_eq!(dx, expect);
    }

    #[test]
    fn every_parameter_gradient_matches_finite_differences() {
        let mut rng = Rng::new(11);
        let mlp = Mlp2::xavier(3, 4, 2, &mut rng);
        let x = rng.uniform_vec(3, -1.0, 1.0);
        let v = rng.uniform_vec(2, -1.0, 1.0);
        // keep the probe away from ReLU kinks so the FD stencil is smooth
        let (_, tape) = mlp_forward(&mlp, &x);
        assert!(tape.pre.iter().all(|&z| z.abs() > 1e-3), "reseed: kink too close");

        let (_, tape) = mlp_forward(&mlp, &x);
        let (g, _) = mlp_backward(&mlp, tape, &v);
        let mut analytic = Vec::new();
        g.grads_to(&mut analytic);
        let mut params = Vec::new();
        mlp.params_to(&mut params);

        let probe = mlp.clone();
        let (xi, vi) = (x.clone(), v.clone());
        let f = move |p: &[f64]| {
            let mut m = probe.clone();
            m.params_from(p);
            let (y, _) = mlp_forward(&m, &xi);
            y.iter().zip(&vi).map(|(a, b)| a * b).sum()
        };
        let worst = grad_check(f, &params, &analytic, 1e-5);
        assert!(worst <= 1e-6, "max rel err {worst}");
    }

    #[test]
    fn quadratic_gradient_check_is_exact_to_roundoff() {
        let w = vec![0.3, -1.2, 0.7];
        let analytic: Vec<f64> = w.iter().map(|v| 2.0 * v).collect();
        let worst = grad_check(|p| p.iter().map(|v| v * v).sum(), &w, &analytic, 1e-5);
        assert!(worst <= 1e-9, "max rel err {worst}");
    }

    #[test]
    fn constant_function_checks_out_at_zero() {
        let worst = grad_check(|_| 4.25, &[1.0, 2.0], &[0.0, 0.0], 1e-5);
        assert_eq!(worst, 0.0);
    }

    #[test]
    fn bias_free_networks_are_positively_homogeneous() {
        let mut rng = Rng::new(5);
        let mlp = Mlp2::xavier(2, 6, 3, &mut rng);
        let x = [0.4, -0.8];
        let (y1, _) = mlp_forward(&mlp, &x);
        // powers of two scale exactly through the affine maps and the ReLU
        for c in [0.0, 0.5, 2.0] {
            let xc = [c * x[0], c * x[1]];
            let (yc, _) = mlp_forward(&mlp, &xc);
            for (a, b) in yc.iter().zip(&y1) {
                assert_eq!(*a, c * b);
            }
        }
        let c = 1.7;
        let (yc, _) = mlp_forward(&mlp, &[c * x[0], c * x[1]]);
        for (a, b) in yc.iter().zip(&y1) {
            assert!((a - c * b).abs() <= 1e-12);
        }
    }

    #[test]
    fn save_then_load_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = Rng::new(21);
        let mlp = Mlp2::xavier(4, 7, 3, &mut rng);
        mlp.save(dir.path(), "theta").unwrap();
        let back = Mlp2::load(dir.path(), "theta").unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        mlp.params_to(&mut a);
        back.params_to(&mut b);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    #[should_panic(expected = "input length does not match")]
    fn wrong_input_length_is_rejected() {
        let mlp = Mlp2::zeros(3, 2, 1);
        mlp_forward(&mlp, &[1.0, 2.0]);
    }
}

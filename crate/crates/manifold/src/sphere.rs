//! A sphere of radius `tau` as the data manifold: the one compact surface
//! whose projection, distance, proximal map, and reach are all closed-form.
//! The reach of a sphere equals its radius, so `tau` plays both roles.

use fixlab_core::numerics::{self, Rng, Vector};

/// Sphere `{ z : ||z - center|| = radius }` in the ambient space of the
/// center. The radius is also the reach.
#[derive(Debug, Clone)]
pub struct SphereManifold {
    pub center: Vector,
    pub radius: f64,
}

impl SphereManifold {
    /// Panics unless the radius is positive and the center nonempty.
    pub fn new(center: Vector, radius: f64) -> Self {
        assert!(!center.is_empty(), "ambient dimension must be at least 1");
        assert!(radius > 0.0, "the reach of the sphere is its radius and must be positive");
        SphereManifold { center, radius }
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Nearest sphere point, `center + radius * (z - center)/||z - center||`.
    /// Panics at the focal point `z = center`, where every direction ties.
    pub fn project(&self, z: &[f64]) -> Vector {
        let d = numerics::sub(z, &self.center);
        let r = numerics::norm(&d);
        assert!(r > 0.0, "projection is undefined at the focal point");
        numerics::add(&self.center, &numerics::scale(&d, self.radius / r))
    }

    /// Exact distance to the sphere, `| ||z - center|| - radius |`. Defined
    /// everywhere, including the center.
    pub fn dist(&self, z: &[f64]) -> f64 {
        (numerics::dist(z, &self.center) - self.radius).abs()
    }

    /// Minimizer of `(sigma/2) dist^2(y) + (1/2)||y - z||^2`, which sits on
    /// the segment from `z` to its projection: `(z + sigma p(z))/(1 + sigma)`.
    /// Panics at the focal point or for a nonpositive weight.
    pub fn prox(&self, z: &[f64], sigma: f64) -> Vector {
        assert!(sigma > 0.0, "prox weight must be positive");
        let p = self.project(z);
        let mut out = Vector::with_capacity(z.len());
        for i in 0..z.len() {
            out.push((z[i] + sigma * p[i]) / (1.0 + sigma));
        }
        out
    }

    /// The penalty the prox minimizes, `(sigma/2) dist^2(y) + (1/2)||y-z||^2`.
    pub fn prox_objective(&self, y: &[f64], z: &[f64], sigma: f64) -> f64 {
        let d = self.dist(y);
        0.5 * sigma * d * d + 0.5 * numerics::dist(y, z).powi(2)
    }

    /// Uniform random direction point on the sphere.
    pub fn random_point(&self, rng: &mut Rng) -> Vector {
        let u = random_unit(self.dim(), rng);
        numerics::add(&self.center, &numerics::scale(&u, self.radius))
    }

    /// Unit vector tangent at `at` (orthogonal to the radial direction).
    /// Panics if `at` has no radial direction (the focal point) or the
    /// ambient dimension is 1 (no tangent space).
    pub fn random_tangent(&self, at: &[f64], rng: &mut Rng) -> Vector {
        assert!(self.dim() >= 2, "a 0-sphere has no tangent directions");
        let radial = numerics::sub(at, &self.center);
        let r = numerics::norm(&radial);
        assert!(r > 0.0, "tangent space is undefined at the focal point");
        let u = numerics::scale(&radial, 1.0 / r);
        loop {
            let v = rng.normal_vec(self.dim(), 0.0, 1.0);
            let mut t = v.clone();
            numerics::axpy(&mut t, -numerics::dot(&v, &u), &u);
            let tn = numerics::norm(&t);
            if tn > 1e-9 {
                return numerics::scale(&t, 1.0 / tn);
            }
        }
    }
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

/// Point in the closed tube of radius `tube_r` around the sphere, sampled as
/// a uniform direction at a uniform signed offset from the surface.
pub fn sample_tube(m: &SphereManifold, tube_r: f64, rng: &mut Rng) -> Vector {
    assert!(tube_r >= 0.0);
    let u = random_unit(m.dim(), rng);
    let rho = m.radius + rng.uniform_in(-tube_r, tube_r);
    numerics::add(&m.center, &numerics::scale(&u, rho))
}

/// Largest sampled ratio `||S(z) - S(z')|| / ||z - z'||` of the prox residual
/// `S(z) = prox(z, sigma) - z` over `n_pairs` pairs in the tube of radius
/// `tube_r`, with pair separation capped at a quarter of the reach (pairs
/// drawn farther apart are redrawn, never evaluated).
///
/// The tube radius must not exceed a quarter of the reach; inside that
/// regime the ratio stays below `sigma/(1+sigma)`.
pub fn prox_residual_lipschitz(
    m: &SphereManifold,
    sigma: f64,
    tube_r: f64,
    n_pairs: usize,
    rng: &mut Rng,
) -> f64 {
    assert!(sigma > 0.0);
    assert!(n_pairs >= 1);
    assert!(
        tube_r <= m.radius / 4.0,
        "tube radius exceeds a quarter of the reach; the contraction bound needs r <= tau/4"
    );
    let max_sep = m.radius / 4.0;
    let residual = |z: &[f64]| -> Vector { numerics::sub(&m.prox(z, sigma), z) };
    let mut worst = 0.0f64;
    for _ in 0..n_pairs {
        let z = sample_tube(m, tube_r, rng);
        let z2 = loop {
            let dir = random_unit(m.dim(), rng);
            let step = rng.uniform_in(0.0, max_sep);
            if step == 0.0 {
                continue;
            }
            let cand = numerics::add(&z, &numerics::scale(&dir, step));
            if m.dist(&cand) <= tube_r {
                break cand;
            }
        };
        let ratio = numerics::dist(&residual(&z), &residual(&z2)) / numerics::dist(&z, &z2);
        if ratio > worst {
            worst = ratio;
        }
    }
    worst
}

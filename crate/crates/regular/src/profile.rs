//! The `eps_hat` profile: radius-indexed suprema of `|F'|` and `|F|` over the
//! safe part of the domain, squashed into a rate and integrated.

use crate::target::Target1D;
use crate::RegularError;

/// Lower bound on the radius-grid size used for the quadrature.
pub const MIN_QUADRATURE_NODES: usize = 512;

/// Radius profile of a target. All vectors share the `r_grid` length except
/// `x_grid`, which records the domain grid behind the suprema.
#[derive(Debug, Clone)]
pub struct EpsilonProfile {
    /// Uniform radii from 0 to `r_max` inclusive.
    pub r_grid: Vec<f64>,
    /// `sup |F'|` over grid points at distance >= r from the singular set
    /// (0 when no grid point qualifies).
    pub h1: Vec<f64>,
    /// `sup |F|` over the same points (0 when none qualify).
    pub h2: Vec<f64>,
    /// `1 / (h1 + h2 + 1)`, always in (0, 1].
    pub h_hat: Vec<f64>,
    /// Cumulative trapezoid of `h_hat`; starts at exactly 0, nondecreasing,
    /// 1-Lipschitz in r.
    pub eps_hat: Vec<f64>,
    /// Flattened domain grid the suprema were measured on.
    pub x_grid: Vec<f64>,
}

impl EpsilonProfile {
    pub fn r_max(&self) -> f64 {
        *self.r_grid.last().unwrap()
    }

    /// `eps_hat` linearly interpolated between radius nodes; `r` is clamped
    /// to `[0, r_max]`, so an infinite distance (empty singular set) reads
    /// the profile at `r_max`.
    pub fn eps_hat_at(&self, r: f64) -> f64 {
        assert!(!r.is_nan(), "radius must not be NaN");
        let r = r.clamp(0.0, self.r_max());
        let n = self.r_grid.len();
        let step = self.r_max() / (n - 1) as f64;
        let j = ((r / step) as usize).min(n - 2);
        let t = (r - self.r_grid[j]) / (self.r_grid[j + 1] - self.r_grid[j]);
        self.eps_hat[j] + t * (self.eps_hat[j + 1] - self.eps_hat[j])
    }
}

/// Builds the radius profile of `target` on a domain grid of about
/// `grid_resolution` points and a radius grid of
/// `max(grid_resolution, 512)` nodes over `[0, r_max]`.
///
/// `|F'|` is estimated per interval by central differences at interior grid
/// points and one-sided differences at interval endpoints; stencils never
/// straddle a gap between intervals. Distances to the singular set are
/// clamped to `r_max` before the safe-set test, so with an empty singular
/// set every point stays admissible at every radius.
pub fn build_profile(
    target: &Target1D,
    grid_resolution: usize,
    r_max: f64,
) -> Result<EpsilonProfile, RegularError> {
    assert!(grid_resolution >= 64, "grid_resolution must be at least 64");
    assert!(r_max.is_finite() && r_max > 0.0, "r_max must be positive and finite");

    let mut x_grid = Vec::new();
    let mut f_abs = Vec::new();
    let mut df_abs = Vec::new();
    let mut dist = Vec::new();
    for xs in target.interval_grids(grid_resolution) {
        let fs: Vec<f64> = xs.iter().map(|&x| target.eval(x)).collect();
        for (k, &x) in xs.iter().enumerate() {
            if !fs[k].is_finite() {
                return Err(RegularError::NonFiniteTarget { x });
            }
            let last = xs.len() - 1;
            let d = if k == 0 {
                (fs[1] - fs[0]) / (xs[1] - xs[0])
            } else if k == last {
                (fs[last] - fs[last - 1]) / (xs[last] - xs[last - 1])
            } else {
                (fs[k + 1] - fs[k - 1]) / (xs[k + 1] - xs[k - 1])
            };
            x_grid.push(x);
            f_abs.push(fs[k].abs());
            df_abs.push(d.abs());
            dist.push(target.distance_to_singular(x).min(r_max));
        }
    }
    if x_grid.is_empty() {
        return Err(RegularError::EmptyGrid);
    }

    let nodes = grid_resolution.max(MIN_QUADRATURE_NODES);
    let mut r_grid = Vec::with_capacity(nodes);
    let mut h1 = Vec::with_capacity(nodes);
    let mut h2 = Vec::with_capacity(nodes);
    let mut h_hat = Vec::with_capacity(nodes);
    for j in 0..nodes {
        let r = r_max * j as f64 / (nodes - 1) as f64;
        // sup over the safe set; an empty set leaves both at 0, so h_hat
        // degenerates to 1 (those radii exceed every domain distance and are
        // never read back through eps_hat_at).
        let mut s1 = 0.0f64;
        let mut s2 = 0.0f64;
        for i in 0..x_grid.len() {
            if dist[i] >= r {
                s1 = s1.max(df_abs[i]);
                s2 = s2.max(f_abs[i]);
            }
        }
        r_grid.push(r);
        h1.push(s1);
        h2.push(s2);
        h_hat.push(1.0 / (s1 + s2 + 1.0));
    }

    let mut eps_hat = Vec::with_capacity(nodes);
    eps_hat.push(0.0);
    for j in 1..nodes {
        let panel = 0.5 * (h_hat[j - 1] + h_hat[j]) * (r_grid[j] - r_grid[j - 1]);
        eps_hat.push(eps_hat[j - 1] + panel);
    }

    Ok(EpsilonProfile { r_grid, h1, h2, h_hat, eps_hat, x_grid })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eps_hat_starts_at_exactly_zero() {
        let p = build_profile(&Target1D::reciprocal(), 256, 2.0).unwrap();
        assert_eq!(p.eps_hat[0], 0.0);
        assert_eq!(p.eps_hat_at(0.0), 0.0);
    }

    #[test]
    fn empty_singular_set_gives_flat_rate_and_linear_integral() {
        let t = Target1D::custom("bounded", vec![(0.0, 1.0)], vec![], f64::sin);
        let p = build_profile(&t, 128, 1.0).unwrap();
        let h0 = p.h_hat[0];
        assert!(p.h_hat.iter().all(|&h| h == h0));
        // trapezoid of a constant is exact
        for j in 0..p.r_grid.len() {
            assert!((p.eps_hat[j] - h0 * p.r_grid[j]).abs() <= 1e-15 * (1.0 + p.r_grid[j]));
        }
    }

    #[test]
    fn sup_of_reciprocal_is_captured_near_the_boundary() {
        let t = Target1D::custom("recip+", vec![(0.01, 1.0)], vec![0.0], |x| 1.0 / x);
        let p = build_profile(&t, 4000, 0.99).unwrap();
        // last radius node at or below 0.01 keeps the whole domain admissible
        let j = p.r_grid.iter().rposition(|&r| r <= 0.01).unwrap();
        assert!((p.h2[j] - 100.0).abs() <= 1.0, "h2 = {}", p.h2[j]);
        // one step further the sup can only shrink
        assert!(p.h2[j + 1] <= p.h2[j]);
    }

    #[test]
    fn eps_hat_is_nondecreasing_and_one_lipschitz() {
        let p = build_profile(&Target1D::reciprocal(), 512, 2.0).unwrap();
        for j in 1..p.r_grid.len() {
            let de = p.eps_hat[j] - p.eps_hat[j - 1];
            let dr = p.r_grid[j] - p.r_grid[j - 1];
            assert!(de >= 0.0);
            assert!(de <= dr + 1e-12);
        }
    }

    #[test]
    fn rate_stays_in_unit_interval() {
        for t in [Target1D::tangent(), Target1D::logarithm(), Target1D::square_root()] {
            let r_max = t.diameter();
            let p = build_profile(&t, 300, r_max).unwrap();
            assert!(p.h_hat.iter().all(|&h| h > 0.0 && h <= 1.0));
        }
    }

    #[test]
    fn non_finite_target_value_is_reported_with_location() {
        let t = Target1D::custom("logfull", vec![(0.0, 1.0)], vec![], f64::ln);
        match build_profile(&t, 64, 1.0) {
            Err(RegularError::NonFiniteTarget { x }) => assert_eq!(x, 0.0),
            other => panic!("expected NonFiniteTarget, got {other:?}"),
        }
    }

    #[test]
    fn interpolation_is_linear_between_nodes_and_clamped_outside() {
        let p = build_profile(&Target1D::logarithm(), 128, 0.99).unwrap();
        let mid = 0.5 * (p.r_grid[3] + p.r_grid[4]);
        let expect = 0.5 * (p.eps_hat[3] + p.eps_hat[4]);
        assert!((p.eps_hat_at(mid) - expect).abs() < 1e-15);
        assert_eq!(p.eps_hat_at(5.0), *p.eps_hat.last().unwrap());
        assert_eq!(p.eps_hat_at(f64::INFINITY), *p.eps_hat.last().unwrap());
        assert_eq!(p.eps_hat_at(-1.0), 0.0);
    }
}

//! The constructed operator `G(y, x) = F(x) + (1 - eps(x)) (y - F(x))` plus
//! two hand-written baseline operators it is measured against.

use std::io::{self, Write};

use fixlab_core::fixpoint::ImplicitOp;
use fixlab_core::numerics::{sig9, Vector};

use crate::profile::{build_profile, EpsilonProfile};
use crate::target::Target1D;
use crate::RegularError;

/// A target wrapped into a contraction whose fixed point in `y` is `F(x)`.
#[derive(Debug)]
pub struct RegularOperator1D {
    target: Target1D,
    profile: EpsilonProfile,
}

impl RegularOperator1D {
    /// Builds the radius profile and wraps the target. `r_max` defaults to
    /// the domain diameter.
    pub fn build(
        target: Target1D,
        grid_resolution: usize,
        r_max: Option<f64>,
    ) -> Result<Self, RegularError> {
        let r_max = r_max.unwrap_or_else(|| target.diameter());
        let profile = build_profile(&target, grid_resolution, r_max)?;
        Ok(RegularOperator1D { target, profile })
    }

    pub fn target(&self) -> &Target1D {
        &self.target
    }

    pub fn profile(&self) -> &EpsilonProfile {
        &self.profile
    }

    /// Contraction amount at `x`: `u / (1 + u)` with
    /// `u = eps_hat(d(x, D))`, exactly 0 on the singular set, in (0, 1) on
    /// the domain. Errors when `x` lies in neither.
    pub fn epsilon(&self, x: f64) -> Result<f64, RegularError> {
        if self.target.singular().iter().any(|&s| s == x) {
            return Ok(0.0);
        }
        if !self.target.contains(x) {
            return Err(RegularError::OutsideDomain { x });
        }
        let u = self.profile.eps_hat_at(self.target.distance_to_singular(x));
        Ok(u / (1.0 + u))
    }

    /// One operator application; errors when `x` is outside the domain
    /// (singular points included: the formula needs `F(x)`).
    pub fn apply_scalar(&self, y: f64, x: f64) -> Result<f64, RegularError> {
        if !self.target.contains(x) {
            return Err(RegularError::OutsideDomain { x });
        }
        let eps = self.epsilon(x)?;
        let fx = self.target.eval(x);
        Ok(fx + (1.0 - eps) * (y - fx))
    }

    /// Writes the radius profile as CSV with columns `r,h_hat,eps_hat`.
    pub fn write_profile_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "r,h_hat,eps_hat")?;
        let p = &self.profile;
        for j in 0..p.r_grid.len() {
            writeln!(w, "{},{},{}", sig9(p.r_grid[j]), sig9(p.h_hat[j]), sig9(p.eps_hat[j]))?;
        }
        Ok(())
    }

    /// Writes the domain curve as CSV with columns `x,eps_x,F_x`.
    pub fn write_epsilon_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "x,eps_x,F_x")?;
        for &x in &self.profile.x_grid {
            let eps = self.epsilon(x).expect("profile grid point left the domain");
            writeln!(w, "{},{},{}", sig9(x), sig9(eps), sig9(self.target.eval(x)))?;
        }
        Ok(())
    }
}

impl ImplicitOp for RegularOperator1D {
    fn state_dim(&self) -> usize {
        1
    }
    fn input_dim(&self) -> usize {
        1
    }
    /// Panics when `x[0]` falls outside the target domain; solver drivers
    /// have no error channel for inputs.
    fn apply(&self, y: &[f64], x: &[f64]) -> Vector {
        match self.apply_scalar(y[0], x[0]) {
            Ok(v) => vec![v],
            Err(e) => panic!("{e}"),
        }
    }
}

/// One reciprocal-refinement step `y - sign(x) * eta * (x*y - 1)`. Contracts
/// toward `1/x` at rate `|1 - eta*|x||`.
pub fn reciprocal_op(y: f64, x: f64, eta: f64) -> f64 {
    assert!(x != 0.0, "reciprocal iteration is undefined at x = 0");
    assert!(eta > 0.0 && eta < 1.0, "eta must lie in (0, 1)");
    y - x.signum() * eta * (x * y - 1.0)
}

/// [`reciprocal_op`] with a stored stepsize, usable with the solve drivers.
#[derive(Debug, Clone, Copy)]
pub struct ReciprocalOp {
    pub eta: f64,
}

impl ReciprocalOp {
    pub fn new(eta: f64) -> Self {
        assert!(eta > 0.0 && eta < 1.0, "eta must lie in (0, 1)");
        ReciprocalOp { eta }
    }
}

impl ImplicitOp for ReciprocalOp {
    fn state_dim(&self) -> usize {
        1
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn apply(&self, y: &[f64], x: &[f64]) -> Vector {
        vec![reciprocal_op(y[0], x[0], self.eta)]
    }
}

/// Plain averaging toward the target: `(1 - eta) * y + eta * F(x)`,
/// coordinatewise. Its iterates from zero follow the geometric closed form
/// `y_t = (1 - (1 - eta)^t) F(x)`.
pub fn naive_op<F>(y: &[f64], x: &[f64], eta: f64, f: F) -> Vector
where
    F: Fn(&[f64]) -> Vector,
{
    assert!(eta > 0.0 && eta < 1.0, "eta must lie in (0, 1)");
    let fx = f(x);
    assert_eq!(fx.len(), y.len(), "target output length must match the state");
    y.iter().zip(&fx).map(|(&yi, &fi)| (1.0 - eta) * yi + eta * fi).collect()
}

/// [`naive_op`] with a stored target and dimensions.
pub struct NaiveOp<F: Fn(&[f64]) -> Vector> {
    state_dim: usize,
    input_dim: usize,
    eta: f64,
    f: F,
}

impl<F: Fn(&[f64]) -> Vector> NaiveOp<F> {
    pub fn new(state_dim: usize, input_dim: usize, eta: f64, f: F) -> Self {
        assert!(eta > 0.0 && eta < 1.0, "eta must lie in (0, 1)");
        NaiveOp { state_dim, input_dim, eta, f }
    }
}

impl<F: Fn(&[f64]) -> Vector> ImplicitOp for NaiveOp<F> {
    fn state_dim(&self) -> usize {
        self.state_dim
    }
    fn input_dim(&self) -> usize {
        self.input_dim
    }
    fn apply(&self, y: &[f64], x: &[f64]) -> Vector {
        naive_op(y, x, self.eta, &self.f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use fixlab_core::fixpoint::{picard_solve, SolveConfig};

    fn reciprocal_operator() -> RegularOperator1D {
        RegularOperator1D::build(Target1D::reciprocal(), 800, None).unwrap()
    }

    #[test]
    fn target_value_is_a_fixed_point_bitwise() {
        let op = reciprocal_operator();
        for x in [-0.7, -0.05, 0.02, 0.4, 1.0] {
            let fx = op.target().eval(x);
            assert_eq!(op.apply_scalar(fx, x).unwrap(), fx);
        }
    }

    #[test]
    fn picard_recovers_the_reciprocal_at_a_half() {
        let op = reciprocal_operator();
        let cfg = SolveConfig { max_iter: 5000, ..Default::default() };
        let trace = picard_solve(&op, &[0.5], &[0.0], &cfg).unwrap();
        assert!(trace.converged);
        assert!((trace.final_iterate()[0] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn epsilon_is_zero_on_the_singular_set_and_positive_on_the_domain() {
        let op = reciprocal_operator();
        assert_eq!(op.epsilon(0.0).unwrap(), 0.0);
        for x in [-1.0, -0.01, 0.01, 0.3, 1.0] {
            let e = op.epsilon(x).unwrap();
            assert!(e > 0.0 && e < 1.0, "eps({x}) = {e}");
        }
    }

    #[test]
    fn epsilon_grows_with_distance_from_the_singular_set() {
        let op = reciprocal_operator();
        assert!(op.epsilon(0.9).unwrap() >= op.epsilon(0.3).unwrap());
        assert!(op.epsilon(0.3).unwrap() >= op.epsilon(0.02).unwrap());
    }

    #[test]
    fn points_off_the_domain_are_rejected() {
        let op = reciprocal_operator();
        assert!(matches!(op.epsilon(0.005), Err(RegularError::OutsideDomain { .. })));
        assert!(matches!(op.apply_scalar(1.0, 2.0), Err(RegularError::OutsideDomain { .. })));
        // apply needs F(x), so singular points are rejected there too
        assert!(op.apply_scalar(1.0, 0.0).is_err());
    }

    #[test]
    fn reciprocal_step_matches_hand_values() {
        assert_eq!(reciprocal_op(0.0, 1.0, 0.5), 0.5);
        // x*y == 1 exactly at powers of two, so the fixed point is exact
        for x in [-1.0, 0.5, 2.0] {
            let y = 1.0 / x;
            assert_eq!(reciprocal_op(y, x, 0.3), y);
        }
    }

    #[test]
    fn negative_input_contracts_at_the_expected_rate() {
        // error ratio per step is |1 - eta*|x|| = 0.5 for eta=0.5, x=-1
        let (x, eta) = (-1.0, 0.5);
        let mut y = 0.0f64;
        let mut prev_err = (y + 1.0).abs();
        for _ in 0..20 {
            y = reciprocal_op(y, x, eta);
            let err = (y - (-1.0)).abs();
            assert!((err / prev_err - 0.5).abs() < 1e-12);
            prev_err = err;
        }
    }

    #[test]
    fn averaging_iterates_follow_the_geometric_closed_form() {
        let eta = 0.3;
        let f = |x: &[f64]| vec![2.0 * x[0], x[1] - 1.0];
        let x = vec![1.5, 0.25];
        let fx = f(&x);
        let mut y = vec![0.0, 0.0];
        for t in 1..=6 {
            y = naive_op(&y, &x, eta, f);
            let scale = 1.0 - (1.0f64 - eta).powi(t);
            for i in 0..2 {
                assert!((y[i] - scale * fx[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn averaging_fixes_the_target_value() {
        // eta = 0.5 keeps the blend exact in floating point
        let f = |x: &[f64]| vec![x[0] + 1.0];
        let y = f(&[2.0]);
        let out = naive_op(&y, &[2.0], 0.5, f);
        assert_eq!(out, y);
    }

    #[test]
    #[should_panic(expected = "eta must lie in (0, 1)")]
    fn unit_stepsize_is_rejected() {
        naive_op(&[0.0], &[1.0], 1.0, |x| x.to_vec());
    }

    #[test]
    #[should_panic(expected = "undefined at x = 0")]
    fn reciprocal_step_rejects_the_singular_input() {
        reciprocal_op(1.0, 0.0, 0.5);
    }

    #[test]
    fn csv_exports_have_the_documented_headers_and_lengths() {
        let op = RegularOperator1D::build(Target1D::logarithm(), 128, None).unwrap();
        let mut prof = Vec::new();
        op.write_profile_csv(&mut prof).unwrap();
        let prof = String::from_utf8(prof).unwrap();
        let lines: Vec<&str> = prof.lines().collect();
        assert_eq!(lines[0], "r,h_hat,eps_hat");
        assert_eq!(lines.len(), 1 + op.profile().r_grid.len());
        assert!(lines[1].starts_with("0.00000000e0,"));

        let mut curve = Vec::new();
        op.write_epsilon_csv(&mut curve).unwrap();
        let curve = String::from_utf8(curve).unwrap();
        let lines: Vec<&str> = curve.lines().collect();
        assert_eq!(lines[0], "x,eps_x,F_x");
        assert_eq!(lines.len(), 1 + op.profile().x_grid.len());
    }
}

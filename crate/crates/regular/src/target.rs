//! Scalar targets: a function, its closed-interval domain, and the finite
//! singular set the domain must avoid.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

/// A function `F` on a finite union of closed intervals, together with the
/// sorted singular points `D` excluded from that domain.
pub struct Target1D {
    name: String,
    intervals: Vec<(f64, f64)>,
    singular: Vec<f64>,
    f: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for Target1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Target1D")
            .field("name", &self.name)
            .field("intervals", &self.intervals)
            .field("singular", &self.singular)
            .finish()
    }
}

/// Slack for closed-interval membership, absorbing grid round-off.
const CONTAINS_SLACK: f64 = 1e-12;

impl Target1D {
    /// A target over explicit intervals and singular points. Intervals must
    /// be finite, sorted, and pairwise disjoint; no singular point may fall
    /// inside an interval.
    pub fn custom(
        name: &str,
        intervals: Vec<(f64, f64)>,
        singular: Vec<f64>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        assert!(!intervals.is_empty(), "domain needs at least one interval");
        for &(lo, hi) in &intervals {
            assert!(
                lo.is_finite() && hi.is_finite() && lo < hi,
                "bad interval [{lo}, {hi}]"
            );
        }
        for w in intervals.windows(2) {
            assert!(w[0].1 < w[1].0, "intervals must be sorted and disjoint");
        }
        let mut singular = singular;
        singular.sort_by(f64::total_cmp);
        for &s in &singular {
            assert!(s.is_finite(), "singular points must be finite");
            assert!(
                !intervals.iter().any(|&(lo, hi)| lo <= s && s <= hi),
                "singular point {s} lies inside the domain"
            );
        }
        Target1D { name: name.to_string(), intervals, singular, f: Box::new(f) }
    }

    /// `1/x` on `[-1, -0.01] U [0.01, 1]`, singular at 0.
    pub fn reciprocal() -> Self {
        Target1D::custom(
            "reciprocal",
            vec![(-1.0, -0.01), (0.01, 1.0)],
            vec![0.0],
            |x| 1.0 / x,
        )
    }

    /// `tan(x)` on `[-pi/2 + 0.01, pi/2 - 0.01]`, singular at `-pi/2, pi/2`.
    pub fn tangent() -> Self {
        Target1D::custom(
            "tan",
            vec![(-FRAC_PI_2 + 0.01, FRAC_PI_2 - 0.01)],
            vec![-FRAC_PI_2, FRAC_PI_2],
            f64::tan,
        )
    }

    /// `ln(x)` on `[0.01, 1]`, singular at 0.
    pub fn logarithm() -> Self {
        Target1D::custom("log", vec![(0.01, 1.0)], vec![0.0], f64::ln)
    }

    /// `sqrt(x)` on `[0.0001, 1]`, singular at 0.
    pub fn square_root() -> Self {
        Target1D::custom("sqrt", vec![(0.0001, 1.0)], vec![0.0], f64::sqrt)
    }

    /// The four shipped targets by label.
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "reciprocal" => Some(Target1D::reciprocal()),
            "tan" => Some(Target1D::tangent()),
            "log" => Some(Target1D::logarithm()),
            "sqrt" => Some(Target1D::square_root()),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn singular(&self) -> &[f64] {
        &self.singular
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals
            .iter()
            .any(|&(lo, hi)| lo - CONTAINS_SLACK <= x && x <= hi + CONTAINS_SLACK)
    }

    /// Distance to the nearest singular point; `+inf` when the set is empty.
    pub fn distance_to_singular(&self, x: f64) -> f64 {
        self.singular
            .iter()
            .map(|&s| (x - s).abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// Span of the domain hull, `max hi - min lo`.
    pub fn diameter(&self) -> f64 {
        self.intervals.last().unwrap().1 - self.intervals.first().unwrap().0
    }

    /// About `n` points spread over the intervals proportionally to length,
    /// one inclusive linspace per interval, at least 2 points each.
    pub fn interval_grids(&self, n: usize) -> Vec<Vec<f64>> {
        assert!(n >= 2 * self.intervals.len(), "grid too coarse for the domain");
        let total: f64 = self.intervals.iter().map(|&(lo, hi)| hi - lo).sum();
        self.intervals
            .iter()
            .map(|&(lo, hi)| {
                let share = (n as f64 * (hi - lo) / total).round() as usize;
                let pts = share.max(2);
                (0..pts)
                    // pin the last node so round-off cannot push it past hi
                    .map(|k| if k == pts - 1 { hi } else { lo + (hi - lo) * k as f64 / (pts - 1) as f64 })
                    .collect()
            })
            .collect()
    }

    /// [`Self::interval_grids`] flattened into one sorted grid.
    pub fn sample_grid(&self, n: usize) -> Vec<f64> {
        self.interval_grids(n).concat()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reciprocal_target_shape() {
        let t = Target1D::reciprocal();
        assert_eq!(t.name(), "reciprocal");
        assert_eq!(t.intervals().len(), 2);
        assert!(t.contains(-1.0) && t.contains(0.01) && t.contains(0.5));
        assert!(!t.contains(0.0) && !t.contains(0.005) && !t.contains(1.5));
        assert_eq!(t.distance_to_singular(0.25), 0.25);
        assert_eq!(t.diameter(), 2.0);
        assert_eq!(t.eval(0.5), 2.0);
    }

    #[test]
    fn shipped_targets_resolve_by_name() {
        for name in ["reciprocal", "tan", "log", "sqrt"] {
            let t = Target1D::by_name(name).unwrap();
            assert_eq!(t.name(), name);
            // every singular point stays clear of the domain
            for &s in t.singular() {
                assert!(!t.contains(s));
            }
        }
        assert!(Target1D::by_name("cosh").is_none());
    }

    #[test]
    fn grid_is_sorted_in_domain_and_hits_endpoints() {
        let t = Target1D::reciprocal();
        let g = t.sample_grid(200);
        assert!(g.len() >= 199 && g.len() <= 201);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(g.iter().all(|&x| t.contains(x)));
        for e in [-1.0, -0.01, 0.01, 1.0] {
            assert!(g.iter().any(|&x| x == e), "missing endpoint {e}");
        }
    }

    #[test]
    fn empty_singular_set_reports_infinite_distance() {
        let t = Target1D::custom("bounded", vec![(0.0, 1.0)], vec![], f64::sin);
        assert_eq!(t.distance_to_singular(0.3), f64::INFINITY);
    }

    #[test]
    #[should_panic(expected = "lies inside the domain")]
    fn singular_point_inside_domain_is_rejected() {
        Target1D::custom("bad", vec![(0.0, 1.0)], vec![0.5], |x| x);
    }

    #[test]
    #[should_panic(expected = "sorted and disjoint")]
    fn overlapping_intervals_are_rejected() {
        Target1D::custom("bad", vec![(0.0, 1.0), (0.5, 2.0)], vec![], |x| x);
    }
}

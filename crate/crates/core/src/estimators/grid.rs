//! Coarse-to-fine 3D grid search.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Point;

/// Axis-aligned search box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchRegion {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl SearchRegion {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Result<Self> {
        let r = Self { min, max };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        for u in 0..3 {
            if !(self.min[u].is_finite() && self.max[u].is_finite() && self.max[u] > self.min[u]) {
                return Err(Error::invalid(format!("search region axis {u} is degenerate: [{}, {}]", self.min[u], self.max[u])));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0..3).all(|u| p[u] >= self.min[u] && p[u] <= self.max[u])
    }
}

/// Grid refinement schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSchedule {
    pub region: SearchRegion,
    /// Coarse points along x, y, z.
    pub points_per_axis: [usize; 3],
    /// Refinement rounds after the coarse grid.
    pub levels: usize,
    /// Spacing shrink per round.
    pub factor: f64,
    /// Previous-level cells covered on each side of the incumbent.
    pub span: usize,
}

impl GridSchedule {
    pub fn new(region: SearchRegion) -> Self {
        Self { region, points_per_axis: [21; 3], levels: 3, factor: 5.0, span: 2 }
    }

    pub fn validate(&self) -> Result<()> {
        self.region.validate()?;
        if self.points_per_axis.iter().any(|&n| n < 2) {
            return Err(Error::invalid("grid needs at least 2 points per axis"));
        }
        if !(self.factor > 1.0) || !self.factor.is_finite() {
            return Err(Error::invalid("refine factor must exceed 1"));
        }
        if self.levels > 0 && self.span == 0 {
            return Err(Error::invalid("refine span must be at least 1 cell"));
        }
        Ok(())
    }

    /// Coarse grid spacing per axis.
    pub fn coarse_spacing(&self) -> [f64; 3] {
        [0, 1, 2].map(|u| (self.region.max[u] - self.region.min[u]) / (self.points_per_axis[u] - 1) as f64)
    }

    /// Spacing of the last refinement level per axis.
    pub fn final_spacing(&self) -> [f64; 3] {
        let shrink = self.factor.powi(self.levels as i32);
        self.coarse_spacing().map(|h| h / shrink)
    }
}

/// Result of one grid search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchOutcome {
    pub point: Point,
    pub value: f64,
    pub evaluations: usize,
}

fn better(a: (f64, &Point), b: (f64, &Point)) -> bool {
    // NaN ranks as +inf; equal values go to the lexicographically smaller point
    let va = if a.0.is_nan() { f64::INFINITY } else { a.0 };
    let vb = if b.0.is_nan() { f64::INFINITY } else { b.0 };
    match va.total_cmp(&vb) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => (a.1.x, a.1.y, a.1.z) < (b.1.x, b.1.y, b.1.z),
    }
}

/// Evaluates `points` (in parallel) and reduces serially in index order, so the
/// argmin does not depend on scheduling.
fn best_of<F>(objective: &F, points: &[Point], mut best: Option<(f64, Point)>) -> Option<(f64, Point)>
where
    F: Fn(&Point) -> f64 + Sync,
{
    let values: Vec<f64> = points.par_iter().map(objective).collect();
    for (v, p) in values.into_iter().zip(points) {
        if best.as_ref().is_none_or(|(bv, bp)| better((v, p), (*bv, bp))) {
            best = Some((v, *p));
        }
    }
    best
}

/// Axis coordinates of a refinement around `c`: c + i·h for |i| ≤ span·factor,
/// clipped to the region; `c` itself is always included.
fn refine_axis(c: f64, h: f64, half: i64, lo: f64, hi: f64) -> Vec<f64> {
    (-half..=half)
        .map(|i| if i == 0 { c } else { c + i as f64 * h })
        .filter(|&x| (lo..=hi).contains(&x) || x == c)
        .collect()
}

fn cartesian(xs: &[f64], ys: &[f64], zs: &[f64]) -> Vec<Point> {
    let mut out = Vec::with_capacity(xs.len() * ys.len() * zs.len());
    for &z in zs {
        for &y in ys {
            for &x in xs {
                out.push(Point::new(x, y, z));
            }
        }
    }
    out
}

/// Coarse full-grid argmin followed by `levels` refinements around the incumbent.
///
/// `incumbent`, when given, competes with the coarse grid, so the returned value
/// never exceeds the objective at the incumbent.
pub fn refine_search<F>(objective: F, schedule: &GridSchedule, incumbent: Option<Point>) -> Result<SearchOutcome>
where
    F: Fn(&Point) -> f64 + Sync,
{
    schedule.validate()?;
    let reg = &schedule.region;
    let mut h = schedule.coarse_spacing();
    let axis = |u: usize| -> Vec<f64> {
        let n = schedule.points_per_axis[u];
        (0..n)
            .map(|i| if i == n - 1 { reg.max[u] } else { reg.min[u] + i as f64 * h[u] })
            .collect()
    };
    let coarse = cartesian(&axis(0), &axis(1), &axis(2));
    let mut evaluations = coarse.len();
    let mut best = best_of(&objective, &coarse, None);
    if let Some(p) = incumbent {
        best = best_of(&objective, &[p], best);
        evaluations += 1;
    }
    let half = (schedule.span as f64 * schedule.factor + 1e-9).floor() as i64;
    for _ in 0..schedule.levels {
        let (_, c) = best.expect("grid is never empty");
        h = h.map(|x| x / schedule.factor);
        let ax: Vec<Vec<f64>> = (0..3).map(|u| refine_axis(c[u], h[u], half, reg.min[u], reg.max[u])).collect();
        let pts = cartesian(&ax[0], &ax[1], &ax[2]);
        evaluations += pts.len();
        best = best_of(&objective, &pts, best);
    }
    let (value, point) = best.expect("grid is never empty");
    Ok(SearchOutcome { point, value, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schedule() -> GridSchedule {
        GridSchedule::new(SearchRegion::new([-1.0, -1.0, 0.0], [1.0, 1.0, 2.0]).unwrap())
    }

    #[test]
    fn quadratic_minimum_found_within_final_spacing() {
        let c = Point::new(0.123456, -0.4321, 1.37);
        let s = schedule();
        let out = refine_search(|p| (p - c).norm_squared(), &s, None).unwrap();
        let h = s.final_spacing();
        for u in 0..3 {
            assert!((out.point[u] - c[u]).abs() <= h[u], "axis {u}");
        }
    }

    #[test]
    fn deterministic_and_tie_broken_lexicographically() {
        let s = schedule();
        let a = refine_search(|_| 1.0, &s, None).unwrap();
        assert_eq!(a.point, Point::new(-1.0, -1.0, 0.0));
        let f = |p: &Point| (p.x * 7.0).sin() + (p.y * 3.0).cos() * p.z;
        assert_eq!(refine_search(f, &s, None).unwrap(), refine_search(f, &s, None).unwrap());
    }

    #[test]
    fn incumbent_is_never_worse() {
        let s = schedule();
        let inc = Point::new(0.01, 0.02, 0.03);
        // spike at the incumbent that the grid cannot see
        let f = |p: &Point| if (p - inc).norm() < 1e-9 { -1.0 } else { 0.0 };
        let out = refine_search(f, &s, Some(inc)).unwrap();
        assert_eq!(out.point, inc);
        assert_eq!(out.value, -1.0);
    }

    #[test]
    fn nan_counts_as_worst() {
        let s = schedule();
        let out = refine_search(|p| if p.x < 0.0 { f64::NAN } else { p.x }, &s, None).unwrap();
        assert_eq!(out.point.x, 0.0);
    }

    #[test]
    fn refinement_stays_in_region() {
        let s = schedule();
        let out = refine_search(|p| p.x + p.y + p.z, &s, None).unwrap();
        assert!(s.region.contains(&out.point));
        assert_eq!(out.point, Point::new(-1.0, -1.0, 0.0));
    }

    #[test]
    fn rejects_bad_schedules() {
        let mut s = schedule();
        s.points_per_axis = [5, 1, 5];
        assert!(refine_search(|_| 0.0, &s, None).is_err());
        let mut s = schedule();
        s.factor = 1.0;
        assert!(s.validate().is_err());
        assert!(SearchRegion::new([0.0; 3], [1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn default_schedule_sizes() {
        let s = schedule();
        assert_eq!((s.points_per_axis, s.levels, s.factor, s.span), ([21; 3], 3, 5.0, 2));
        let h = s.final_spacing();
        assert!((h[0] - 0.1 / 125.0).abs() < 1e-15);
    }
}

//! Fractional k-median by searching a geometric grid of facility costs.
//!
//! The opened mass of the facility-location solution shrinks from n at the
//! bottom of the grid to at most 1.5 at the top. Two adjacent grid values
//! bracketing k are mixed so the opened mass is exactly k; three times the
//! mixed connection cost then estimates the integral k-median value.

use std::collections::BTreeMap;

use log::warn;

use crate::error::{Error, Result};
use crate::facility::{FracLmp, FractionalSolution, SOLUTION_BETA};
use crate::metric::{PointId, WeightedMetricSpace};
use crate::tol;

/// λ_t = (1+ε)^{t−1}·L for t = 1..=T, with T the first index where λ_T ≥ H.
#[derive(Clone, Debug, PartialEq)]
pub struct LambdaGrid {
    pub low: f64,
    pub high: f64,
    pub eps: f64,
    pub steps: u32,
}

impl LambdaGrid {
    /// L = d_min·w_min/8 and H = 2n·d_max·w_max from the live extrema.
    pub fn new(space: &WeightedMetricSpace, eps: f64) -> Result<Self> {
        let low = space.d_min()? * space.w_min()? / 8.0;
        let high = 2.0 * space.len() as f64 * space.d_max()? * space.w_max()?;
        Self::from_bounds(low, high, eps)
    }

    pub fn from_bounds(low: f64, high: f64, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter(format!("eps must lie in (0, 1), got {eps}")));
        }
        let guess = ((high / low).ln() / (1.0 + eps).ln()).ceil().max(0.0) as u32 + 1;
        let mut grid = LambdaGrid { low, high, eps, steps: guess };
        while grid.steps > 1 && grid.lambda(grid.steps - 1) >= high {
            grid.steps -= 1;
        }
        while grid.lambda(grid.steps) < high {
            grid.steps += 1;
        }
        Ok(grid)
    }

    pub fn lambda(&self, t: u32) -> f64 {
        (1.0 + self.eps).powi(t as i32 - 1) * self.low
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMedianFractional {
    pub k: usize,
    pub y: BTreeMap<PointId, f64>,
    pub connection_cost: f64,
    /// Facility costs of the two grid endpoints (equal for the k = 1 branch).
    pub lambdas: (f64, f64),
    pub alphas: (f64, f64),
    /// The endpoint solutions, the second absent when a single one suffices.
    pub components: (FractionalSolution, Option<FractionalSolution>),
    /// Set when the binary search could not be used and the grid was scanned.
    pub used_fallback: bool,
}

impl KMedianFractional {
    pub fn open_mass(&self) -> f64 {
        self.y.values().sum()
    }

    /// 3·connection cost, an estimate of the integral k-median value.
    pub fn value_estimate(&self) -> f64 {
        3.0 * self.connection_cost
    }
}

fn reaches(mass: f64, k: usize) -> bool {
    tol::approx_le(k as f64, mass)
}

/// Fractional k-median solution with Σ y = k.
pub fn solve(lmp: &FracLmp, space: &WeightedMetricSpace, k: usize, eps: f64) -> Result<KMedianFractional> {
    let n = space.len();
    if n == 0 {
        return Err(Error::EmptySpace);
    }
    if k == 0 || k > n {
        return Err(Error::KOutOfRange { k, n });
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("eps must lie in (0, 1), got {eps}")));
    }
    if n == 1 {
        let only = space.ids().next().expect("one point");
        let sol = FractionalSolution {
            lambda: f64::NAN,
            y: [(only, 1.0)].into(),
            open_mass: 1.0,
            connection_cost: 0.0,
        };
        return Ok(KMedianFractional {
            k,
            y: sol.y.clone(),
            connection_cost: 0.0,
            lambdas: (f64::NAN, f64::NAN),
            alphas: (1.0, 0.0),
            components: (sol, None),
            used_fallback: false,
        });
    }
    if k == 1 {
        return solve_single(lmp, space);
    }

    let grid = LambdaGrid::new(space, eps)?;
    let mass = |t: u32| lmp.open_mass(space, grid.lambda(t));
    let (mut lo, mut hi) = (1, grid.steps);
    let mut used_fallback = false;
    if reaches(mass(lo)?, k) && !reaches(mass(hi)?, k) {
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if reaches(mass(mid)?, k) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    } else {
        warn!("grid endpoints do not bracket k = {k}; scanning the grid");
        used_fallback = true;
        let mut found = None;
        let mut prev = mass(1)?;
        for t in 1..grid.steps {
            let next = mass(t + 1)?;
            if reaches(prev, k) && !reaches(next, k) {
                found = Some(t);
                break;
            }
            prev = next;
        }
        lo = found.ok_or(Error::GridSearchFailed)?;
        hi = lo + 1;
    }

    let first = lmp.solution(space, grid.lambda(lo))?;
    if tol::approx_eq(first.open_mass, k as f64) {
        return Ok(KMedianFractional {
            k,
            y: first.y.clone(),
            connection_cost: first.connection_cost,
            lambdas: (first.lambda, first.lambda),
            alphas: (1.0, 0.0),
            components: (first, None),
            used_fallback,
        });
    }
    let second = lmp.solution(space, grid.lambda(hi))?;
    let (m1, m2) = (first.open_mass, second.open_mass);
    let a1 = (k as f64 - m2) / (m1 - m2);
    let a2 = 1.0 - a1;
    let y = first
        .y
        .iter()
        .map(|(&i, &y1)| (i, a1 * y1 + a2 * second.y[&i]))
        .collect();
    Ok(KMedianFractional {
        k,
        y,
        connection_cost: a1 * first.connection_cost + a2 * second.connection_cost,
        lambdas: (first.lambda, second.lambda),
        alphas: (a1, a2),
        components: (first, Some(second)),
        used_fallback,
    })
}

/// k = 1: open the normalized solution at λ* = n·d_max·w_max/4 and connect
/// every demand to every facility in proportion to y.
fn solve_single(lmp: &FracLmp, space: &WeightedMetricSpace) -> Result<KMedianFractional> {
    let lambda = space.len() as f64 * space.d_max()? * space.w_max()? / 4.0;
    let raw = lmp.solution(space, lambda)?;
    let total = raw.open_mass;
    let y: BTreeMap<PointId, f64> = raw.y.iter().map(|(&i, &v)| (i, v / total)).collect();
    let mut cost = 0.0;
    for (&i, &yi) in &y {
        cost += yi * lmp.radii().weighted_distance_sum(i)? / SOLUTION_BETA;
    }
    Ok(KMedianFractional {
        k: 1,
        y,
        connection_cost: cost,
        lambdas: (lambda, lambda),
        alphas: (1.0, 0.0),
        components: (raw, None),
        used_fallback: false,
    })
}

/// 3·(fractional k-median cost), or 0 when every point can be a center.
pub fn value_estimate(lmp: &FracLmp, space: &WeightedMetricSpace, k: usize, eps: f64) -> Result<f64> {
    if space.len() <= k {
        return Ok(0.0);
    }
    Ok(solve(lmp, space, k, eps)?.value_estimate())
}

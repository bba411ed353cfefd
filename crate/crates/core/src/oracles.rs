//! Brute-force reference implementations.
//!
//! Everything here is deliberately slow and direct: exhaustive enumeration,
//! full sorting, definitional sums. These functions ground the tests of the
//! fast data structures and are exposed through the CLI `oracle` command.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::metric::{PointId, WeightedMetricSpace};
use crate::objective::{scaled_pow, CenterSet, Norm};
use crate::tol;

pub const CLUSTERING_CAP: usize = 24;
pub const UFL_CAP: usize = 20;

struct Snapshot {
    ids: Vec<PointId>,
    weights: Vec<f64>,
    dist: Vec<Vec<f64>>,
}

impl Snapshot {
    fn take(space: &WeightedMetricSpace) -> Self {
        let ids: Vec<PointId> = space.ids().collect();
        let weights = space.points().map(|(_, w)| w).collect();
        let dist = ids
            .iter()
            .map(|&a| ids.iter().map(|&b| space.dist(a, b)).collect())
            .collect();
        Snapshot { ids, weights, dist }
    }

    fn cost(&self, centers: &[usize], norm: Norm) -> f64 {
        let nearest = |x: usize| {
            centers
                .iter()
                .map(|&c| self.dist[x][c])
                .fold(f64::INFINITY, f64::min)
        };
        match norm {
            Norm::Infinity => (0..self.ids.len()).map(nearest).fold(0.0, f64::max),
            Norm::Finite(p) => {
                let sum: f64 = (0..self.ids.len())
                    .map(|x| self.weights[x] * nearest(x).powi(p as i32))
                    .sum();
                sum.powf(1.0 / p as f64)
            }
        }
    }
}

/// Advances `idx` to the next m-combination of `0..n` in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let m = idx.len();
    for pos in (0..m).rev() {
        if idx[pos] < n - m + pos {
            idx[pos] += 1;
            for later in pos + 1..m {
                idx[later] = idx[later - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Exact optimal proper solution with at most k centers.
pub fn brute_opt_clustering(space: &WeightedMetricSpace, k: usize, norm: Norm) -> Result<(CenterSet, f64)> {
    let n = space.len();
    if n > CLUSTERING_CAP {
        return Err(Error::TooLarge { n, cap: CLUSTERING_CAP });
    }
    if n == 0 {
        return Err(Error::EmptySpace);
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let snap = Snapshot::take(space);
    // Extra centers never hurt, so only subsets of size min(k, n) are needed.
    let m = k.min(n);
    let mut idx: Vec<usize> = (0..m).collect();
    let mut best_cost = f64::INFINITY;
    let mut best = idx.clone();
    loop {
        let c = snap.cost(&idx, norm);
        if c < best_cost {
            best_cost = c;
            best.clone_from(&idx);
        }
        if !next_combination(&mut idx, n) {
            break;
        }
    }
    Ok((best.iter().map(|&i| snap.ids[i]).collect(), best_cost))
}

/// Exact optimal integral uncapacitated facility location solution.
pub fn brute_opt_ufl(space: &WeightedMetricSpace, lambda: f64) -> Result<(CenterSet, f64)> {
    let n = space.len();
    if n > UFL_CAP {
        return Err(Error::TooLarge { n, cap: UFL_CAP });
    }
    if n == 0 {
        return Err(Error::EmptySpace);
    }
    let snap = Snapshot::take(space);
    let mut best_cost = f64::INFINITY;
    let mut best_mask = 0u32;
    for mask in 1u32..(1u32 << n) {
        let open: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        let c = lambda * open.len() as f64 + snap.cost(&open, Norm::Finite(1));
        if c < best_cost {
            best_cost = c;
            best_mask = mask;
        }
    }
    let centers = (0..n)
        .filter(|&i| best_mask & (1 << i) != 0)
        .map(|i| snap.ids[i])
        .collect();
    Ok((centers, best_cost))
}

/// The ball-growing radius r_i and connection value C_i in the β-scaled
/// metric, computed by sorting and solving the piecewise-linear equation.
pub fn brute_radius(space: &WeightedMetricSpace, i: PointId, lambda: f64, beta: f64) -> Result<(f64, f64)> {
    let wi = space.weight(i)?;
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(Error::NonpositiveLambda(lambda));
    }
    let mut pairs: Vec<(f64, f64)> = space.points().map(|(j, w)| (beta * space.dist(i, j), w)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut mass = 0.0;
    let mut moment = 0.0;
    let mut r = f64::NAN;
    for (idx, &(d, q)) in pairs.iter().enumerate() {
        mass += q;
        moment += q * d;
        let candidate = (lambda + moment) / mass;
        match pairs.get(idx + 1) {
            Some(&(next, _)) if candidate > next => continue,
            _ => {
                r = candidate;
                break;
            }
        }
    }
    let c: f64 = pairs
        .iter()
        .filter(|&&(d, _)| d <= r)
        .map(|&(d, q)| q * (r - d) * wi * d)
        .sum::<f64>()
        / lambda;
    Ok((r, c))
}

/// Naive swap evaluation: returns the y ∈ S+x minimizing Σ w·(d(·, S+x−y)/scale)^p,
/// ties to the smallest id, and that cost.
pub fn naive_best_swap(
    space: &WeightedMetricSpace,
    centers: &CenterSet,
    x: PointId,
    p: u32,
    scale: f64,
) -> (PointId, f64) {
    let mut with_x = centers.clone();
    with_x.insert(x);
    let costs: Vec<(PointId, f64)> = with_x
        .iter()
        .map(|&y| {
            let mut trial = with_x.clone();
            trial.remove(&y);
            (y, swap_cost(space, &trial, p, scale))
        })
        .collect();
    let min = costs.iter().map(|&(_, c)| c).fold(f64::INFINITY, f64::min);
    *costs
        .iter()
        .find(|&&(_, c)| c <= min + tol::slack(c, min))
        .expect("at least one candidate")
}

fn swap_cost(space: &WeightedMetricSpace, centers: &CenterSet, p: u32, scale: f64) -> f64 {
    space
        .points()
        .map(|(z, w)| {
            let d = centers
                .iter()
                .map(|&c| space.dist(z, c))
                .fold(f64::INFINITY, f64::min);
            w * scaled_pow(d, scale, p)
        })
        .sum()
}

/// True iff no single swap (drop some y ∈ S, add some x ∈ X∖S) strictly
/// decreases cl^p beyond tolerance.
pub fn brute_local_optimum_check(space: &WeightedMetricSpace, centers: &CenterSet, pool: &CenterSet, p: u32) -> bool {
    let current = swap_cost(space, centers, p, 1.0);
    for &x in pool.difference(centers) {
        for &y in centers {
            let mut trial = centers.clone();
            trial.remove(&y);
            trial.insert(x);
            if tol::definitely_lt(swap_cost(space, &trial, p, 1.0), current) {
                return false;
            }
        }
    }
    true
}

/// Greedy ordered projection of `order` onto `targets`: each y in turn takes
/// its nearest not-yet-taken target, ties to the smallest id.
pub fn project_from_scratch(space: &WeightedMetricSpace, order: &[PointId], targets: &CenterSet) -> CenterSet {
    let mut taken = BTreeSet::new();
    for &y in order {
        let pick = targets
            .iter()
            .filter(|t| !taken.contains(*t))
            .map(|&t| (space.dist(y, t), t))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if let Some((_, t)) = pick {
            taken.insert(t);
        }
    }
    taken
}

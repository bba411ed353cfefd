//! Randomized single-swap local search restricted to a candidate pool, and
//! the BestSwap oracle that evaluates every removal in one pass over the
//! neighbor lists.

use std::collections::{BTreeMap, HashMap};

use log::trace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metric::{PointId, WeightedMetricSpace};
use crate::neighbors::NeighborLists;
use crate::objective::{scaled_pow, CenterSet};
use crate::tol;

#[derive(Clone, Debug, PartialEq)]
pub struct LocalSearchParams {
    pub p: u32,
    /// Accuracy, clamped to at most 1/2 when the budget is computed.
    pub eps: f64,
    /// Confidence constant c ≥ 1.
    pub confidence: f64,
    pub seed: u64,
    pub max_iters_override: Option<u64>,
}

impl LocalSearchParams {
    pub fn new(p: u32, eps: f64, seed: u64) -> Self {
        LocalSearchParams { p, eps, confidence: 1.0, seed, max_iters_override: None }
    }

    pub fn effective_eps(&self) -> f64 {
        self.eps.min(0.5)
    }

    /// ⌈2c·p·s·ln n·ln(nΔ/ε)/ε²⌉, or the override. Both logs are floored at
    /// ln 2 and Δ is taken as 1 when the space has no pair.
    pub fn iteration_budget(&self, n: usize, aspect_ratio: f64, s: usize) -> u64 {
        if let Some(cap) = self.max_iters_override {
            return cap;
        }
        if s == 0 {
            return 0;
        }
        let eps = self.effective_eps();
        let n = n.max(2) as f64;
        let delta = if aspect_ratio.is_finite() && aspect_ratio >= 1.0 { aspect_ratio } else { 1.0 };
        let log_n = n.ln();
        let log_range = (n * delta / eps).ln().max(std::f64::consts::LN_2);
        let raw = 2.0 * self.confidence * f64::from(self.p) * s as f64 * log_n * log_range / (eps * eps);
        raw.ceil() as u64
    }
}

/// Distance scale for p-th powers: d_max of the live space, or 1.
pub fn cost_scale(space: &WeightedMetricSpace) -> f64 {
    space.d_max().unwrap_or(1.0)
}

/// Σ_z w(z)·(d(z, L_z(1))/scale)^p over live z.
pub fn lists_cost(space: &WeightedMetricSpace, lists: &NeighborLists, p: u32, scale: f64) -> f64 {
    space
        .points()
        .map(|(z, w)| match lists.first_two(z).0 {
            Some((_, d)) => w * scaled_pow(d, scale, p),
            None => 0.0,
        })
        .sum()
}

/// Finds y ∈ S+x minimizing cl(S+x−y)^p, ties to the smallest id, and returns
/// it with that cost in units of `scale`. The lists must hold exactly S on
/// entry and hold exactly S again on return.
pub fn best_swap(
    space: &WeightedMetricSpace,
    centers: &CenterSet,
    x: PointId,
    lists: &mut NeighborLists,
    p: u32,
    scale: f64,
) -> Result<(PointId, f64)> {
    if lists.candidates() != centers {
        return Err(Error::CandidateMismatch);
    }
    if centers.is_empty() {
        return Err(Error::EmptyCenters);
    }
    lists.add_candidate(space, x)?;
    let picked = pick_removal(space, lists, p, scale);
    lists.remove_candidate(space, x)?;
    Ok(picked)
}

/// The core of BestSwap once x has been added to the lists.
fn pick_removal(space: &WeightedMetricSpace, lists: &NeighborLists, p: u32, scale: f64) -> (PointId, f64) {
    let mut base = 0.0;
    let mut gamma: BTreeMap<PointId, f64> = BTreeMap::new();
    for (z, w) in space.points() {
        let (first, second) = lists.first_two(z);
        let (c1, d1) = first.expect("at least two candidates");
        let (_, d2) = second.expect("at least two candidates");
        let near = w * scaled_pow(d1, scale, p);
        base += near;
        *gamma.entry(c1).or_insert(0.0) += w * scaled_pow(d2, scale, p) - near;
    }
    let costs: Vec<(PointId, f64)> = lists
        .candidates()
        .iter()
        .map(|&y| (y, base + gamma.get(&y).copied().unwrap_or(0.0)))
        .collect();
    let min = costs.iter().map(|&(_, c)| c).fold(f64::INFINITY, f64::min);
    let y = costs
        .iter()
        .find(|&&(_, c)| c <= min + tol::slack(c, min))
        .map(|&(y, _)| y)
        .expect("candidate set is nonempty");
    // Re-sum the winner directly in ascending point order so the reported
    // cost does not depend on the order of the Γ accumulation.
    let cost = space
        .points()
        .map(|(z, w)| {
            let (first, second) = lists.first_two(z);
            let (c1, d1) = first.expect("at least two candidates");
            let d = if c1 == y { second.expect("at least two candidates").1 } else { d1 };
            w * scaled_pow(d, scale, p)
        })
        .sum();
    (y, cost)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome {
    pub centers: CenterSet,
    pub iterations: u64,
    /// Final Σ w·(d/scale)^p.
    pub cost: f64,
}

/// The k candidates of `pool` nearest to its smallest id, by (distance, id).
fn initial_solution(space: &WeightedMetricSpace, pool: &CenterSet, k: usize) -> CenterSet {
    let anchor = *pool.first().expect("pool is nonempty");
    let mut ranked: Vec<(f64, PointId)> = pool.iter().map(|&c| (space.dist(anchor, c), c)).collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    ranked.into_iter().take(k).map(|(_, c)| c).collect()
}

/// Randomized local search over the pool X: returns S ⊆ X with |S| = min(k, |X|).
///
/// The lists must hold exactly X on entry; they hold exactly X again on return.
pub fn rand_local_search(
    space: &WeightedMetricSpace,
    pool: &CenterSet,
    k: usize,
    params: &LocalSearchParams,
    lists: &mut NeighborLists,
) -> Result<SearchOutcome> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if lists.candidates() != pool {
        return Err(Error::CandidateMismatch);
    }
    if pool.len() <= k {
        return Ok(SearchOutcome { centers: pool.clone(), iterations: 0, cost: 0.0 });
    }
    let scale = cost_scale(space);
    let p = params.p;
    let mut centers = initial_solution(space, pool, k);
    let mut outside: Vec<PointId> = pool.difference(&centers).copied().collect();
    for &x in &outside {
        lists.remove_candidate(space, x)?;
    }
    let mut slot: HashMap<PointId, usize> = outside.iter().enumerate().map(|(i, &x)| (x, i)).collect();

    let budget = params.iteration_budget(space.len(), space.aspect_ratio().unwrap_or(1.0), pool.len() - k);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut cost = lists_cost(space, lists, p, scale);
    for _ in 0..budget {
        let x = outside[rng.random_range(0..outside.len())];
        lists.add_candidate(space, x)?;
        let (y, new_cost) = pick_removal(space, lists, p, scale);
        assert!(
            tol::approx_le(new_cost, cost),
            "local search cost increased from {cost} to {new_cost}"
        );
        if y == x {
            lists.remove_candidate(space, x)?;
        } else {
            lists.remove_candidate(space, y)?;
            centers.remove(&y);
            centers.insert(x);
            let i = slot.remove(&x).expect("x was outside S");
            outside[i] = y;
            slot.insert(y, i);
            trace!("swap in {x}, out {y}: cost {cost} -> {new_cost}");
        }
        cost = new_cost;
    }
    for &x in &outside {
        lists.add_candidate(space, x)?;
    }
    Ok(SearchOutcome { centers, iterations: budget, cost })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{clustering_cost, unnormalized_cost, Norm};
    use crate::oracles::{brute_local_optimum_check, naive_best_swap};
    use proptest::prelude::*;

    fn ids(v: &[u64]) -> CenterSet {
        v.iter().map(|&i| PointId(i)).collect()
    }

    fn line() -> WeightedMetricSpace {
        WeightedMetricSpace::on_line(&[0.0, 1.0, 3.0], &[1.0; 3]).unwrap()
    }

    #[test]
    fn line_best_swap() {
        let s = line();
        let centers = ids(&[0, 2]);
        let mut lists = NeighborLists::build(&s, &centers).unwrap();
        let before = lists.clone();
        assert_eq!(best_swap(&s, &centers, PointId(1), &mut lists, 1, 1.0).unwrap(), (PointId(0), 1.0));
        assert_eq!(lists, before);
    }

    #[test]
    fn dominated_candidate_is_dropped() {
        let s = WeightedMetricSpace::on_line(&[0.0, 1.0, 2.0, 100.0], &[1.0, 1.0, 1.0, 1e-3]).unwrap();
        let centers = ids(&[0, 2]);
        let mut lists = NeighborLists::build(&s, &centers).unwrap();
        let current = unnormalized_cost(&s, &centers, 1).unwrap();
        let (y, c) = best_swap(&s, &centers, PointId(3), &mut lists, 1, 1.0).unwrap();
        // Point 3 pays 98·1e-3 but removing it saves nothing elsewhere.
        assert_eq!(y, PointId(3));
        assert_eq!(c, current);
    }

    #[test]
    fn mismatched_lists_rejected() {
        let s = line();
        let mut lists = NeighborLists::build(&s, &ids(&[0])).unwrap();
        assert_eq!(
            best_swap(&s, &ids(&[0, 2]), PointId(1), &mut lists, 1, 1.0),
            Err(Error::CandidateMismatch)
        );
    }

    #[test]
    fn small_pool_returned_unchanged() {
        let s = line();
        let pool = ids(&[0, 2]);
        let mut lists = NeighborLists::build(&s, &pool).unwrap();
        let out = rand_local_search(&s, &pool, 2, &LocalSearchParams::new(1, 0.5, 7), &mut lists).unwrap();
        assert_eq!(out.centers, pool);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn line_reaches_local_optimum() {
        let s = line();
        let pool = ids(&[0, 1, 2]);
        for seed in 0..20 {
            let mut lists = NeighborLists::build(&s, &pool).unwrap();
            let out = rand_local_search(&s, &pool, 2, &LocalSearchParams::new(1, 0.5, seed), &mut lists).unwrap();
            assert_eq!(clustering_cost(&s, &out.centers, Norm::Finite(1)).unwrap(), 1.0);
            assert_eq!(lists.candidates(), &pool);
        }
    }

    #[test]
    fn budget_formula() {
        let params = LocalSearchParams::new(2, 0.5, 0);
        // 2·1·2·3·ln 8·ln(8·4/0.5)/0.25
        let expected = (2.0 * 2.0 * 3.0 * 8f64.ln() * 64f64.ln() / 0.25).ceil() as u64;
        assert_eq!(params.iteration_budget(8, 4.0, 3), expected);
        assert_eq!(params.iteration_budget(8, 4.0, 0), 0);
        let capped = LocalSearchParams { max_iters_override: Some(5), ..params };
        assert_eq!(capped.iteration_budget(8, 4.0, 3), 5);
    }

    fn random_space(xs: &[(i32, i32)], ws: &[u8]) -> WeightedMetricSpace {
        let mut s = WeightedMetricSpace::with_coords(Default::default());
        for (i, (&(a, b), &w)) in xs.iter().zip(ws).enumerate() {
            s.insert_point(PointId(i as u64), f64::from(w) + 1.0, &[f64::from(a), f64::from(b)]).unwrap();
        }
        s
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn best_swap_matches_naive(
            pts in proptest::collection::btree_set((-50i32..50, -50i32..50), 4..20),
            ws in proptest::collection::vec(0u8..5, 20),
            picks in proptest::collection::vec(any::<proptest::sample::Index>(), 1..6),
            p in 1u32..4,
        ) {
            let pts: Vec<_> = pts.into_iter().collect();
            let s = random_space(&pts, &ws);
            let n = s.len();
            let centers: CenterSet = picks.iter().map(|ix| PointId(ix.index(n) as u64)).collect();
            let scale = cost_scale(&s);
            for x in s.ids().filter(|x| !centers.contains(x)) {
                let mut lists = NeighborLists::build(&s, &centers).unwrap();
                let fast = best_swap(&s, &centers, x, &mut lists, p, scale).unwrap();
                prop_assert_eq!(fast, naive_best_swap(&s, &centers, x, p, scale));
                prop_assert_eq!(lists.candidates(), &centers);
            }
        }

        #[test]
        fn search_is_deterministic_and_sized(
            pts in proptest::collection::btree_set((-50i32..50, -50i32..50), 3..14),
            ws in proptest::collection::vec(0u8..5, 14),
            k in 1usize..5,
            seed in any::<u64>(),
        ) {
            let pts: Vec<_> = pts.into_iter().collect();
            let s = random_space(&pts, &ws);
            let pool: CenterSet = s.ids().collect();
            let params = LocalSearchParams { max_iters_override: Some(200), ..LocalSearchParams::new(1, 0.5, seed) };
            let mut l1 = NeighborLists::build(&s, &pool).unwrap();
            let mut l2 = l1.clone();
            let a = rand_local_search(&s, &pool, k, &params, &mut l1).unwrap();
            let b = rand_local_search(&s, &pool, k, &params, &mut l2).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.centers.len(), k.min(pool.len()));
            prop_assert!(a.centers.is_subset(&pool));
            prop_assert_eq!(l1.candidates(), &pool);
        }
    }

    #[test]
    fn full_budget_often_locally_optimal() {
        let pts: Vec<(i32, i32)> = (0..10).map(|i| ((i * 37) % 23, (i * 11) % 17)).collect();
        let s = random_space(&pts, &[0; 10]);
        let pool: CenterSet = s.ids().collect();
        let mut lists = NeighborLists::build(&s, &pool).unwrap();
        let out = rand_local_search(&s, &pool, 3, &LocalSearchParams::new(1, 0.5, 1), &mut lists).unwrap();
        assert!(brute_local_optimum_check(&s, &out.centers, &pool, 1));
    }
}
